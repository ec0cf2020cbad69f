#include "ctxlm/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace ctxlm {

using nlohmann::json;

namespace {

constexpr double kRowTolerance = 1e-9;

std::vector<std::string> template_parts(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> parts;
  std::string w;
  while (in >> w) parts.push_back(w);
  return parts;
}

bool is_slot(const std::string& part) { return part.size() > 2 && part.front() == '{' && part.back() == '}'; }
std::string slot_name(const std::string& part) { return part.substr(1, part.size() - 2); }

std::vector<double> normalized(std::vector<double> w) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) v /= total;
  return w;
}

std::size_t sample_index(const std::vector<double>& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (x < acc) return i;
  }
  return probs.size() - 1;
}

void check_distribution(const std::vector<double>& row, const std::string& what) {
  double total = 0.0;
  for (double p : row) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw GeneratorConfigError(what + ": negative or non-finite probability");
    total += p;
  }
  if (std::abs(total - 1.0) > kRowTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << ": probabilities sum to " << total << ", expected 1";
    throw GeneratorConfigError(msg.str());
  }
}

void check_table(const ConditionalTable& table, std::size_t outcomes, const GeneratorConfig& config,
                 const std::string& what) {
  const std::size_t expected_rows = field_domain_size(table.field, config);
  if (table.rows.size() != expected_rows) {
    throw GeneratorConfigError(what + ": expected " + std::to_string(expected_rows) + " rows for field '" +
                               table.field + "', got " + std::to_string(table.rows.size()));
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (table.rows[r].size() != outcomes) {
      throw GeneratorConfigError(what + ": row " + std::to_string(r) + " has " + std::to_string(table.rows[r].size()) +
                                 " entries, expected " + std::to_string(outcomes));
    }
    check_distribution(table.rows[r], what + " row " + std::to_string(r));
  }
}

ConditionalTable averaged(const ConditionalTable& table) {
  ConditionalTable out;
  out.field = "none";
  std::vector<double> mean(table.rows.empty() ? 0 : table.rows[0].size(), 0.0);
  for (const auto& row : table.rows)
    for (std::size_t i = 0; i < row.size(); ++i) mean[i] += row[i] / static_cast<double>(table.rows.size());
  out.rows = {normalized(mean)};
  return out;
}

json table_to_json(const ConditionalTable& t) { return json{{"field", t.field}, {"rows", t.rows}}; }

ConditionalTable table_from_json(const json& j) {
  ConditionalTable t;
  t.field = j.value("field", "none");
  t.rows = j.at("rows").get<std::vector<std::vector<double>>>();
  return t;
}

// ---- default config helpers ----

std::vector<double> zipf(std::size_t n, double s = 1.0) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / std::pow(static_cast<double>(i + 1), s);
  return normalized(w);
}

ConditionalTable flat_table(std::vector<double> probs) { return ConditionalTable{"none", {normalized(std::move(probs))}}; }

/// Row mixing named primary outcomes with the leftover mass spread evenly.
std::vector<double> peaked_row(const std::vector<std::string>& values, const std::map<std::string, double>& primary) {
  double used = 0.0;
  for (auto& [k, p] : primary) used += p;
  std::vector<double> row(values.size(), (1.0 - used) / static_cast<double>(values.size()));
  for (auto& [k, p] : primary) {
    auto it = std::find(values.begin(), values.end(), k);
    if (it == values.end()) throw std::logic_error("unknown slot value " + k);
    row[static_cast<std::size_t>(it - values.begin())] += p;
  }
  return normalized(row);
}

std::vector<std::string> pseudo_words(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> onset = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "br", "tr", "gl"};
  static const std::vector<std::string> vowel = {"a", "e", "i", "o", "u", "ai", "ou", "ee"};
  static const std::vector<std::string> coda = {"", "n", "r", "l", "x", "m", "s"};
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  while (out.size() < n) {
    std::string w;
    const int syll = 2 + static_cast<int>(rng() % 2);
    for (int s = 0; s < syll; ++s) {
      w += onset[rng() % onset.size()];
      w += vowel[rng() % vowel.size()];
    }
    w += coda[rng() % coda.size()];
    if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
  }
  return out;
}

std::vector<std::string> number_words(int lo, int hi) {
  std::vector<std::string> out;
  for (int i = lo; i <= hi; ++i) out.push_back(std::to_string(i));
  return out;
}

}  // namespace

std::size_t field_domain_size(const std::string& field, const GeneratorConfig& config) {
  if (field == "none") return 1;
  if (field == "hour") return 24;
  if (field == "weekday") return 7;
  if (field == "week") return 53;
  if (field == "month") return 12;
  if (field == "geo") return config.geo_hashes.size();
  if (field == "prompt") return 2;
  throw GeneratorConfigError("unknown conditioning field '" + field + "'");
}

std::size_t field_value(const std::string& field, const ContextRecord& rec, const GeneratorConfig& config) {
  if (field == "none") return 0;
  if (field == "hour") return static_cast<std::size_t>(rec.hour);
  if (field == "weekday") return static_cast<std::size_t>(rec.weekday);
  if (field == "week") return static_cast<std::size_t>(rec.iso_week - 1);
  if (field == "month") return static_cast<std::size_t>(rec.month - 1);
  if (field == "geo") {
    auto it = std::find(config.geo_hashes.begin(), config.geo_hashes.end(), rec.geo_hash.value_or(""));
    if (it == config.geo_hashes.end()) throw GeneratorConfigError("record geo-hash not in config");
    return static_cast<std::size_t>(it - config.geo_hashes.begin());
  }
  if (field == "prompt") return rec.prompt.value_or(DialoguePrompt::Initial) == DialoguePrompt::Initial ? 0 : 1;
  throw GeneratorConfigError("unknown conditioning field '" + field + "'");
}

void GeneratorConfig::validate() const {
  if (utterances == 0) throw GeneratorConfigError("utterances must be positive");
  ContextRecord lo, hi;
  try {
    lo = parse_context(start_date + " 00:00");
    hi = parse_context(end_date + " 00:00");
  } catch (const ContextParseError& e) {
    throw GeneratorConfigError(std::string("date range: ") + e.what());
  }
  if (hi < lo) throw GeneratorConfigError("date range is empty");
  if (hour_probs.size() != 24) throw GeneratorConfigError("hour_probs needs 24 entries");
  check_distribution(hour_probs, "hour_probs");
  if (geo_hashes.empty()) throw GeneratorConfigError("geo_hashes must be nonempty");
  if (geo_probs.size() != geo_hashes.size()) throw GeneratorConfigError("geo_probs must match geo_hashes");
  check_distribution(geo_probs, "geo_probs");
  if (!(initial_prompt_prob >= 0.0 && initial_prompt_prob <= 1.0)) {
    throw GeneratorConfigError("initial_prompt_prob must be in [0, 1]");
  }
  if (templates.empty()) throw GeneratorConfigError("no templates");
  check_table(template_table, templates.size(), *this, "template_table");
  for (const auto& t : templates) {
    const auto parts = template_parts(t.text);
    if (parts.empty()) throw GeneratorConfigError("template '" + t.name + "' has empty text");
    for (const auto& p : parts) {
      if (is_slot(p) && !slots.count(slot_name(p))) {
        throw GeneratorConfigError("template '" + t.name + "' references unknown slot " + p);
      }
    }
  }
  for (const auto& [name, slot] : slots) {
    if (slot.values.empty()) throw GeneratorConfigError("slot '" + name + "' has no values");
    check_table(slot.table, slot.values.size(), *this, "slot '" + name + "'");
  }
}

GeneratorConfig GeneratorConfig::without_planted_effects() const {
  GeneratorConfig out = *this;
  out.template_table = averaged(template_table);
  for (auto& [name, slot] : out.slots) slot.table = averaged(slot.table);
  return out;
}

json GeneratorConfig::to_json() const {
  json j;
  j["utterances"] = utterances;
  j["start_date"] = start_date;
  j["end_date"] = end_date;
  j["hour_probs"] = hour_probs;
  j["geo_hashes"] = geo_hashes;
  j["geo_probs"] = geo_probs;
  j["initial_prompt_prob"] = initial_prompt_prob;
  j["templates"] = json::array();
  for (const auto& t : templates) j["templates"].push_back({{"name", t.name}, {"text", t.text}});
  j["template_table"] = table_to_json(template_table);
  j["slots"] = json::object();
  for (const auto& [name, s] : slots) j["slots"][name] = {{"values", s.values}, {"table", table_to_json(s.table)}};
  return j;
}

GeneratorConfig GeneratorConfig::from_json(const json& j) {
  try {
    GeneratorConfig c;
    c.utterances = j.value("utterances", c.utterances);
    c.start_date = j.value("start_date", c.start_date);
    c.end_date = j.value("end_date", c.end_date);
    c.hour_probs = j.at("hour_probs").get<std::vector<double>>();
    c.geo_hashes = j.at("geo_hashes").get<std::vector<std::string>>();
    c.geo_probs = j.at("geo_probs").get<std::vector<double>>();
    c.initial_prompt_prob = j.value("initial_prompt_prob", c.initial_prompt_prob);
    for (const auto& t : j.at("templates")) c.templates.push_back({t.at("name").get<std::string>(), t.at("text").get<std::string>()});
    c.template_table = table_from_json(j.at("template_table"));
    for (const auto& [name, s] : j.at("slots").items()) {
      c.slots[name] = SlotSpec{s.at("values").get<std::vector<std::string>>(), table_from_json(s.at("table"))};
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw GeneratorConfigError(std::string("generator config: ") + e.what());
  }
}

Corpus generate_synthetic(const GeneratorConfig& config, std::uint64_t seed) {
  config.validate();
  const ContextRecord lo = parse_context(config.start_date + " 00:00");
  const ContextRecord hi = parse_context(config.end_date + " 00:00");

  // enumerate dates once; the range is small
  std::vector<std::array<int, 3>> dates;
  for (int y = lo.year; y <= hi.year; ++y)
    for (int m = 1; m <= 12; ++m)
      for (int d = 1; d <= 31; ++d) {
        if (!is_valid_date(y, m, d)) continue;
        const std::array<int, 3> ymd{y, m, d};
        const std::array<int, 3> lo_ymd{lo.year, lo.month, lo.day}, hi_ymd{hi.year, hi.month, hi.day};
        if (ymd < lo_ymd || ymd > hi_ymd) continue;
        dates.push_back(ymd);
      }

  std::vector<std::vector<std::string>> parts;
  for (const auto& t : config.templates) parts.push_back(template_parts(t.text));

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_date(0, dates.size() - 1);
  std::uniform_int_distribution<int> pick_minute(0, 59);
  std::bernoulli_distribution initial(config.initial_prompt_prob);

  Corpus corpus;
  corpus.reserve(config.utterances);
  for (std::size_t n = 0; n < config.utterances; ++n) {
    const auto& ymd = dates[pick_date(rng)];
    const int hour = static_cast<int>(sample_index(config.hour_probs, rng));
    const int minute = pick_minute(rng);
    Utterance u;
    u.context = make_context(ymd[0], ymd[1], ymd[2], hour, minute);
    u.context.geo_hash = config.geo_hashes[sample_index(config.geo_probs, rng)];
    u.context.prompt = initial(rng) ? DialoguePrompt::Initial : DialoguePrompt::FollowUp;

    const auto& trow = config.template_table.rows[field_value(config.template_table.field, u.context, config)];
    const std::size_t t = sample_index(trow, rng);
    for (const auto& p : parts[t]) {
      if (!is_slot(p)) {
        u.tokens.push_back(p);
        continue;
      }
      const SlotSpec& slot = config.slots.at(slot_name(p));
      const auto& srow = slot.table.rows[field_value(slot.table.field, u.context, config)];
      std::istringstream words(slot.values[sample_index(srow, rng)]);
      std::string w;
      while (words >> w) u.tokens.push_back(w);
    }
    corpus.push_back(std::move(u));
  }
  return corpus;
}

std::vector<double> first_word_probability(const GeneratorConfig& config, const std::string& word) {
  std::vector<double> out(config.template_table.rows.size(), 0.0);
  for (std::size_t t = 0; t < config.templates.size(); ++t) {
    const auto parts = template_parts(config.templates[t].text);
    double share = 0.0;
    if (!is_slot(parts[0])) {
      share = parts[0] == word ? 1.0 : 0.0;
    } else {
      // only context-free slots can be resolved against the template table
      const SlotSpec& slot = config.slots.at(slot_name(parts[0]));
      if (slot.table.field != "none") throw GeneratorConfigError("first slot of a template is context-conditioned");
      for (std::size_t v = 0; v < slot.values.size(); ++v) {
        std::istringstream words(slot.values[v]);
        std::string first;
        words >> first;
        if (first == word) share += slot.table.rows[0][v];
      }
    }
    for (std::size_t r = 0; r < out.size(); ++r) out[r] += config.template_table.rows[r][t] * share;
  }
  return out;
}

// ---------------------------------------------------------------------------

GeneratorConfig default_generator_config() {
  GeneratorConfig c;

  // fewer utterances overnight
  std::vector<double> hours(24);
  for (int h = 0; h < 24; ++h) hours[h] = (h >= 1 && h <= 4) ? 0.4 : 1.0;
  c.hour_probs = normalized(hours);

  c.geo_hashes = {"9q", "9r", "9w", "9x", "9y", "9z", "dh", "dj", "dn", "dp", "dq", "dr", "c2", "c8", "f2", "f8"};
  c.geo_probs = zipf(c.geo_hashes.size(), 0.6);

  auto slot = [&](const std::string& name, std::vector<std::string> values, ConditionalTable table) {
    c.slots[name] = SlotSpec{std::move(values), std::move(table)};
  };

  // ---- planted slots ----
  const std::vector<std::string> holidays = {"christmas", "easter", "halloween", "thanksgiving", "valentines",
                                             "new year", "summer", "spring", "winter", "fall",
                                             "fourth of july", "st patricks"};
  const std::vector<std::map<std::string, double>> holiday_by_month = {
      {{"new year", 0.7}, {"winter", 0.2}},
      {{"valentines", 0.85}, {"winter", 0.1}},
      {{"st patricks", 0.65}, {"easter", 0.2}, {"spring", 0.1}},
      {{"easter", 0.8}, {"spring", 0.15}},
      {{"spring", 0.75}, {"summer", 0.15}},
      {{"summer", 0.9}},
      {{"fourth of july", 0.7}, {"summer", 0.25}},
      {{"summer", 0.85}, {"fall", 0.1}},
      {{"fall", 0.7}, {"halloween", 0.2}},
      {{"halloween", 0.9}, {"fall", 0.05}},
      {{"thanksgiving", 0.85}, {"fall", 0.1}},
      {{"christmas", 0.9}, {"new year", 0.05}},
  };
  ConditionalTable holiday_table{"month", {}};
  for (const auto& p : holiday_by_month) holiday_table.rows.push_back(peaked_row(holidays, p));
  slot("holiday", holidays, holiday_table);

  const std::vector<std::string> day_words = {"monday", "tuesday", "wednesday", "thursday", "friday", "saturday",
                                              "sunday", "today", "tomorrow", "the weekend"};
  ConditionalTable day_table{"weekday", {}};
  for (int w = 0; w < 7; ++w) {
    std::map<std::string, double> p = {{day_words[(w + 1) % 7], 0.55}, {day_words[w], 0.15}, {"today", 0.08},
                                       {"tomorrow", 0.08}};
    if (w == 3 || w == 4) p["the weekend"] = 0.1;
    day_table.rows.push_back(peaked_row(day_words, p));
  }
  slot("weekday", day_words, day_table);

  const std::vector<std::string> dayparts = {"morning", "afternoon", "evening", "night"};
  ConditionalTable daypart_table{"hour", {}};
  for (int h = 0; h < 24; ++h) {
    const std::string part = (h >= 5 && h <= 11) ? "morning" : (h >= 12 && h <= 17) ? "afternoon"
                                                             : (h >= 18 && h <= 21) ? "evening"
                                                                                    : "night";
    daypart_table.rows.push_back(peaked_row(dayparts, {{part, 0.92}}));
  }
  slot("daypart", dayparts, daypart_table);

  const std::vector<std::string> ampm = {"am", "pm"};
  ConditionalTable ampm_table{"hour", {}};
  for (int h = 0; h < 24; ++h) ampm_table.rows.push_back(h >= 12 ? std::vector<double>{0.9, 0.1} : std::vector<double>{0.2, 0.8});
  slot("ampm", ampm, ampm_table);

  // ---- context-free slots ----
  const std::vector<std::string> commands = {
      "stop", "volume up", "volume down", "next song", "pause", "resume", "what time is it", "turn it up",
      "cancel", "play music", "shuffle", "skip", "louder", "quieter", "thank you", "repeat", "go back",
      "mute", "unmute", "help", "never mind", "yes", "no", "play the next episode"};
  slot("command", commands, flat_table(zipf(commands.size(), 1.1)));

  const auto artists = pseudo_words(160, 11);
  slot("artist", artists, flat_table(zipf(artists.size(), 0.9)));

  const std::vector<std::string> songwords = {
      "love", "rain", "fire", "dreams", "river", "stars", "home", "heart", "light", "night", "ocean", "summer",
      "road", "city", "gold", "moon", "sky", "wild", "blue", "storm", "dance", "forever", "angel", "shadow",
      "paradise", "thunder", "memories", "sunshine", "freedom", "highway", "diamonds", "glory", "magic",
      "silence", "yesterday", "tonight", "honey", "winter", "garden", "echo", "horizon", "mirror", "secret",
      "wonder", "whisper", "lullaby", "harmony", "rhythm", "velvet", "crystal", "island", "mountain", "desert",
      "window", "candle", "feather", "letter", "morning", "midnight", "rocket", "sugar", "silver", "valley"};
  slot("songword", songwords, flat_table(zipf(songwords.size(), 0.7)));

  const std::vector<std::string> names = {
      "mom", "dad", "john", "mary", "james", "linda", "robert", "susan", "michael", "karen", "david", "lisa",
      "william", "nancy", "richard", "betty", "joseph", "sandra", "thomas", "ashley", "charles", "emily",
      "daniel", "donna", "matthew", "michelle", "anthony", "carol", "mark", "amanda", "paul", "melissa",
      "steven", "deborah", "andrew", "stephanie", "kevin", "rebecca", "brian", "laura", "george", "sharon",
      "edward", "cynthia", "ronald", "kathleen", "timothy", "amy", "jason", "angela", "grandma", "grandpa"};
  slot("name", names, flat_table(zipf(names.size(), 1.0)));

  const std::vector<std::string> foods = {
      "milk", "eggs", "bread", "butter", "cheese", "apples", "bananas", "chicken", "rice", "pasta", "coffee",
      "tea", "sugar", "flour", "onions", "garlic", "tomatoes", "potatoes", "carrots", "lettuce", "yogurt",
      "cereal", "orange juice", "peanut butter", "chocolate", "cookies", "salmon", "beef", "pork", "beans",
      "spinach", "broccoli", "lemons", "strawberries", "blueberries", "honey", "oatmeal", "pancakes", "soup",
      "pizza", "salad", "sandwiches", "muffins", "pie", "cake", "ham", "turkey", "pumpkin", "cranberries",
      "chili"};
  slot("food", foods, flat_table(zipf(foods.size(), 0.8)));

  const std::vector<std::string> cities = {
      "seattle", "boston", "chicago", "denver", "austin", "dallas", "houston", "miami", "atlanta", "phoenix",
      "portland", "detroit", "orlando", "nashville", "memphis", "baltimore", "cleveland", "pittsburgh",
      "sacramento", "san diego", "san jose", "los angeles", "new york", "las vegas", "salt lake city",
      "kansas city", "st louis", "new orleans", "minneapolis", "milwaukee", "tampa", "charlotte", "raleigh",
      "richmond", "buffalo", "albany", "omaha", "tulsa", "boise", "spokane"};
  slot("city", cities, flat_table(zipf(cities.size(), 0.8)));

  const std::vector<std::string> rooms = {"kitchen", "bedroom", "living room", "bathroom", "office", "garage",
                                          "hallway", "porch", "basement", "dining room"};
  slot("room", rooms, flat_table(zipf(rooms.size(), 0.8)));

  const std::vector<std::string> tasks = {
      "take out the trash", "call mom", "pay the bills", "water the plants", "feed the cat", "walk the dog",
      "buy groceries", "pick up the kids", "go to the gym", "clean the kitchen", "do the laundry",
      "book a flight", "renew my license", "send the report", "call the dentist", "wash the car",
      "change the sheets", "mow the lawn", "check the mail", "charge my phone"};
  slot("task", tasks, flat_table(zipf(tasks.size(), 0.6)));

  slot("minutes", number_words(1, 30), flat_table(zipf(30, 0.5)));
  slot("number", number_words(1, 25), flat_table(std::vector<double>(25, 1.0)));
  slot("clock", number_words(1, 12), flat_table(std::vector<double>(12, 1.0)));

  // ---- templates with hour profiles ----
  auto profile_peak = [](std::initializer_list<std::pair<int, double>> peaks, double base) {
    std::vector<double> p(24, base);
    for (auto [h, v] : peaks) p[static_cast<std::size_t>(h)] = v;
    return p;
  };
  const auto snooze_profile = profile_peak({{4, 0.45}, {5, 1.0}, {6, 1.0}, {7, 0.5}, {8, 0.3}, {9, 0.2}}, 0.1);
  const auto morning = profile_peak({{5, 1.0}, {6, 1.0}, {7, 1.0}, {8, 1.0}, {9, 0.8}, {10, 0.5}}, 0.04);
  const auto evening = profile_peak({{18, 0.8}, {19, 1.0}, {20, 1.0}, {21, 1.0}, {22, 1.0}, {23, 0.8}}, 0.04);
  const auto night = profile_peak({{21, 0.8}, {22, 1.0}, {23, 1.0}, {0, 1.0}, {1, 0.8}, {2, 0.5}}, 0.03);
  const std::vector<double> flat(24, 1.0);

  struct Entry {
    const char* name;
    const char* text;
    double weight;
    std::vector<double> profile;
  };
  const std::vector<Entry> entries = {
      {"snooze", "snooze", 0.06, snooze_profile},
      {"snooze_minutes", "snooze for {minutes} minutes", 0.03, snooze_profile},
      {"stop_alarm", "stop the alarm", 0.03, snooze_profile},
      {"alarm_day", "set an alarm for {clock} {ampm} on {weekday}", 0.025, evening},
      {"holiday_songword", "play {songword} songs for {holiday}", 0.02, flat},
      {"holiday_shopping", "add {food} to my {holiday} shopping list", 0.02, flat},
      {"holiday_playlist", "play {holiday} {songword} playlist for the {daypart}", 0.025, flat},
      {"reminder_daypart", "remind me to {task} on {weekday} {daypart}", 0.02, flat},
      {"greeting", "good {daypart}", 0.02, flat},
      {"set_alarm", "set an alarm for {clock} {ampm}", 0.03, evening},
      {"news", "read me the news", 0.02, morning},
      {"weather_day", "what is the weather on {weekday}", 0.04, morning},
      {"weather_city", "what is the weather in {city} on {weekday}", 0.04, flat},
      {"temperature", "what temperature will it be on {weekday}", 0.02, flat},
      {"reminder", "remind me to {task} on {weekday}", 0.03, evening},
      {"holiday_music", "play {holiday} music", 0.035, flat},
      {"holiday_songs", "play me best {holiday} songs", 0.025, flat},
      {"recipes", "lookup {food} recipes for {holiday}", 0.03, flat},
      {"holiday_artist", "play {holiday} songs by {artist}", 0.02, flat},
      {"lights_off", "turn off the {room} lights", 0.03, night},
      {"lights_on", "turn on the {room} lights", 0.03, evening},
      {"command", "{command}", 0.16, flat},
      {"play_artist", "play {artist}", 0.07, flat},
      {"play_song", "play {songword} by {artist}", 0.05, flat},
      {"call", "call {name}", 0.04, flat},
      {"shopping", "add {food} to my shopping list", 0.04, flat},
      {"arithmetic", "what is {number} times {number}", 0.025, flat},
      {"spell", "how do you spell {songword}", 0.015, flat},
      {"joke", "tell me a joke about {songword}", 0.015, flat},
      {"timer", "set a timer for {minutes} minutes", 0.03, flat},
      {"movies", "what movies are playing in {city}", 0.015, flat},
  };
  for (const auto& e : entries) c.templates.push_back({e.name, e.text});
  c.template_table.field = "hour";
  for (int h = 0; h < 24; ++h) {
    std::vector<double> row;
    for (const auto& e : entries) row.push_back(e.weight * e.profile[static_cast<std::size_t>(h)]);
    c.template_table.rows.push_back(normalized(row));
  }
  return c;
}

}  // namespace ctxlm
