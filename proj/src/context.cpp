#include "ctxlm/context.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <random>

namespace ctxlm {

namespace {

constexpr std::array<const char*, 7> kWeekdayNames = {"monday", "tuesday", "wednesday", "thursday",
                                                      "friday", "saturday", "sunday"};

// Days since 1970-01-01 in the proleptic Gregorian calendar.
long days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const long yoe = y - era * 400;
  const long doy = (153L * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const long doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

int year_from_days(long z) {
  z += 719468;
  const long era = (z >= 0 ? z : z - 146096) / 146097;
  const long doe = z - era * 146097;
  const long yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const long doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const long mp = (5 * doy + 2) / 153;
  const int m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
  return static_cast<int>(yoe + era * 400) + (m <= 2);
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int parse_fixed(std::string_view text, std::size_t pos, std::size_t len) {
  int value = 0;
  const char* first = text.data() + pos;
  for (std::size_t i = 0; i < len; ++i) {
    if (first[i] < '0' || first[i] > '9') throw ContextParseError("malformed timestamp '" + std::string(text) + "'");
  }
  std::from_chars(first, first + len, value);
  return value;
}

std::pair<double, double> unit_angle(int index, int period) {
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(index) / static_cast<double>(period);
  return {std::sin(angle), std::cos(angle)};
}

}  // namespace

bool is_valid_date(int year, int month, int day) {
  if (month < 1 || month > 12 || day < 1) return false;
  static constexpr std::array<int, 12> kDays = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const int limit = (month == 2 && is_leap(year)) ? 29 : kDays[month - 1];
  return day <= limit;
}

std::pair<int, int> iso_week_and_weekday(int year, int month, int day) {
  const long days = days_from_civil(year, month, day);
  const int weekday = static_cast<int>(((days + 3) % 7 + 7) % 7);  // 1970-01-01 was a Thursday
  const long thursday = days + (3 - weekday);
  const int iso_year = year_from_days(thursday);
  const long week = (thursday - days_from_civil(iso_year, 1, 1)) / 7 + 1;
  return {static_cast<int>(week), weekday};
}

ContextRecord make_context(int year, int month, int day, int hour, int minute) {
  if (!is_valid_date(year, month, day)) {
    throw ContextParseError("invalid calendar date " + std::to_string(year) + "-" + std::to_string(month) + "-" +
                            std::to_string(day));
  }
  if (hour < 0 || hour > 23 || minute < 0 || minute > 59) {
    throw ContextParseError("invalid time " + std::to_string(hour) + ":" + std::to_string(minute));
  }
  ContextRecord rec;
  rec.year = year;
  rec.month = month;
  rec.day = day;
  rec.hour = hour;
  rec.minute = minute;
  std::tie(rec.iso_week, rec.weekday) = iso_week_and_weekday(year, month, day);
  return rec;
}

ContextRecord parse_context(std::string_view ts, const ContextExtras& extras) {
  if (ts.size() != 16 || ts[4] != '-' || ts[7] != '-' || ts[10] != ' ' || ts[13] != ':') {
    throw ContextParseError("malformed timestamp '" + std::string(ts) + "', expected YYYY-MM-DD HH:MM");
  }
  ContextRecord rec = make_context(parse_fixed(ts, 0, 4), parse_fixed(ts, 5, 2), parse_fixed(ts, 8, 2),
                                   parse_fixed(ts, 11, 2), parse_fixed(ts, 14, 2));
  rec.geo_hash = extras.geo_hash;
  rec.prompt = extras.prompt;
  return rec;
}

std::string ContextRecord::timestamp() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d %02d:%02d", year, month, day, hour, minute);
  return buf;
}

std::string prompt_name(DialoguePrompt p) { return p == DialoguePrompt::Initial ? "initial" : "follow_up"; }

DialoguePrompt parse_prompt(std::string_view name) {
  if (name == "initial") return DialoguePrompt::Initial;
  if (name == "follow_up") return DialoguePrompt::FollowUp;
  throw ContextParseError("unknown dialogue prompt '" + std::string(name) + "'");
}

std::string field_name(ContextField f) {
  switch (f) {
    case ContextField::Month: return "month";
    case ContextField::Week: return "week";
    case ContextField::Weekday: return "weekday";
    case ContextField::Hour: return "hour";
    case ContextField::Geo: return "geo";
    case ContextField::Prompt: return "prompt";
  }
  return "?";
}

ContextField parse_field(std::string_view name) {
  for (auto f : {ContextField::Month, ContextField::Week, ContextField::Weekday, ContextField::Hour,
                 ContextField::Geo, ContextField::Prompt}) {
    if (field_name(f) == name) return f;
  }
  throw std::invalid_argument("unknown context field '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

ContextVocab::ContextVocab() : geo_{"<unk>"} { geo_index_["<unk>"] = 0; }

std::size_t ContextVocab::add_geo(const std::string& geo) {
  auto it = geo_index_.find(geo);
  if (it != geo_index_.end()) return it->second;
  geo_.push_back(geo);
  geo_index_[geo] = geo_.size() - 1;
  return geo_.size() - 1;
}

std::size_t ContextVocab::field_size(ContextField f) const {
  switch (f) {
    case ContextField::Month: return 12;
    case ContextField::Week: return 53;
    case ContextField::Weekday: return 7;
    case ContextField::Hour: return 24;
    case ContextField::Geo: return geo_.size();
    case ContextField::Prompt: return 3;
  }
  return 0;
}

std::size_t ContextVocab::field_offset(ContextField f) const {
  std::size_t offset = 0;
  for (auto g : {ContextField::Month, ContextField::Week, ContextField::Weekday, ContextField::Hour,
                 ContextField::Geo, ContextField::Prompt}) {
    if (g == f) return offset;
    offset += field_size(g);
  }
  return offset;
}

std::size_t ContextVocab::flat_size() const { return field_offset(ContextField::Prompt) + field_size(ContextField::Prompt); }

std::size_t ContextVocab::local_id(ContextField f, const ContextRecord& rec) const {
  switch (f) {
    case ContextField::Month: return static_cast<std::size_t>(rec.month - 1);
    case ContextField::Week: return static_cast<std::size_t>(rec.iso_week - 1);
    case ContextField::Weekday: return static_cast<std::size_t>(rec.weekday);
    case ContextField::Hour: return static_cast<std::size_t>(rec.hour);
    case ContextField::Geo: {
      if (!rec.geo_hash) return kUnknownGeo;
      auto it = geo_index_.find(*rec.geo_hash);
      return it == geo_index_.end() ? kUnknownGeo : it->second;
    }
    case ContextField::Prompt:
      if (!rec.prompt) return kUnknownPrompt;
      return *rec.prompt == DialoguePrompt::Initial ? 1 : 2;
  }
  return 0;
}

std::string ContextVocab::token(ContextField f, std::size_t local) const {
  if (local >= field_size(f)) throw std::out_of_range("context token id out of range for field " + field_name(f));
  switch (f) {
    case ContextField::Month: return "month-" + std::to_string(local + 1);
    case ContextField::Week: return "week-" + std::to_string(local + 1);
    case ContextField::Weekday: return kWeekdayNames[local];
    case ContextField::Hour: {
      const std::size_t h12 = local % 12 == 0 ? 12 : local % 12;
      return std::to_string(h12) + (local < 12 ? "am" : "pm");
    }
    case ContextField::Geo: return "geo-" + geo_[local];
    case ContextField::Prompt: return local == 0 ? "prompt-<none>" : local == 1 ? "prompt-initial" : "prompt-follow_up";
  }
  return {};
}

std::string ContextVocab::flat_token(std::size_t flat) const {
  for (auto f : {ContextField::Month, ContextField::Week, ContextField::Weekday, ContextField::Hour,
                 ContextField::Geo, ContextField::Prompt}) {
    const std::size_t off = field_offset(f);
    if (flat < off + field_size(f)) return token(f, flat - off);
  }
  throw std::out_of_range("flat context id " + std::to_string(flat) + " out of range");
}

std::optional<std::size_t> ContextVocab::find_flat(const std::string& tok) const {
  for (std::size_t i = 0; i < flat_size(); ++i) {
    if (flat_token(i) == tok) return i;
  }
  return std::nullopt;
}

std::array<std::size_t, 4> datetime_local_ids(const ContextRecord& rec) {
  return {static_cast<std::size_t>(rec.month - 1), static_cast<std::size_t>(rec.iso_week - 1),
          static_cast<std::size_t>(rec.weekday), static_cast<std::size_t>(rec.hour)};
}

std::array<std::size_t, 4> datetime_tokens(const ContextRecord& rec, const ContextVocab& vocab) {
  const auto local = datetime_local_ids(rec);
  std::array<std::size_t, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) out[i] = vocab.flat_id(kDatetimeFields[i], local[i]);
  return out;
}

std::array<double, 8> datetime_features(const ContextRecord& rec) {
  const auto [hs, hc] = unit_angle(rec.hour, 24);
  const auto [ds, dc] = unit_angle(rec.weekday, 7);
  const auto [ws, wc] = unit_angle(rec.iso_week - 1, 53);
  const auto [ms, mc] = unit_angle(rec.month - 1, 12);
  return {hs, hc, ds, dc, ws, wc, ms, mc};
}

std::vector<double> ContextSet::concatenated() const {
  std::vector<double> out;
  const std::size_t n = kind == ContextSetKind::FeatureVectorGated ? 1 : members.size();
  for (std::size_t i = 0; i < n; ++i) out.insert(out.end(), members[i].begin(), members[i].end());
  return out;
}

ContextSet embed_context(ContextSetKind kind, const ContextRecord& rec, const ContextTables& tables,
                         const ContextVocab* vocab) {
  ContextSet set;
  set.kind = kind;
  auto row_of = [](const Tensor* table, std::size_t id, const char* what) {
    if (!table) throw std::invalid_argument(std::string("embed_context: missing ") + what + " table");
    if (id >= table->rows()) throw std::out_of_range(std::string("embed_context: id out of range for ") + what);
    auto r = table->row(id);
    return std::vector<double>(r.begin(), r.end());
  };
  switch (kind) {
    case ContextSetKind::LearnedTokens: {
      const auto ids = datetime_local_ids(rec);
      set.members.push_back(row_of(tables.month, ids[0], "month"));
      set.members.push_back(row_of(tables.week, ids[1], "week"));
      set.members.push_back(row_of(tables.weekday, ids[2], "weekday"));
      set.members.push_back(row_of(tables.hour, ids[3], "hour"));
      break;
    }
    case ContextSetKind::FeatureVector:
    case ContextSetKind::FeatureVectorGated: {
      const auto f = datetime_features(rec);
      set.members.emplace_back(f.begin(), f.end());
      if (kind == ContextSetKind::FeatureVectorGated) set.members.emplace_back(8, 0.0);
      break;
    }
    case ContextSetKind::Geo: {
      const ContextVocab fallback;
      const ContextVocab& v = vocab ? *vocab : fallback;
      set.members.push_back(row_of(tables.geo, v.local_id(ContextField::Geo, rec), "geo"));
      break;
    }
    case ContextSetKind::Prompt: {
      const ContextVocab fallback;
      const ContextVocab& v = vocab ? *vocab : fallback;
      set.members.push_back(row_of(tables.prompt, v.local_id(ContextField::Prompt, rec), "prompt"));
      break;
    }
  }
  return set;
}

std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(perm[i - 1], perm[pick(rng)]);
  }
  return perm;
}

}  // namespace ctxlm
