#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "ctxlm/corpus.hpp"
#include "ctxlm/generator.hpp"
#include "support.hpp"

using namespace ctxlm;

namespace {

Corpus parse(const std::string& text, LoadStats* stats = nullptr) {
  std::istringstream in(text);
  return read_corpus(in, stats);
}

Corpus texts(const std::vector<std::string>& lines) {
  Corpus c;
  for (const auto& l : lines) c.push_back(test::utterance("2020-01-01 10:00", l));
  return c;
}

std::multiset<std::string> record_multiset(const Corpus& c) {
  std::multiset<std::string> out;
  for (const auto& u : c) out.insert(u.context.timestamp() + "|" + u.context.geo_hash.value_or("-"));
  return out;
}

}  // namespace

TEST_CASE("load_corpus examples") {
  const Corpus c = parse("2020-12-23 07:00\tplay christmas music\n");
  REQUIRE(c.size() == 1);
  CHECK(c[0].tokens == std::vector<std::string>{"play", "christmas", "music"});
  CHECK(c[0].context.month == 12);
  CHECK(parse("").empty());

  try {
    parse("2020-12-23 07:00\tok\n2020-12-23 07:00 no tab here\n");
    FAIL("expected a parse error");
  } catch (const CorpusParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse("2020-02-30 07:00\tbad date\n"), CorpusParseError);
  CHECK_THROWS_AS(parse("2020-02-03 07:00\tx\tcolour=red\n"), CorpusParseError);
  CHECK_THROWS_AS(parse("2020-02-03 07:00\tx\tprompt=maybe\n"), CorpusParseError);
}

TEST_CASE("optional fields and skipped lines") {
  LoadStats stats;
  const Corpus c = parse(
      "2020-12-23 07:00\tplay music\tgeo=9q\tprompt=follow_up\n"
      "2020-12-23 08:00\t   \n"
      "\n"
      "2020-12-23 09:00\tstop\tprompt=initial\n",
      &stats);
  REQUIRE(c.size() == 2);
  CHECK(c[0].context.geo_hash == "9q");
  CHECK(c[0].context.prompt == DialoguePrompt::FollowUp);
  CHECK(c[1].context.prompt == DialoguePrompt::Initial);
  CHECK(!c[1].context.geo_hash);
  CHECK(stats.skipped_empty == 1);
}

TEST_CASE("corpus round trips through disk") {
  const Corpus c = generate_synthetic([] {
    auto g = default_generator_config();
    g.utterances = 500;
    return g;
  }(), 3);
  const auto path = std::filesystem::temp_directory_path() / "ctxlm_roundtrip.tsv";
  save_corpus(path.string(), c);
  CHECK(load_corpus(path.string()) == c);
  std::filesystem::remove(path);
  CHECK(corpus_hash(c) == corpus_hash(Corpus(c)));
  Corpus changed = c;
  changed[0].tokens[0] += "x";
  CHECK(corpus_hash(changed) != corpus_hash(c));
}

TEST_CASE("build_vocab examples") {
  const Corpus train = texts({"a a b"});
  const Vocab v2 = build_vocab(train, 2);
  CHECK(v2.size() == 4);
  CHECK(v2.find("a").has_value());
  CHECK(!v2.find("b").has_value());
  CHECK(v2.id("b") == Vocab::kUnk);
  CHECK(v2.token(Vocab::kBos) != v2.token(Vocab::kEos));

  const Vocab v1 = build_vocab(texts({"x y", "y z"}), 1);
  CHECK(v1.size() == 6);
  CHECK(v1.token(3) == "y");
  CHECK(v1.count(v1.id("y")) == 2);
  CHECK(v1.id("never") == Vocab::kUnk);
  CHECK(v1.encode({"z", "q"}) == std::vector<std::size_t>{v1.id("z"), Vocab::kUnk});
}

TEST_CASE("split examples") {
  Corpus c;
  for (int i = 0; i < 1000; ++i) c.push_back(test::utterance("2020-01-01 10:00", "u" + std::to_string(i)));
  SplitSpec spec;
  spec.seed = 4;
  const Splits s = split_corpus(c, spec);
  CHECK(s.train.size() == 900);
  CHECK(s.dev.size() == 50);
  CHECK(s.test.size() == 50);

  std::multiset<std::string> all;
  for (const Corpus* part : {&s.train, &s.dev, &s.test})
    for (const auto& u : *part) all.insert(u.text());
  CHECK(all.size() == 1000);
  CHECK(std::set<std::string>(all.begin(), all.end()).size() == 1000);

  const Splits again = split_corpus(c, spec);
  CHECK(again.test == s.test);
  spec.seed = 5;
  CHECK(split_corpus(c, spec).test != s.test);

  CHECK_THROWS(split_corpus(texts({"a", "b"}), SplitSpec{}));
  SplitSpec bad;
  bad.train = 80;
  CHECK_THROWS(split_corpus(c, bad));
}

TEST_CASE("head and tail examples") {
  std::vector<std::string> lines(100, "common text");
  for (int i = 0; i < 19; ++i)
    for (int k = 0; k <= i % 3; ++k) lines.push_back("rare " + std::to_string(i));
  const Corpus full = texts(lines);
  const auto freq = text_frequencies(full);
  REQUIRE(freq.size() == 20);
  const Corpus eval = texts({"common text", "rare 0", "rare 1", "unseen"});
  const PartitionLabels labels = partition_head_tail(eval, freq);
  CHECK(labels.head == std::vector<bool>{true, false, false, false});
  CHECK(labels.tail == std::vector<bool>{false, true, false, false});
}

TEST_CASE("all-unique corpora put ceil(5%) of texts in the head") {
  for (std::size_t n = 1; n <= 2000; n += 7) {
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < n; ++i) lines.push_back("t" + std::to_string(i));
    const Corpus c = texts(lines);
    const auto labels = partition_head_tail(c, text_frequencies(c));
    INFO("n = " << n);
    CHECK(labels.head_count() == (n * 5 + 99) / 100);
    CHECK(labels.tail_count() == n);
  }
}

TEST_CASE("head and tail are disjoint on the default synthetic corpus") {
  auto g = default_generator_config();
  g.utterances = 20000;
  const Corpus c = generate_synthetic(g, 8);
  const auto labels = partition_head_tail(c, text_frequencies(c));
  CHECK(labels.head_count() > 0);
  CHECK(labels.tail_count() > 0);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(!(labels.head[i] && labels.tail[i]));
}

TEST_CASE("shuffle_contexts examples") {
  const Corpus one = texts({"only one"});
  CHECK(shuffle_contexts(one, 1) == one);

  std::mt19937_64 rng(15);
  Corpus c;
  for (int i = 0; i < 300; ++i) {
    Utterance u;
    u.tokens = {"w" + std::to_string(i)};
    u.context = test::random_record(rng);
    c.push_back(u);
  }
  const Corpus s = shuffle_contexts(c, 77);
  CHECK(record_multiset(s) == record_multiset(c));
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(s[i].tokens == c[i].tokens);
  CHECK(shuffle_contexts(c, 77) == s);
  std::size_t moved = 0;
  for (std::size_t i = 0; i < c.size(); ++i) moved += s[i].context != c[i].context;
  CHECK(moved > 250);
}

TEST_CASE("generator is deterministic and validates tables") {
  auto g = default_generator_config();
  g.utterances = 2000;
  std::ostringstream a, b, other;
  write_corpus(a, generate_synthetic(g, 42));
  write_corpus(b, generate_synthetic(g, 42));
  write_corpus(other, generate_synthetic(g, 43));
  CHECK(a.str() == b.str());
  CHECK(a.str() != other.str());

  CHECK_NOTHROW(g.validate());
  auto bad = g;
  bad.template_table.rows[0][0] += 1e-6;
  CHECK_THROWS_AS(bad.validate(), GeneratorConfigError);
  CHECK_THROWS_AS(generate_synthetic(bad, 1), GeneratorConfigError);

  const auto round = GeneratorConfig::from_json(g.to_json());
  std::ostringstream c;
  write_corpus(c, generate_synthetic(round, 42));
  CHECK(c.str() == a.str());
}

TEST_CASE("planted snooze ratio matches the generator tables") {
  const auto g = default_generator_config();
  const auto configured = first_word_probability(g, "snooze");
  REQUIRE(configured.size() == 24);
  const double expected = configured[5] / configured[15];
  CHECK(expected > 3.0);

  // Same conditional tables, hour marginal moved onto the two compared hours;
  // with the default marginal hour 15 sees only ~50 snoozes per 100k.
  auto sampled = g;
  sampled.hour_probs.assign(24, 0.0);
  sampled.hour_probs[5] = sampled.hour_probs[15] = 0.5;
  const Corpus c = generate_synthetic(sampled, 2021);
  REQUIRE(c.size() == 100000);
  double n5 = 0, s5 = 0, n15 = 0, s15 = 0;
  for (const auto& u : c) {
    const bool snooze = u.tokens[0] == "snooze";
    if (u.context.hour == 5) {
      ++n5;
      s5 += snooze;
    } else if (u.context.hour == 15) {
      ++n15;
      s15 += snooze;
    }
  }
  const double empirical = (s5 / n5) / (s15 / n15);
  INFO("empirical " << empirical << " configured " << expected << " counts " << s5 << "/" << n5 << " "
                    << s15 << "/" << n15);
  CHECK(std::abs(empirical / expected - 1.0) <= 0.10);
}

TEST_CASE("without planted effects words and hours are independent") {
  auto g = default_generator_config().without_planted_effects();
  const Corpus c = generate_synthetic(g, 99);

  std::map<std::string, std::array<double, 24>> table;
  std::array<double, 24> hour_total{};
  double n = 0;
  for (const auto& u : c)
    for (const auto& w : u.tokens) {
      table[w][u.context.hour] += 1;
      hour_total[u.context.hour] += 1;
      n += 1;
    }
  // Keep words whose smallest expected cell is at least 5; the rest are pooled.
  std::vector<std::array<double, 24>> rows;
  std::array<double, 24> pooled{};
  const double min_hour = *std::min_element(hour_total.begin(), hour_total.end());
  for (const auto& [w, row] : table) {
    double total = 0;
    for (double x : row) total += x;
    if (total * min_hour / n >= 5.0) rows.push_back(row);
    else
      for (int h = 0; h < 24; ++h) pooled[h] += row[h];
  }
  rows.push_back(pooled);
  REQUIRE(rows.size() > 20);

  double chi2 = 0;
  for (const auto& row : rows) {
    double total = 0;
    for (double x : row) total += x;
    for (int h = 0; h < 24; ++h) {
      const double e = total * hour_total[h] / n;
      chi2 += (row[h] - e) * (row[h] - e) / e;
    }
  }
  const double dof = static_cast<double>((rows.size() - 1) * 23);
  const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), chi2));
  INFO("chi2 " << chi2 << " dof " << dof);
  CHECK(p > 0.01);
}

TEST_CASE("with planted effects words and hours are dependent") {
  auto g = default_generator_config();
  g.utterances = 20000;
  const Corpus c = generate_synthetic(g, 99);
  double snooze_morning = 0, morning = 0, snooze_afternoon = 0, afternoon = 0;
  for (const auto& u : c) {
    const bool s = u.tokens[0] == "snooze";
    if (u.context.hour >= 4 && u.context.hour <= 7) {
      ++morning;
      snooze_morning += s;
    } else if (u.context.hour >= 13 && u.context.hour <= 17) {
      ++afternoon;
      snooze_afternoon += s;
    }
  }
  CHECK(snooze_morning / morning > 3 * snooze_afternoon / afternoon);
}
