#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ctxlm/evaluation.hpp"
#include "ctxlm/generator.hpp"
#include "ctxlm/pipeline.hpp"
#include "support.hpp"

using namespace ctxlm;

namespace {

// BOS, EOS, UNK, then three words.
const std::vector<double> kProbs = {0.05, 0.25, 0.1, 0.3, 0.2, 0.1};

std::vector<Sequence> hand_corpus() {
  const ContextRecord r = parse_context("2020-12-23 07:00");
  return {{{3, 4}, r}, {{5}, r}, {{3, 3, 2}, r}};
}

double hand_oracle() {
  double lp = 0.0, n = 0.0;
  for (const auto& s : hand_corpus()) {
    for (std::size_t w : s.words) lp += std::log(kProbs[w]);
    lp += std::log(kProbs[1]);
    n += static_cast<double>(s.words.size() + 1);
  }
  return std::exp(-lp / n);
}

ContextualLM uniform_model(std::size_t v) {
  ModelConfig c;
  c.vocab_size = v;
  c.embed_dim = c.hidden_dim = 4;
  ContextualLM m(c);
  test::randomize(m, v);
  m.parameter("output.W_v").value.fill(0.0);
  return m;
}

PartitionLabels labels_for(std::size_t n, std::size_t every_head) {
  PartitionLabels l;
  for (std::size_t i = 0; i < n; ++i) {
    l.head.push_back(i % every_head == 0);
    l.tail.push_back(i % every_head == 1);
  }
  return l;
}

EvalReport report_with(double full, std::optional<double> tail, const std::string& hash = "h") {
  EvalReport r;
  r.model = "m";
  r.corpus_hash = hash;
  r.partitions[Partition::Full] = {10, 50.0, -50.0 * std::log(full), full};
  r.partitions[Partition::Head] = {5, 20.0, -20.0 * std::log(full), full};
  if (tail) r.partitions[Partition::Tail] = {5, 30.0, -30.0 * std::log(*tail), *tail};
  return r;
}

}  // namespace

TEST_CASE("perplexity examples") {
  CHECK(perplexity(100 * -std::log(100.0L), 100) == 100.0);
  CHECK(perplexity(0.0, 7) == 1.0);
  CHECK(perplexity(-std::log(4.0L) * 3, 3) == 4.0);
  CHECK_THROWS_AS(perplexity(-1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(perplexity(-1.0, -2), std::invalid_argument);
}

TEST_CASE("hand corpus perplexity matches the arithmetic oracle") {
  const ContextualLM m = test::constant_model(kProbs);
  const auto dist = next_token_distribution(m, {{3, 4, 5}, parse_context("2020-01-01 10:00")});
  for (std::size_t j = 0; j < kProbs.size(); ++j) CHECK(std::abs(dist[j] - kProbs[j]) <= 1e-12);

  const auto seqs = hand_corpus();
  const double ppl = corpus_perplexity(m, seqs);
  CHECK(std::abs(ppl - hand_oracle()) <= 1e-9);
  // 9 scored tokens
  CHECK(hand_oracle() == doctest::Approx(std::exp(-(3 * std::log(0.3) + std::log(0.2) + 2 * std::log(0.1) +
                                                    3 * std::log(0.25)) /
                                                  9))
                             .epsilon(1e-14));
}

TEST_CASE("uniform model perplexity is the vocabulary size") {
  std::mt19937_64 rng(31);
  for (std::size_t v : {4u, 20u, 37u, 100u, 257u, 1000u, 1201u}) {
    const ContextualLM m = uniform_model(v);
    const auto seqs = test::random_sequences(60, v, 0, 12, rng);
    INFO("V = " << v);
    CHECK(corpus_perplexity(m, seqs) == static_cast<double>(v));
    const auto report = evaluate(m, seqs, labels_for(seqs.size(), 3), "x");
    for (Partition p : {Partition::Full, Partition::Head, Partition::Tail})
      CHECK(*report.ppl(p) == static_cast<double>(v));
  }
}

TEST_CASE("corpus perplexity invariances") {
  std::mt19937_64 rng(32);
  ContextualLM m(test::tiny_config(Architecture::Concat, AttentionQuery::Word), test::test_context_vocab());
  test::randomize(m, 33);
  auto seqs = test::random_sequences(70, 20, 0, 9, rng);

  const auto by1 = sequence_log_probs(m, seqs, 1);
  const auto by7 = sequence_log_probs(m, seqs, 7);
  const auto by64 = sequence_log_probs(m, seqs, 64);
  CHECK(by1 == by7);
  CHECK(by1 == by64);
  CHECK(corpus_perplexity(m, seqs, 1) == corpus_perplexity(m, seqs, 64));

  const double base = corpus_perplexity(m, seqs);
  auto shuffled = seqs;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(std::abs(corpus_perplexity(m, shuffled) / base - 1.0) <= 1e-12);

  // one utterance at a time
  double lp = 0.0, n = 0.0;
  for (const auto& s : seqs) {
    lp += static_cast<double>(score_utterance(m, s).total);
    n += static_cast<double>(s.words.size() + 1);
  }
  CHECK(std::abs(std::exp(-lp / n) / base - 1.0) <= 1e-9);
  CHECK_THROWS(sequence_log_probs(m, seqs, 0));
}

TEST_CASE("evaluate fills partitions and serializes") {
  std::mt19937_64 rng(34);
  ContextualLM m(test::tiny_config(Architecture::Factor), test::test_context_vocab());
  test::randomize(m, 35);
  const auto seqs = test::random_sequences(12, 20, 1, 6, rng);
  const auto report = evaluate(m, seqs, labels_for(12, 4), "abc");
  CHECK(report.partitions.at(Partition::Full).utterances == 12);
  CHECK(report.partitions.at(Partition::Head).utterances == 3);
  CHECK(report.partitions.at(Partition::Tail).utterances == 3);
  CHECK(report.ppl(Partition::Full) == corpus_perplexity(m, seqs));
  CHECK(report.model == "factor");

  const auto j = report.to_json();
  const auto back = EvalReport::from_json(j);
  CHECK(back.to_json() == j);
  CHECK(back.ppl(Partition::Head) == report.ppl(Partition::Head));

  PartitionLabels no_tail = labels_for(12, 4);
  no_tail.tail.assign(12, false);
  const auto r2 = evaluate(m, seqs, no_tail, "abc");
  CHECK(!r2.ppl(Partition::Tail));
  CHECK(r2.to_json().at("partitions").at("tail").is_null());
  CHECK(!EvalReport::from_json(r2.to_json()).ppl(Partition::Tail));

  CHECK_THROWS_AS(evaluate(m, seqs, labels_for(11, 4), "abc"), DimensionError);
}

TEST_CASE("relative reduction examples") {
  CHECK(relative_reduction(100.0, 93.0) == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(relative_reduction(100.0, 101.6) == doctest::Approx(-1.6).epsilon(1e-12));
  CHECK(relative_reduction(42.0, 42.0) == 0.0);
  CHECK_THROWS(relative_reduction(0.0, 1.0));

  const auto a = report_with(50.0, 80.0);
  const auto same = relative_reduction(a, a);
  for (const auto& [p, v] : same) CHECK(*v == 0.0);

  const auto better = report_with(45.0, std::nullopt);
  const auto red = relative_reduction(better, a);
  CHECK(*red.at(Partition::Full) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(!red.at(Partition::Tail));
  CHECK_THROWS_AS(relative_reduction(a, report_with(50.0, 80.0, "other")), CorpusMismatchError);
}

TEST_CASE("confidence interval examples") {
  const std::vector<double> two = {9.0, 11.0};
  const auto ci = confidence_interval(two);
  CHECK(ci.mean == 10.0);
  CHECK(ci.half_width == doctest::Approx(12.7062).epsilon(1e-5));
  CHECK(ci.n_runs == 2);
  CHECK(ci.lower() == doctest::Approx(10.0 - 12.7062).epsilon(1e-5));

  const std::vector<double> flat = {3.0, 3.0, 3.0};
  CHECK(confidence_interval(flat).half_width == 0.0);

  const std::vector<double> five = {7.1, 6.8, 7.3, 6.9, 7.0};
  CHECK(confidence_interval(five, 0.99).half_width > confidence_interval(five, 0.95).half_width);
  // t(0.975, 4) = 2.776445 against a hand computed sample sd
  double m = 0, ss = 0;
  for (double x : five) m += x / 5;
  for (double x : five) ss += (x - m) * (x - m);
  CHECK(confidence_interval(five).half_width == doctest::Approx(2.776445 * std::sqrt(ss / 4 / 5)).epsilon(1e-6));

  const std::vector<double> one = {1.0};
  CHECK_THROWS(confidence_interval(one));
  CHECK_THROWS(confidence_interval(two, 1.0));
  CHECK_THROWS(confidence_interval(two, 0.0));
}

TEST_CASE("probability sweep") {
  CHECK(field_values(ContextField::Hour).size() == 24);
  CHECK(field_values(ContextField::Month).front() == 1);
  CHECK(field_values(ContextField::Week).size() == 53);
  CHECK(field_values(ContextField::Weekday).size() == 7);
  CHECK_THROWS(field_values(ContextField::Geo));

  const ContextRecord base = parse_context("2020-12-23 07:00");
  CHECK(with_field(base, ContextField::Hour, 5).hour == 5);
  CHECK(with_field(base, ContextField::Hour, 5).month == 12);
  CHECK_THROWS(with_field(base, ContextField::Hour, 24));
  CHECK_THROWS(with_field(base, ContextField::Month, 0));

  const auto hours = field_values(ContextField::Hour);
  ContextualLM plain(test::tiny_config(Architecture::Default));
  test::randomize(plain, 36);
  const auto flat = probability_sweep(plain, {}, 5, base, ContextField::Hour, hours);
  REQUIRE(flat.size() == 24);
  for (double p : flat) CHECK(p == flat[0]);

  ContextualLM m(test::tiny_config(Architecture::Concat, AttentionQuery::Hidden), test::test_context_vocab());
  test::randomize(m, 37);
  const auto curve = probability_sweep(m, {4, 6}, 5, base, ContextField::Hour, hours);
  CHECK(*std::max_element(curve.begin(), curve.end()) > *std::min_element(curve.begin(), curve.end()));
  for (std::size_t h = 0; h < 24; ++h) {
    CHECK(curve[h] >= 0.0);
    CHECK(curve[h] <= 1.0);
    const auto dist = next_token_distribution(m, {{4, 6}, with_field(base, ContextField::Hour, hours[h])});
    CHECK(std::abs(dist[5] - curve[h]) <= 1e-12);
  }
  CHECK_THROWS_AS(probability_sweep(m, {}, 20, base, ContextField::Hour, hours), std::out_of_range);

  const std::string csv = sweep_csv(ContextField::Hour, hours, curve, &flat);
  CHECK(csv.rfind("hour,probability,baseline\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 25);
}

TEST_CASE("attention traces") {
  const Vocab vocab({"play", "me", "best", "christmas", "songs"});
  auto cfg = test::tiny_config(Architecture::Concat, AttentionQuery::Word);
  cfg.vocab_size = vocab.size();
  ContextualLM m(cfg, test::test_context_vocab());
  test::randomize(m, 38);
  const std::vector<std::string> words = {"play", "me", "best", "christmas", "songs"};
  const auto trace = attention_trace(m, vocab, words, parse_context("2020-12-23 07:00"));
  CHECK(trace.members.size() == 4);
  CHECK(trace.tokens.size() == 6);
  CHECK(trace.tokens[0] == vocab.token(Vocab::kBos));
  REQUIRE(trace.weights.size() == 6);
  for (const auto& row : trace.weights) {
    double s = 0;
    for (double w : row) {
      CHECK(w >= 0.0);
      s += w;
    }
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
  const std::string csv = trace_csv(trace);
  CHECK(csv.rfind("step,token,member,weight\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 6 * 4);

  auto geo_cfg = test::tiny_config(Architecture::Factor, AttentionQuery::Hidden, ContextRepr::Learned, ContextType::Geo);
  geo_cfg.vocab_size = vocab.size();
  ContextualLM single(geo_cfg, test::test_context_vocab());
  test::randomize(single, 39);
  ContextRecord rec = parse_context("2020-12-23 07:00");
  rec.geo_hash = "dr";
  for (const auto& row : attention_trace(single, vocab, words, rec).weights) CHECK(row == std::vector<double>{1.0});

  ContextualLM none(test::tiny_config(Architecture::Concat), test::test_context_vocab());
  CHECK_THROWS_AS(attention_trace(none, vocab, words, rec), std::invalid_argument);
}

TEST_CASE("format_table") {
  const auto base = report_with(50.0, 80.0);
  auto other = report_with(45.0, std::nullopt);
  other.model = "concat";
  const std::string t = format_table({base, other}, true);
  for (const char* col : {"model", "full ppl", "head ppl", "tail ppl", "full red%"}) CHECK(t.find(col) != std::string::npos);
  CHECK(t.find("concat") != std::string::npos);
  CHECK(t.find("absent") != std::string::npos);
  CHECK(t.find("10.00") != std::string::npos);
  CHECK(format_table({base}).find("red%") == std::string::npos);
}

TEST_CASE("pipeline seeds and ablation guard") {
  ExperimentConfig cfg;
  cfg.seed = 7;
  CHECK(cfg.run_seed() == 7);
  cfg.run = 2;
  const auto s2 = cfg.run_seed();
  CHECK(s2 != 7);
  cfg.run = 3;
  CHECK(cfg.run_seed() != s2);
  CHECK(ExperimentConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());

  auto g = default_generator_config();
  g.utterances = 600;
  const Corpus corpus = generate_synthetic(g, 5);
  const auto a = prepare_data(corpus, cfg);
  cfg.run = 0;
  const auto b = prepare_data(corpus, cfg);
  CHECK(a.splits.test == b.splits.test);
  CHECK(a.vocab == b.vocab);
  CHECK(a.corpus_hash == corpus_hash(corpus));

  cfg.shuffle_contexts = true;
  const auto s = prepare_data(corpus, cfg);
  CHECK(s.test_labels.head == b.test_labels.head);
  for (std::size_t i = 0; i < s.test.size(); ++i) CHECK(s.test[i].words == b.test[i].words);

  cfg.model.architecture = Architecture::Default;
  CHECK_THROWS_AS(shuffled_ablation(corpus, cfg), ConfigError);
}
