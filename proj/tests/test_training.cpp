#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "ctxlm/evaluation.hpp"
#include "ctxlm/generator.hpp"
#include "ctxlm/pipeline.hpp"
#include "ctxlm/training.hpp"
#include "support.hpp"

using namespace ctxlm;
namespace fs = std::filesystem;

namespace {

double sample_variance(const Tensor& t) {
  double mean = 0.0;
  for (double v : t.values()) mean += v;
  mean /= static_cast<double>(t.size());
  double s = 0.0;
  for (double v : t.values()) s += (v - mean) * (v - mean);
  return s / static_cast<double>(t.size() - 1);
}

std::vector<Tensor> snapshot(const ContextualLM& m) {
  std::vector<Tensor> out;
  for (const auto& p : m.parameters()) out.push_back(p.value);
  return out;
}

double batch_loss(ContextualLM& m, const Batch& batch, bool backward) {
  Tape tape;
  const Var loss = ContextualLM::loss(tape, m.forward(tape, batch).logits, batch);
  if (backward) tape.backward(loss);
  return tape.value(loss).item();
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("ctxlm_test_" + name); }

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("train config validation and json") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(TrainConfig::from_json(c.to_json()) == c);
  c.beta1 = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.learning_rate = -1e-3;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.learning_rate = 0.0;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("initialization scales") {
  ModelConfig cfg = test::tiny_config(Architecture::Factor);
  cfg.embed_dim = 512;
  cfg.hidden_dim = 128;
  cfg.vocab_size = 300;
  ContextualLM m(cfg, test::test_context_vocab());
  init_params(m, 17);
  const double wx = sample_variance(m.parameter("lstm.W_x").value);  // 512 x 512
  CHECK(m.parameter("lstm.W_x").value.shape() == Shape{512, 512});
  CHECK(std::abs(wx / (2.0 / 512) - 1.0) < 0.2);
  const double wv = sample_variance(m.parameter("output.W_v").value);
  CHECK(std::abs(wv / (2.0 / (128 + 300)) - 1.0) < 0.2);
  const double emb = sample_variance(m.parameter("embedding.words").value);
  CHECK(std::abs(emb / (1.0 / 512) - 1.0) < 0.2);

  const Tensor& b = m.parameter("lstm.b").value;
  for (std::size_t j = 0; j < b.size(); ++j) CHECK(b[j] == (j >= 128 && j < 256 ? 1.0 : 0.0));
  for (const char* n : {"factor.W_R_x", "factor.W_R_h"})
    for (double v : m.parameter(n).value.values()) CHECK(v == 0.0);

  ContextualLM again(cfg, test::test_context_vocab());
  init_params(again, 17);
  CHECK(snapshot(again) == snapshot(m));
  init_params(again, 18);
  CHECK(snapshot(again) != snapshot(m));
}

TEST_CASE("adam examples") {
  TrainConfig cfg;
  cfg.grad_clip_norm = 0.0;
  Parameter theta("theta", Tensor::vector({0.0}));
  Parameter* ps[] = {&theta};
  theta.grad[0] = 1.0;
  AdamState state;
  adam_step(ps, state, cfg);
  CHECK(theta.value[0] == doctest::Approx(-0.001).epsilon(1e-6));
  CHECK(state.step == 1);

  Parameter w("w", Tensor::vector({0.3, -2.0, 5.0}));
  Parameter* ws[] = {&w};
  AdamState s2;
  const Tensor before = w.value;
  adam_step(ws, s2, cfg);
  CHECK(w.value == before);

  w.grad[1] = std::nan("");
  try {
    adam_step(ws, s2, cfg);
    FAIL("expected a non-finite gradient error");
  } catch (const NonFiniteGradientError& e) {
    CHECK(e.parameter() == "w");
  }
}

TEST_CASE("gradient clipping") {
  Parameter a("a", Tensor::vector({3.0, 0.0})), b("b", Tensor::vector({4.0}));
  a.grad = Tensor::vector({3.0, 0.0});
  b.grad = Tensor::vector({4.0});
  Parameter* ps[] = {&a, &b};
  CHECK(clip_gradients(ps, 10.0) == 5.0);
  CHECK(a.grad[0] == 3.0);
  CHECK(clip_gradients(ps, 1.0) == 5.0);
  CHECK(a.grad[0] == doctest::Approx(0.6));
  CHECK(b.grad[0] == doctest::Approx(0.8));
  CHECK(clip_gradients(ps, 0.0) == doctest::Approx(1.0));
  CHECK(b.grad[0] == doctest::Approx(0.8));
}

TEST_CASE("masked padding adds no gradient") {
  const ContextVocab cv = test::test_context_vocab();
  std::mt19937_64 rng(41);
  auto seqs = test::random_sequences(3, 20, 1, 7, rng);
  seqs[0].words.resize(7);
  seqs[1].words.resize(2);
  seqs[2].words.clear();
  for (auto arch : {Architecture::Concat, Architecture::Factor, Architecture::Prepend}) {
    ContextualLM m(test::tiny_config(arch, arch == Architecture::Prepend ? AttentionQuery::None : AttentionQuery::Hidden), cv);
    test::randomize(m, 12);
    m.zero_grad();
    const double joint = batch_loss(m, m.make_batch(seqs), true);
    std::vector<Tensor> joint_grads;
    for (const auto& p : m.parameters()) joint_grads.push_back(p.grad);

    m.zero_grad();
    double separate = 0.0;
    for (const auto& s : seqs) separate += batch_loss(m, m.make_batch(std::span<const Sequence>(&s, 1)), true);
    CHECK(joint == doctest::Approx(separate).epsilon(1e-12));
    for (std::size_t k = 0; k < joint_grads.size(); ++k)
      for (std::size_t i = 0; i < joint_grads[k].size(); ++i)
        CHECK(std::abs(joint_grads[k][i] - m.parameters()[k].grad[i]) <= 1e-12 * (1.0 + std::abs(joint_grads[k][i])));
  }
}

TEST_CASE("one small Adam step descends") {
  const ContextVocab cv = test::test_context_vocab();
  std::mt19937_64 rng(42);
  const auto seqs = test::random_sequences(8, 20, 2, 6, rng);
  ContextualLM m(test::tiny_config(Architecture::Factor, AttentionQuery::Word), cv);
  init_params(m, 3);
  const Batch batch = m.make_batch(seqs);
  TrainConfig cfg;
  cfg.learning_rate = 1e-4;
  cfg.grad_clip_norm = 0.0;
  m.zero_grad();
  const double before = batch_loss(m, batch, true);
  AdamState state;
  auto ptrs = m.parameter_pointers();
  adam_step(ptrs, state, cfg);
  m.zero_grad();
  CHECK(batch_loss(m, batch, false) < before);
}

TEST_CASE("training determinism and lr = 0") {
  const ContextVocab cv = test::test_context_vocab();
  std::mt19937_64 rng(43);
  const auto train_set = test::random_sequences(60, 20, 1, 6, rng);
  const auto dev_set = test::random_sequences(10, 20, 1, 6, rng);
  TrainConfig cfg;
  cfg.max_steps = 30;
  cfg.batch_size = 8;
  cfg.eval_every = 10;
  cfg.seed = 5;

  auto run = [&](const TrainConfig& c) {
    ContextualLM m(test::tiny_config(Architecture::Concat, AttentionQuery::Word), cv);
    init_params(m, 9);
    auto result = train(m, train_set, dev_set, c);
    return std::pair{snapshot(m), result};
  };
  const auto [p1, r1] = run(cfg);
  const auto [p2, r2] = run(cfg);
  CHECK(p1 == p2);
  REQUIRE(r1.curve.size() == 3);
  for (std::size_t i = 0; i < r1.curve.size(); ++i) {
    CHECK(r1.curve[i].train_loss == r2.curve[i].train_loss);
    CHECK(r1.curve[i].dev_ppl == r2.curve[i].dev_ppl);
  }
  CHECK(r1.steps == 30);

  TrainConfig frozen = cfg;
  frozen.learning_rate = 0.0;
  ContextualLM m(test::tiny_config(Architecture::Concat, AttentionQuery::Word), cv);
  init_params(m, 9);
  const auto start = snapshot(m);
  train(m, train_set, dev_set, frozen);
  CHECK(snapshot(m) == start);
}

TEST_CASE("divergence is reported") {
  const ContextVocab cv = test::test_context_vocab();
  std::mt19937_64 rng(44);
  const auto seqs = test::random_sequences(10, 20, 1, 4, rng);
  ContextualLM m(test::tiny_config(Architecture::Default), cv);
  init_params(m, 1);
  m.parameter("output.W_v").value[0] = std::numeric_limits<double>::infinity();
  TrainConfig cfg;
  cfg.max_steps = 2;
  CHECK_THROWS_AS(train(m, seqs, seqs, cfg), DivergenceError);
}

TEST_CASE("dev perplexity falls over the first evaluations") {
  auto g = default_generator_config();
  g.utterances = 6000;
  const Corpus corpus = generate_synthetic(g, 5);
  ExperimentConfig ex;
  ex.seed = 5;
  ex.train.max_steps = 150;
  ex.train.eval_every = 50;
  const PreparedData data = prepare_data(corpus, ex);
  ModelConfig mc = ex.model;
  mc.vocab_size = data.vocab.size();
  ContextualLM m(mc, data.context_vocab);
  init_params(m, 1);
  const auto result = train(m, data.train, data.dev, ex.train);
  REQUIRE(result.curve.size() == 3);
  CHECK(result.curve[1].dev_ppl < result.curve[0].dev_ppl);
  CHECK(result.curve[2].dev_ppl < result.curve[1].dev_ppl);
  CHECK(result.best_step == 150);

  const auto csv = temp_file("curve.csv");
  write_curve_csv(csv.string(), result.curve);
  const std::string text = read_bytes(csv);
  CHECK(text.rfind("step,train_loss,dev_ppl\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  fs::remove(csv);
}

TEST_CASE("checkpoint round trip") {
  ContextVocab cv = test::test_context_vocab();
  const Vocab vocab(std::vector<std::string>{"alpha", "beta", "gamma"});
  std::mt19937_64 rng(45);
  const auto seqs = test::random_sequences(4, 6, 0, 5, rng);
  auto cfg = test::tiny_config(Architecture::Factor, AttentionQuery::Hidden);
  cfg.vocab_size = vocab.size();
  ContextualLM m(cfg, cv);
  test::randomize(m, 13);
  const nlohmann::json meta = {{"seed", 3}, {"note", "x"}};
  const auto path = temp_file("ckpt.bin");
  save_checkpoint(path.string(), m, vocab, meta);

  const Checkpoint ck = load_checkpoint(path.string());
  CHECK(ck.model.config() == m.config());
  CHECK(ck.model.context_vocab() == m.context_vocab());
  CHECK(ck.vocab == vocab);
  CHECK(ck.metadata == meta);
  CHECK(snapshot(ck.model) == snapshot(m));
  for (const auto& s : seqs) {
    const auto a = score_utterance(m, s), b = score_utterance(ck.model, s);
    CHECK(a.total == b.total);
    CHECK(a.token_log_probs == b.token_log_probs);
  }

  // saving the loaded checkpoint reproduces the file
  const auto again = temp_file("ckpt2.bin");
  save_checkpoint(again.string(), ck.model, ck.vocab, ck.metadata);
  CHECK(read_bytes(again) == read_bytes(path));
  fs::remove(again);
}

TEST_CASE("corrupt checkpoints fail cleanly") {
  auto cfg = test::tiny_config(Architecture::Concat);
  ContextualLM m(cfg, test::test_context_vocab());
  test::randomize(m, 14);
  const auto path = temp_file("ckpt_bad.bin");
  std::vector<std::string> words;
  for (int i = 0; i < 17; ++i) words.push_back("w" + std::to_string(i));
  save_checkpoint(path.string(), m, Vocab(words), {});
  const std::string bytes = read_bytes(path);
  const auto cut = temp_file("ckpt_cut.bin");
  for (std::size_t len = 0; len < bytes.size(); len += 1 + len / 8) {
    write_bytes(cut, bytes.substr(0, len));
    INFO("length " << len);
    CHECK_THROWS_AS(load_checkpoint(cut.string()), CheckpointError);
  }
  write_bytes(cut, bytes + "x");
  CHECK_THROWS_AS(load_checkpoint(cut.string()), CheckpointError);
  std::string version = bytes;
  version[8] = 2;
  write_bytes(cut, version);
  CHECK_THROWS_AS(load_checkpoint(cut.string()), CheckpointError);
  std::string magic = bytes;
  magic[0] = 'X';
  write_bytes(cut, magic);
  CHECK_THROWS_AS(load_checkpoint(cut.string()), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(temp_file("does_not_exist").string()), CheckpointError);
  fs::remove(cut);
  fs::remove(path);
}
