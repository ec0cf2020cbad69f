#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ctxlm/context.hpp"
#include "ctxlm/corpus.hpp"
#include "ctxlm/model.hpp"
#include "ctxlm/tensor.hpp"

namespace ctxlm::test {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& x : t.values()) x = u(rng);
  return t;
}

inline void randomize(ContextualLM& model, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  for (auto& p : model.parameters()) p.value = random_tensor(p.value.shape(), rng, scale);
}

inline ContextRecord random_record(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> day(0, 730), hour(0, 23), minute(0, 59);
  int y = 2019, m = 1, d = 1 + day(rng);
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  for (;;) {
    const int len = kDays[m - 1] + (m == 2 && y % 4 == 0 ? 1 : 0);
    if (d <= len) break;
    d -= len;
    if (++m == 13) {
      m = 1;
      ++y;
    }
  }
  ContextRecord rec = make_context(y, m, d, hour(rng), minute(rng));
  static const char* kGeo[] = {"9q", "dr", "c2"};
  rec.geo_hash = kGeo[rng() % 3];
  rec.prompt = rng() % 2 ? DialoguePrompt::Initial : DialoguePrompt::FollowUp;
  return rec;
}

inline std::vector<Sequence> random_sequences(std::size_t n, std::size_t vocab, std::size_t min_len,
                                              std::size_t max_len, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len), word(3, vocab - 1);
  std::vector<Sequence> out;
  for (std::size_t i = 0; i < n; ++i) {
    Sequence s;
    s.words.resize(len(rng));
    for (auto& w : s.words) w = word(rng);
    s.context = random_record(rng);
    out.push_back(std::move(s));
  }
  return out;
}

inline ContextVocab test_context_vocab() {
  ContextVocab v;
  for (const char* g : {"9q", "dr", "c2"}) v.add_geo(g);
  return v;
}

inline ModelConfig tiny_config(Architecture arch, AttentionQuery att = AttentionQuery::None,
                               ContextRepr repr = ContextRepr::Learned, ContextType type = ContextType::Datetime) {
  ModelConfig c;
  c.vocab_size = 20;
  c.embed_dim = 8;
  c.hidden_dim = 8;
  c.context_dim = 8;
  c.factor_rank = 2;
  c.architecture = arch;
  c.attention = att;
  c.context_repr = repr;
  c.context_type = type;
  return c;
}

// Default LSTM with d = e = 1 whose next-word distribution is probs at every
// step: the forget gate is shut and the input and output gates are open, so h
// is the same constant at each step and W_v = ln(p) / h.
inline ContextualLM constant_model(const std::vector<double>& probs) {
  ModelConfig c;
  c.vocab_size = probs.size();
  c.embed_dim = c.hidden_dim = 1;
  ContextualLM m(c);
  Tensor& b = m.parameter("lstm.b").value;
  b[0] = 100.0;
  b[1] = -1000.0;
  b[2] = 1.0;
  b[3] = 100.0;
  const double h = std::tanh(std::tanh(1.0));
  Tensor& wv = m.parameter("output.W_v").value;
  for (std::size_t j = 0; j < probs.size(); ++j) wv[j] = std::log(probs[j]) / h;
  return m;
}

inline Utterance utterance(const std::string& timestamp, const std::string& text) {
  Utterance u;
  u.context = parse_context(timestamp);
  std::string w;
  for (char ch : text + " ") {
    if (ch == ' ') {
      if (!w.empty()) u.tokens.push_back(w);
      w.clear();
    } else {
      w += ch;
    }
  }
  return u;
}

}  // namespace ctxlm::test
