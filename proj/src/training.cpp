#include "ctxlm/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

#include "ctxlm/evaluation.hpp"
#include "ctxlm/util.hpp"

namespace ctxlm {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be finite and non-negative");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (max_steps == 0) throw ConfigError("max_steps must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
    throw ConfigError("adam betas must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(grad_clip_norm >= 0.0)) throw ConfigError("grad_clip_norm must be non-negative (0 disables)");
  if (eval_every == 0) throw ConfigError("eval_every must be positive");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"batch_size", batch_size}, {"max_steps", max_steps},
          {"beta1", beta1},                 {"beta2", beta2},           {"epsilon", epsilon},
          {"grad_clip_norm", grad_clip_norm}, {"seed", seed},           {"eval_every", eval_every}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.grad_clip_norm = j.value("grad_clip_norm", c.grad_clip_norm);
  c.seed = j.value("seed", c.seed);
  c.eval_every = j.value("eval_every", c.eval_every);
  return c;
}

// --- initialization ---

namespace {

void fill_normal(Tensor& t, double stddev, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& x : t.values()) x = dist(rng);
}

bool starts_with(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

void init_params(ContextualLM& model, std::uint64_t seed) {
  const std::size_t d = model.config().hidden_dim;
  for (auto& p : model.parameters()) {
    const std::uint64_t s = derive_seed(seed, p.name);
    const Shape& shape = p.value.shape();
    if (p.name == "lstm.b") {
      p.value.fill(0.0);
      for (std::size_t j = d; j < 2 * d; ++j) p.value[j] = 1.0;
    } else if (starts_with(p.name, "factor.W_R")) {
      p.value.fill(0.0);
    } else if (starts_with(p.name, "factor.W_L")) {
      fill_normal(p.value, std::sqrt(2.0 / static_cast<double>(shape[0])), s);
    } else if (p.name == "embedding.words" || starts_with(p.name, "context.")) {
      fill_normal(p.value, std::sqrt(1.0 / static_cast<double>(shape[1])), s);
    } else if (p.name == "output.W_v") {
      fill_normal(p.value, std::sqrt(2.0 / static_cast<double>(shape[0] + shape[1])), s);
    } else {
      // lstm.W_x, lstm.W_h, concat.W_m, attention.W_a
      fill_normal(p.value, std::sqrt(2.0 / static_cast<double>(shape[0])), s);
    }
    p.zero_grad();
  }
}

// --- optimizer ---

double clip_gradients(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.values()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (Parameter* p : params)
      for (double& g : p->grad.values()) g *= factor;
  }
  return norm;
}

double adam_step(std::span<Parameter* const> params, AdamState& state, const TrainConfig& config) {
  for (const Parameter* p : params)
    if (!p->grad.all_finite()) throw NonFiniteGradientError(p->name);
  if (state.m.empty()) {
    for (const Parameter* p : params) {
      state.m.push_back(Tensor::zeros_like(p->value));
      state.v.push_back(Tensor::zeros_like(p->value));
    }
  }
  if (state.m.size() != params.size()) throw DimensionError("adam_step: optimizer state does not match parameters");
  const double norm = clip_gradients(params, config.grad_clip_norm);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (state.m[k].shape() != p.value.shape())
      throw DimensionError("adam_step: state shape mismatch for " + p.name);
    double* m = state.m[k].data();
    double* v = state.v[k].data();
    double* w = p.value.data();
    const double* g = p.grad.data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
    }
  }
  return norm;
}

// --- training loop ---

TrainResult train(ContextualLM& model, std::span<const Sequence> train_set, std::span<const Sequence> dev_set,
                  const TrainConfig& config, const ProgressCallback& progress) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (dev_set.empty()) throw std::invalid_argument("train: empty dev set");

  const std::uint64_t batch_seed = derive_seed(config.seed, "batching");
  auto params = model.parameter_pointers();
  AdamState adam;
  TrainResult result;
  std::vector<Tensor> best;
  double loss_sum = 0.0;
  std::size_t loss_steps = 0;

  std::vector<std::size_t> order;
  std::size_t cursor = 0, epoch = 0;
  std::vector<Sequence> batch_seqs;
  batch_seqs.reserve(config.batch_size);

  auto evaluate_dev = [&](std::size_t step) {
    CurvePoint point;
    point.step = step;
    point.train_loss = loss_steps ? loss_sum / static_cast<double>(loss_steps) : 0.0;
    point.dev_ppl = corpus_perplexity(model, dev_set);
    loss_sum = 0.0;
    loss_steps = 0;
    result.curve.push_back(point);
    if (best.empty() || point.dev_ppl < result.best_dev_ppl) {
      result.best_dev_ppl = point.dev_ppl;
      result.best_step = step;
      best.clear();
      for (const auto& p : model.parameters()) best.push_back(p.value);
    }
    if (progress) progress(point);
  };

  for (std::size_t step = 1; step <= config.max_steps; ++step) {
    batch_seqs.clear();
    while (batch_seqs.size() < config.batch_size && batch_seqs.size() < train_set.size()) {
      if (cursor == order.size()) {
        order = random_permutation(train_set.size(), batch_seed + epoch);
        ++epoch;
        cursor = 0;
      }
      batch_seqs.push_back(train_set[order[cursor++]]);
    }
    const Batch batch = model.make_batch(batch_seqs);
    const double tokens = batch.token_count();

    model.zero_grad();
    double loss_value = 0.0;
    {
      Tape tape;
      const auto out = model.forward(tape, batch);
      const Var loss = tape.scale(ContextualLM::loss(tape, out.logits, batch), 1.0 / tokens);
      loss_value = tape.value(loss).item();
      if (!std::isfinite(loss_value))
        throw DivergenceError("training diverged at step " + std::to_string(step) + ": loss is " +
                              std::to_string(loss_value));
      tape.backward(loss);
    }
    adam_step(params, adam, config);
    loss_sum += loss_value;
    ++loss_steps;
    result.steps = step;

    if (step % config.eval_every == 0 || step == config.max_steps) evaluate_dev(step);
  }

  auto& ps = model.parameters();
  for (std::size_t k = 0; k < ps.size(); ++k) ps[k].value = best[k];
  model.zero_grad();
  return result;
}

void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "step,train_loss,dev_ppl\n";
  for (const auto& p : curve) out << p.step << ',' << p.train_loss << ',' << p.dev_ppl << '\n';
}

// --- checkpoints ---

namespace {

constexpr char kMagic[8] = {'C', 'T', 'X', 'L', 'M', 'C', 'K', 'P'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) { le(v); }
  void u64(std::uint64_t v) { le(v); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

 private:
  template <typename T>
  void le(T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, sizeof(T));
  }
  std::ostream& out_;
};

class Reader {
 public:
  Reader(const std::string& data, std::string path) : data_(data), path_(std::move(path)) {}
  void bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() { return le<std::uint32_t>(); }
  std::uint64_t u64() { return le<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }
  void need(std::size_t n) const {
    if (n > remaining()) throw CheckpointError(path_ + ": checkpoint is truncated or corrupt");
  }

 private:
  template <typename T>
  T le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  const std::string& data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const ContextualLM& model, const Vocab& vocab,
                     const nlohmann::json& metadata) {
  nlohmann::json header;
  header["model"] = model.config().to_json();
  header["geo_tokens"] = model.context_vocab().geo_tokens();
  header["vocab"] = vocab.tokens();
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < vocab.size(); ++i) counts.push_back(vocab.count(i));
  header["vocab_counts"] = counts;
  header["metadata"] = metadata;
  const std::string text = header.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp);
    Writer w(out);
    w.bytes(kMagic, sizeof(kMagic));
    w.u32(kCheckpointVersion);
    w.u64(text.size());
    w.bytes(text.data(), text.size());
    w.u64(model.parameters().size());
    for (const auto& p : model.parameters()) {
      w.str(p.name);
      w.u32(static_cast<std::uint32_t>(p.value.shape().size()));
      for (std::size_t dim : p.value.shape()) w.u64(dim);
      for (double x : p.value.values()) w.f64(x);
    }
    if (!out) throw CheckpointError("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw CheckpointError("cannot move checkpoint into " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(data, path);
  char magic[sizeof(kMagic)];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw CheckpointError(path + ": not a checkpoint file");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError(path + ": checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  const std::uint64_t header_len = r.u64();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.str(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path + ": corrupt header: " + e.what());
  }

  ContextVocab cvocab;
  for (const auto& g : header.at("geo_tokens")) cvocab.add_geo(g.get<std::string>());
  Vocab vocab(header.at("vocab").get<std::vector<std::string>>());
  vocab.set_counts(header.at("vocab_counts").get<std::vector<std::size_t>>());
  Checkpoint ck{ContextualLM(ModelConfig::from_json(header.at("model")), cvocab), std::move(vocab),
                header.value("metadata", nlohmann::json::object())};

  const std::uint64_t count = r.u64();
  if (count != ck.model.parameters().size())
    throw CheckpointError(path + ": expected " + std::to_string(ck.model.parameters().size()) + " tensors, found " +
                          std::to_string(count));
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::string name = r.str(r.u32());
    if (!ck.model.has_parameter(name)) throw CheckpointError(path + ": unexpected tensor " + name);
    Parameter& p = ck.model.parameter(name);
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    for (auto& dim : shape) dim = r.u64();
    if (shape != p.value.shape())
      throw CheckpointError(path + ": tensor " + name + " has shape " + shape_string(shape) + ", expected " +
                            shape_string(p.value.shape()));
    r.need(p.value.size() * sizeof(double));
    for (double& x : p.value.values()) x = r.f64();
    p.zero_grad();
  }
  if (r.remaining() != 0) throw CheckpointError(path + ": trailing bytes after tensors");
  return ck;
}

}  // namespace ctxlm
