#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxlm/model.hpp"

namespace ctxlm {

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 32;
  std::size_t max_steps = 5000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global-norm clip threshold; 0 disables clipping.
  double grad_clip_norm = 5.0;
  std::uint64_t seed = 0;
  std::size_t eval_every = 250;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by adam_step when a gradient holds NaN or Inf.
class NonFiniteGradientError : public std::runtime_error {
 public:
  NonFiniteGradientError(const std::string& parameter)
      : std::runtime_error("non-finite gradient in parameter " + parameter), parameter_(parameter) {}
  const std::string& parameter() const { return parameter_; }

 private:
  std::string parameter_;
};

/// He scaling (variance 2/fan_in) for matrices feeding gate nonlinearities,
/// Xavier (2/(fan_in+fan_out)) for the output projection, N(0, 1/dim) for
/// embedding tables, zero biases except the forget-gate block at 1, and zero
/// right basis tensors so a fresh factor model starts at the default model.
/// Every parameter draws from its own stream keyed by its name.
void init_params(ContextualLM& model, std::uint64_t seed);

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;
};

/// One bias-corrected Adam update from Parameter::grad, after optional
/// global-norm clipping. Returns the pre-clip global gradient norm.
double adam_step(std::span<Parameter* const> params, AdamState& state, const TrainConfig& config);

/// Scales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before scaling.
double clip_gradients(std::span<Parameter* const> params, double max_norm);

struct CurvePoint {
  std::size_t step = 0;
  double train_loss = 0.0;  // mean per-token NLL since the previous point
  double dev_ppl = 0.0;
};

struct TrainResult {
  std::vector<CurvePoint> curve;
  std::size_t best_step = 0;
  double best_dev_ppl = 0.0;
  std::size_t steps = 0;
};

using ProgressCallback = std::function<void(const CurvePoint&)>;

/// Runs config.max_steps Adam updates over per-epoch shuffled batches and
/// evaluates dev perplexity every eval_every steps and at the end. The model
/// is left holding the parameters of the best dev evaluation.
TrainResult train(ContextualLM& model, std::span<const Sequence> train_set, std::span<const Sequence> dev_set,
                  const TrainConfig& config, const ProgressCallback& progress = {});

void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ContextualLM model;
  Vocab vocab;
  nlohmann::json metadata;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout: 8-byte magic, u32 version, u64 header length, JSON header
/// (model config, vocabularies, metadata), u64 tensor count, then per tensor
/// u32 name length, name, u32 rank, u64 dims, little-endian doubles.
void save_checkpoint(const std::string& path, const ContextualLM& model, const Vocab& vocab,
                     const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ctxlm
