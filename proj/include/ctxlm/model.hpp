#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxlm/autodiff.hpp"
#include "ctxlm/context.hpp"
#include "ctxlm/corpus.hpp"

namespace ctxlm {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Architecture { Default, Prepend, Concat, Factor };
enum class AttentionQuery { None, Word, Hidden };
enum class ContextRepr { Learned, Feature };
enum class ContextType { Datetime, Geo, Prompt };

std::string to_string(Architecture a);
std::string to_string(AttentionQuery q);
std::string to_string(ContextRepr r);
std::string to_string(ContextType t);
Architecture parse_architecture(const std::string& s);
AttentionQuery parse_attention(const std::string& s);
ContextRepr parse_repr(const std::string& s);
ContextType parse_context_type(const std::string& s);

struct ModelConfig {
  std::size_t vocab_size = 0;  // word vocabulary incl. BOS/EOS/UNK
  std::size_t embed_dim = 64;
  std::size_t hidden_dim = 64;
  std::size_t context_dim = 32;  // f; 8 for the feature representation
  std::size_t factor_rank = 5;
  Architecture architecture = Architecture::Default;
  AttentionQuery attention = AttentionQuery::None;
  ContextRepr context_repr = ContextRepr::Learned;
  ContextType context_type = ContextType::Datetime;
  /// Add an all-zero member to the feature set when attention is on.
  bool zero_gate = true;

  void validate() const;

  bool adapts() const { return architecture == Architecture::Concat || architecture == Architecture::Factor; }
  ContextSetKind set_kind() const;
  /// |M| seen by attention (or concatenated without attention).
  std::size_t member_count() const;
  std::size_t member_dim() const;
  /// Width of the vector fed to W_m or the basis tensors: m' under attention,
  /// otherwise the concatenated m.
  std::size_t context_input_dim() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// One utterance ready for the model: word ids without BOS/EOS.
struct Sequence {
  std::vector<std::size_t> words;
  ContextRecord context;
};

/// Time-major padded batch. Row b of step t lives at index t * rows + b.
struct Batch {
  std::size_t rows = 0;
  std::size_t steps = 0;
  std::vector<std::size_t> inputs;
  std::vector<std::size_t> targets;
  std::vector<double> weights;  // 0 on padding and on prepended context targets
  std::vector<ContextRecord> contexts;

  double token_count() const;
};

struct LstmState {
  Var h;
  Var c;
};

struct LstmVars {
  Var w_x;  // e x 4d
  Var w_h;  // d x 4d
  Var b;    // 4d
  Var w_m;  // c_in x 4d, concat only
};

/// Gate nonlinearities and state update from pre-activations (B x 4d).
LstmState lstm_cell(Tape& tape, Var pre, const LstmState& prev);
/// pre = x W_x + h W_h + b, plus context_input W_m when context_input is valid.
LstmState lstm_step(Tape& tape, const LstmVars& p, Var x, const LstmState& prev, Var context_input = {});

/// Attention output for one step: m'_t (B x member_dim) and alpha (B x |M|).
struct Attended {
  Var context;
  Var alpha;
};

/// score(m_i, q) = m_i^T W_a q, alpha = softmax over members,
/// m' = sum_i alpha_i m_i. W_a is member_dim x query_dim.
Attended attend(Tape& tape, Var w_a, std::span<const Var> members, Var query);

/// Context-adapted weights W + (L^T m)^T (R^T m) for one context vector.
/// left is {f, n, r}, right is {r, 4d, f}, base is n x 4d.
Tensor factor_adapt(const Tensor& base, const Tensor& left, const Tensor& right, std::span<const double> m);

struct ForwardOptions {
  bool record_attention = false;
  /// Word-query attention for all steps is computed in one pass before the
  /// recurrence instead of step by step; both give identical values.
  bool word_attention_prepass = true;
};

struct ForwardResult {
  Var logits;                     // (steps * rows) x output_size, time-major
  std::vector<Tensor> attention;  // per step, rows x |M|, when recorded
};

/// LSTM language model with optional context adaptation.
///
/// Gate order inside the 4d blocks is input, forget, cell, output. Context
/// enters as W_m m added to all four gate pre-activations (concat) or as a
/// low-rank delta on W_x and W_h (factor). Prepend feeds context tokens from
/// an extended vocabulary instead.
class ContextualLM {
 public:
  ContextualLM(ModelConfig config, ContextVocab context_vocab = {});

  const ModelConfig& config() const { return config_; }
  const ContextVocab& context_vocab() const { return context_vocab_; }
  std::size_t output_size() const;

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  Parameter& parameter(const std::string& name);
  const Parameter& parameter(const std::string& name) const;
  bool has_parameter(const std::string& name) const;
  std::vector<Parameter*> parameter_pointers();
  void zero_grad();

  /// Context token ids prepended for the prepend architecture (extended ids).
  std::vector<std::size_t> prefix_tokens(const ContextRecord& rec) const;
  Batch make_batch(std::span<const Sequence> sequences) const;

  /// Builds the graph with trainable parameter leaves.
  ForwardResult forward(Tape& tape, const Batch& batch, const ForwardOptions& options = {});
  /// Same graph over read-only parameters.
  ForwardResult infer(Tape& tape, const Batch& batch, const ForwardOptions& options = {}) const;

  /// Context members per batch row as seen by attention (before gating).
  std::vector<Var> context_members(Tape& tape, const Batch& batch, std::span<const Var> bound) const;

  /// Summed weighted NLL over the batch.
  static Var loss(Tape& tape, Var logits, const Batch& batch);

  /// Labels of the members of M for attention traces.
  std::vector<std::string> member_labels() const;

 private:
  struct Slots {
    std::size_t words, w_x, w_h, bias, w_v;
    std::optional<std::size_t> w_m, left_x, right_x, left_h, right_h, w_a;
    std::optional<std::size_t> month, week, weekday, hour, geo, prompt;
  };

  std::size_t add(const std::string& name, Shape shape);
  std::vector<Var> bind_trainable(Tape& tape);
  std::vector<Var> bind_frozen(Tape& tape) const;
  ForwardResult build(Tape& tape, const Batch& batch, const ForwardOptions& options, std::span<const Var> bound) const;

  ModelConfig config_;
  ContextVocab context_vocab_;
  std::vector<Parameter> params_;
  Slots slots_{};
};

/// Per-position log-probabilities for weighted targets, row by row. The total
/// is accumulated in extended precision from unrounded terms.
struct SequenceScore {
  long double total = 0.0L;
  std::vector<double> token_log_probs;
};

std::vector<SequenceScore> score_batch(const ContextualLM& model, const Batch& batch);
SequenceScore score_utterance(const ContextualLM& model, const Sequence& sequence);
/// Next-token distribution after BOS and the given prefix words.
std::vector<double> next_token_distribution(const ContextualLM& model, const Sequence& prefix);

/// Attention weights per step for one utterance (steps x |M|).
std::vector<std::vector<double>> attention_weights(const ContextualLM& model, const Sequence& sequence);

}  // namespace ctxlm
