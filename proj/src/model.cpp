#include "ctxlm/model.hpp"
#include "ctxlm/util.hpp"

#include <algorithm>
#include <cmath>

namespace ctxlm {

namespace {

template <typename E>
struct Names {
  E value;
  const char* name;
};

constexpr Names<Architecture> kArchitectures[] = {{Architecture::Default, "default"},
                                                  {Architecture::Prepend, "prepend"},
                                                  {Architecture::Concat, "concat"},
                                                  {Architecture::Factor, "factor"}};
constexpr Names<AttentionQuery> kQueries[] = {
    {AttentionQuery::None, "none"}, {AttentionQuery::Word, "word_query"}, {AttentionQuery::Hidden, "hidden_query"}};
constexpr Names<ContextRepr> kReprs[] = {{ContextRepr::Learned, "learned"}, {ContextRepr::Feature, "feature"}};
constexpr Names<ContextType> kTypes[] = {
    {ContextType::Datetime, "datetime"}, {ContextType::Geo, "geo"}, {ContextType::Prompt, "prompt"}};

template <typename E, std::size_t N>
std::string name_of(const Names<E> (&table)[N], E v) {
  for (const auto& n : table)
    if (n.value == v) return n.name;
  return "?";
}

template <typename E, std::size_t N>
E parse_named(const Names<E> (&table)[N], const std::string& s, const char* what) {
  for (const auto& n : table)
    if (s == n.name) return n.value;
  std::string allowed;
  for (const auto& n : table) allowed += std::string(allowed.empty() ? "" : ", ") + n.name;
  throw ConfigError(std::string("unknown ") + what + " '" + s + "' (expected one of: " + allowed + ")");
}

}  // namespace

std::string to_string(Architecture a) { return name_of(kArchitectures, a); }
std::string to_string(AttentionQuery q) { return name_of(kQueries, q); }
std::string to_string(ContextRepr r) { return name_of(kReprs, r); }
std::string to_string(ContextType t) { return name_of(kTypes, t); }
Architecture parse_architecture(const std::string& s) { return parse_named(kArchitectures, s, "architecture"); }
AttentionQuery parse_attention(const std::string& s) {
  if (s == "word") return AttentionQuery::Word;
  if (s == "hidden") return AttentionQuery::Hidden;
  return parse_named(kQueries, s, "attention");
}
ContextRepr parse_repr(const std::string& s) { return parse_named(kReprs, s, "context representation"); }
ContextType parse_context_type(const std::string& s) { return parse_named(kTypes, s, "context type"); }

// --- ModelConfig ---

void ModelConfig::validate() const {
  if (vocab_size == 0 || embed_dim == 0 || hidden_dim == 0 || context_dim == 0 || factor_rank == 0)
    throw ConfigError("vocab_size, embed_dim, hidden_dim, context_dim and factor_rank must be positive");
  if (attention != AttentionQuery::None && !adapts())
    throw ConfigError("attention requires the concat or factor architecture, got " + to_string(architecture));
  if (context_repr == ContextRepr::Feature) {
    if (context_type != ContextType::Datetime) throw ConfigError("the feature representation only encodes datetime");
    if (context_dim != 8) throw ConfigError("the feature representation has context_dim 8");
    if (architecture == Architecture::Prepend) throw ConfigError("prepend feeds context tokens; use learned repr");
  } else if (context_type == ContextType::Datetime && context_dim % 4 != 0) {
    throw ConfigError("learned datetime context needs context_dim divisible by 4, got " +
                      std::to_string(context_dim));
  }
}

ContextSetKind ModelConfig::set_kind() const {
  switch (context_type) {
    case ContextType::Geo:
      return ContextSetKind::Geo;
    case ContextType::Prompt:
      return ContextSetKind::Prompt;
    case ContextType::Datetime:
      break;
  }
  if (context_repr == ContextRepr::Learned) return ContextSetKind::LearnedTokens;
  return attention != AttentionQuery::None && zero_gate ? ContextSetKind::FeatureVectorGated
                                                        : ContextSetKind::FeatureVector;
}

std::size_t ModelConfig::member_count() const {
  switch (set_kind()) {
    case ContextSetKind::LearnedTokens:
      return 4;
    case ContextSetKind::FeatureVectorGated:
      return 2;
    default:
      return 1;
  }
}

std::size_t ModelConfig::member_dim() const {
  if (set_kind() == ContextSetKind::LearnedTokens) return context_dim / 4;
  return context_dim;
}

std::size_t ModelConfig::context_input_dim() const {
  if (attention != AttentionQuery::None) return member_dim();
  return context_dim;
}

nlohmann::json ModelConfig::to_json() const {
  return {{"vocab_size", vocab_size},
          {"embed_dim", embed_dim},
          {"hidden_dim", hidden_dim},
          {"context_dim", context_dim},
          {"factor_rank", factor_rank},
          {"architecture", to_string(architecture)},
          {"attention", to_string(attention)},
          {"context_repr", to_string(context_repr)},
          {"context_type", to_string(context_type)},
          {"zero_gate", zero_gate}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.context_dim = j.value("context_dim", c.context_dim);
  c.factor_rank = j.value("factor_rank", c.factor_rank);
  if (j.contains("architecture")) c.architecture = parse_architecture(j.at("architecture").get<std::string>());
  if (j.contains("attention")) c.attention = parse_attention(j.at("attention").get<std::string>());
  if (j.contains("context_repr")) c.context_repr = parse_repr(j.at("context_repr").get<std::string>());
  if (j.contains("context_type")) c.context_type = parse_context_type(j.at("context_type").get<std::string>());
  c.zero_gate = j.value("zero_gate", c.zero_gate);
  return c;
}

double Batch::token_count() const {
  double n = 0.0;
  for (double w : weights) n += w;
  return n;
}

// --- building blocks ---

LstmState lstm_cell(Tape& tape, Var pre, const LstmState& prev) {
  const std::size_t d = tape.value(prev.h).cols();
  if (tape.value(pre).cols() != 4 * d)
    throw DimensionError("lstm_cell: pre-activations " + shape_string(tape.value(pre).shape()) +
                         " do not match hidden size " + std::to_string(d));
  Var i = tape.sigmoid(tape.slice_cols(pre, 0, d));
  Var f = tape.sigmoid(tape.slice_cols(pre, d, d));
  Var g = tape.tanh(tape.slice_cols(pre, 2 * d, d));
  Var o = tape.sigmoid(tape.slice_cols(pre, 3 * d, d));
  Var c = tape.add(tape.mul(f, prev.c), tape.mul(i, g));
  Var h = tape.mul(o, tape.tanh(c));
  return {h, c};
}

LstmState lstm_step(Tape& tape, const LstmVars& p, Var x, const LstmState& prev, Var context_input) {
  Var pre = tape.add(tape.matmul(x, p.w_x), tape.matmul(prev.h, p.w_h));
  pre = tape.add_row(pre, p.b);
  if (context_input.valid()) {
    if (!p.w_m.valid()) throw std::invalid_argument("lstm_step: context input given without W_m");
    pre = tape.add(pre, tape.matmul(context_input, p.w_m));
  }
  return lstm_cell(tape, pre, prev);
}

Attended attend(Tape& tape, Var w_a, std::span<const Var> members, Var query) {
  if (members.empty()) throw std::invalid_argument("attend: empty context set");
  Var projected = tape.matmul_nt(query, w_a);  // B x member_dim
  std::vector<Var> scores;
  scores.reserve(members.size());
  for (Var m : members) scores.push_back(tape.row_dot(m, projected));
  Var alpha = tape.softmax_rows(tape.concat_cols(scores));
  Var context = tape.mul_col(members[0], tape.slice_cols(alpha, 0, 1));
  for (std::size_t i = 1; i < members.size(); ++i)
    context = tape.add(context, tape.mul_col(members[i], tape.slice_cols(alpha, i, 1)));
  return {context, alpha};
}

Tensor factor_adapt(const Tensor& base, const Tensor& left, const Tensor& right, std::span<const double> m) {
  if (left.shape().size() != 3 || right.shape().size() != 3)
    throw DimensionError("factor_adapt: basis tensors must be rank 3");
  const std::size_t f = left.shape()[0], n = left.shape()[1], r = left.shape()[2];
  const std::size_t out = right.shape()[1];
  if (m.size() != f || right.shape()[0] != r || right.shape()[2] != f || base.rows() != n || base.cols() != out)
    throw DimensionError("factor_adapt: shapes " + shape_string(base.shape()) + ", " + shape_string(left.shape()) +
                         ", " + shape_string(right.shape()) + " and m of length " + std::to_string(m.size()) +
                         " do not agree");
  Tensor a = Tensor::matrix(n, r);
  for (std::size_t k = 0; k < f; ++k)
    for (std::size_t i = 0; i < n * r; ++i) a[i] += m[k] * left[k * n * r + i];
  Tensor b = Tensor::matrix(r, out);
  for (std::size_t k = 0; k < r; ++k)
    for (std::size_t j = 0; j < out; ++j) {
      double s = 0.0;
      for (std::size_t q = 0; q < f; ++q) s += m[q] * right[(k * out + j) * f + q];
      b.at(k, j) = s;
    }
  Tensor adapted = matmul(a, b);
  for (std::size_t i = 0; i < adapted.size(); ++i) adapted[i] = base[i] + adapted[i];
  return adapted.reshaped(base.shape());
}

// --- ContextualLM ---

ContextualLM::ContextualLM(ModelConfig config, ContextVocab context_vocab)
    : config_(std::move(config)), context_vocab_(std::move(context_vocab)) {
  config_.validate();
  const std::size_t e = config_.embed_dim, d = config_.hidden_dim, f = config_.context_dim;
  const std::size_t input_rows =
      config_.vocab_size + (config_.architecture == Architecture::Prepend ? context_vocab_.flat_size() : 0);
  slots_.words = add("embedding.words", {input_rows, e});
  slots_.w_x = add("lstm.W_x", {e, 4 * d});
  slots_.w_h = add("lstm.W_h", {d, 4 * d});
  slots_.bias = add("lstm.b", {4 * d});
  slots_.w_v = add("output.W_v", {d, config_.vocab_size});
  if (!config_.adapts()) return;

  if (config_.context_repr == ContextRepr::Learned) {
    switch (config_.context_type) {
      case ContextType::Datetime: {
        const std::size_t q = f / 4;
        slots_.month = add("context.month", {12, q});
        slots_.week = add("context.week", {53, q});
        slots_.weekday = add("context.weekday", {7, q});
        slots_.hour = add("context.hour", {24, q});
        break;
      }
      case ContextType::Geo:
        slots_.geo = add("context.geo", {context_vocab_.field_size(ContextField::Geo), f});
        break;
      case ContextType::Prompt:
        slots_.prompt = add("context.prompt", {context_vocab_.field_size(ContextField::Prompt), f});
        break;
    }
  }
  const std::size_t c_in = config_.context_input_dim(), r = config_.factor_rank;
  if (config_.architecture == Architecture::Concat) {
    slots_.w_m = add("concat.W_m", {c_in, 4 * d});
  } else {
    slots_.left_x = add("factor.W_L_x", {c_in, e, r});
    slots_.right_x = add("factor.W_R_x", {r, 4 * d, c_in});
    slots_.left_h = add("factor.W_L_h", {c_in, d, r});
    slots_.right_h = add("factor.W_R_h", {r, 4 * d, c_in});
  }
  if (config_.attention != AttentionQuery::None)
    slots_.w_a = add("attention.W_a", {config_.member_dim(), config_.attention == AttentionQuery::Word ? e : d});
}

std::size_t ContextualLM::add(const std::string& name, Shape shape) {
  params_.emplace_back(name, Tensor(std::move(shape)));
  return params_.size() - 1;
}

std::size_t ContextualLM::output_size() const { return config_.vocab_size; }

Parameter& ContextualLM::parameter(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw std::out_of_range("no parameter named " + name);
}

const Parameter& ContextualLM::parameter(const std::string& name) const {
  return const_cast<ContextualLM*>(this)->parameter(name);
}

bool ContextualLM::has_parameter(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
}

std::vector<Parameter*> ContextualLM::parameter_pointers() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

void ContextualLM::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

std::vector<std::size_t> ContextualLM::prefix_tokens(const ContextRecord& rec) const {
  if (config_.architecture != Architecture::Prepend) return {};
  const std::size_t base = config_.vocab_size;
  std::vector<std::size_t> out;
  switch (config_.context_type) {
    case ContextType::Datetime:
      for (std::size_t id : datetime_tokens(rec, context_vocab_)) out.push_back(base + id);
      break;
    case ContextType::Geo:
      out.push_back(base + context_vocab_.flat_id(ContextField::Geo, context_vocab_.local_id(ContextField::Geo, rec)));
      break;
    case ContextType::Prompt:
      out.push_back(base +
                    context_vocab_.flat_id(ContextField::Prompt, context_vocab_.local_id(ContextField::Prompt, rec)));
      break;
  }
  return out;
}

Batch ContextualLM::make_batch(std::span<const Sequence> sequences) const {
  Batch batch;
  batch.rows = sequences.size();
  if (sequences.empty()) throw std::invalid_argument("make_batch: no sequences");
  std::vector<std::vector<std::size_t>> inputs, targets;
  std::vector<std::vector<double>> weights;
  for (const auto& s : sequences) {
    for (std::size_t w : s.words)
      if (w >= config_.vocab_size)
        throw std::out_of_range("token id " + std::to_string(w) + " >= vocab size " +
                                std::to_string(config_.vocab_size));
    const auto prefix = prefix_tokens(s.context);
    std::vector<std::size_t> in{Vocab::kBos}, tg;
    std::vector<double> wt;
    for (std::size_t p : prefix) {
      in.push_back(p);
      tg.push_back(Vocab::kBos);
      wt.push_back(0.0);
    }
    for (std::size_t w : s.words) {
      in.push_back(w);
      tg.push_back(w);
      wt.push_back(1.0);
    }
    tg.push_back(Vocab::kEos);
    wt.push_back(1.0);
    batch.steps = std::max(batch.steps, in.size());
    inputs.push_back(std::move(in));
    targets.push_back(std::move(tg));
    weights.push_back(std::move(wt));
    batch.contexts.push_back(s.context);
  }
  const std::size_t n = batch.steps * batch.rows;
  batch.inputs.assign(n, Vocab::kBos);
  batch.targets.assign(n, Vocab::kBos);
  batch.weights.assign(n, 0.0);
  for (std::size_t b = 0; b < batch.rows; ++b)
    for (std::size_t t = 0; t < inputs[b].size(); ++t) {
      const std::size_t k = t * batch.rows + b;
      batch.inputs[k] = inputs[b][t];
      batch.targets[k] = targets[b][t];
      batch.weights[k] = weights[b][t];
    }
  return batch;
}

std::vector<Var> ContextualLM::bind_trainable(Tape& tape) {
  std::vector<Var> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(tape.parameter(p));
  return out;
}

std::vector<Var> ContextualLM::bind_frozen(Tape& tape) const {
  std::vector<Var> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(tape.frozen(p));
  return out;
}

ForwardResult ContextualLM::forward(Tape& tape, const Batch& batch, const ForwardOptions& options) {
  const auto bound = bind_trainable(tape);
  return build(tape, batch, options, bound);
}

ForwardResult ContextualLM::infer(Tape& tape, const Batch& batch, const ForwardOptions& options) const {
  const auto bound = bind_frozen(tape);
  return build(tape, batch, options, bound);
}

std::vector<Var> ContextualLM::context_members(Tape& tape, const Batch& batch, std::span<const Var> bound) const {
  const std::size_t rows = batch.rows;
  std::vector<Var> members;
  auto gather = [&](std::optional<std::size_t> slot, ContextField field) {
    std::vector<std::size_t> ids(rows);
    for (std::size_t b = 0; b < rows; ++b) ids[b] = context_vocab_.local_id(field, batch.contexts[b]);
    members.push_back(tape.gather_rows(bound[*slot], ids));
  };
  switch (config_.set_kind()) {
    case ContextSetKind::LearnedTokens:
      gather(slots_.month, ContextField::Month);
      gather(slots_.week, ContextField::Week);
      gather(slots_.weekday, ContextField::Weekday);
      gather(slots_.hour, ContextField::Hour);
      break;
    case ContextSetKind::FeatureVector:
    case ContextSetKind::FeatureVectorGated: {
      Tensor features = Tensor::matrix(rows, 8);
      for (std::size_t b = 0; b < rows; ++b) {
        const auto f = datetime_features(batch.contexts[b]);
        std::copy(f.begin(), f.end(), features.row(b).begin());
      }
      members.push_back(tape.constant(std::move(features)));
      if (config_.set_kind() == ContextSetKind::FeatureVectorGated)
        members.push_back(tape.constant(Tensor::matrix(rows, 8)));
      break;
    }
    case ContextSetKind::Geo:
      gather(slots_.geo, ContextField::Geo);
      break;
    case ContextSetKind::Prompt:
      gather(slots_.prompt, ContextField::Prompt);
      break;
  }
  return members;
}

ForwardResult ContextualLM::build(Tape& tape, const Batch& batch, const ForwardOptions& options,
                                  std::span<const Var> bound) const {
  const std::size_t rows = batch.rows, steps = batch.steps;
  const std::size_t e = config_.embed_dim, d = config_.hidden_dim, r = config_.factor_rank;
  if (rows == 0 || steps == 0) throw std::invalid_argument("forward: empty batch");
  if (batch.inputs.size() != rows * steps || batch.contexts.size() != rows)
    throw DimensionError("forward: batch arrays do not match rows x steps");
  const std::size_t input_rows = params_[slots_.words].value.rows();
  for (std::size_t id : batch.inputs)
    if (id >= input_rows)
      throw std::out_of_range("token id " + std::to_string(id) + " outside the input vocabulary of " +
                              std::to_string(input_rows));

  ForwardResult result;
  const LstmVars lstm{bound[slots_.w_x], bound[slots_.w_h], bound[slots_.bias],
                      slots_.w_m ? bound[*slots_.w_m] : Var{}};
  const Var x_all = tape.gather_rows(bound[slots_.words], batch.inputs);

  const bool adapts = config_.adapts();
  const bool attention = config_.attention != AttentionQuery::None;
  const bool factor = config_.architecture == Architecture::Factor;
  std::vector<Var> members;
  Var static_context;
  Var left_x, right_x, left_h, right_h;
  if (adapts) {
    members = context_members(tape, batch, bound);
    if (!attention) static_context = members.size() == 1 ? members[0] : tape.concat_cols(members);
    if (factor) {
      const std::size_t c_in = config_.context_input_dim();
      left_x = tape.reshape(bound[*slots_.left_x], {c_in, e * r});
      right_x = tape.reshape(bound[*slots_.right_x], {r * 4 * d, c_in});
      left_h = tape.reshape(bound[*slots_.left_h], {c_in, d * r});
      right_h = tape.reshape(bound[*slots_.right_h], {r * 4 * d, c_in});
    }
  }

  // Per-utterance factor matrices (or the concat term) when context is static.
  struct Adapted {
    Var ax, bx, ah, bh;
  };
  auto adapt = [&](Var m) {
    return Adapted{tape.matmul(m, left_x), tape.matmul_nt(m, right_x), tape.matmul(m, left_h),
                   tape.matmul_nt(m, right_h)};
  };
  Adapted fixed;
  if (adapts && !attention && factor) fixed = adapt(static_context);

  // Word-query attention does not depend on the recurrence.
  Var prepass_context, prepass_alpha;
  const bool prepass = attention && config_.attention == AttentionQuery::Word && options.word_attention_prepass;
  if (prepass) {
    std::vector<Var> tiled;
    for (Var m : members) {
      if (steps == 1) {
        tiled.push_back(m);
        continue;
      }
      std::vector<Var> copies(steps, m);
      tiled.push_back(tape.concat_rows(copies));
    }
    const auto att = attend(tape, bound[*slots_.w_a], tiled, x_all);
    prepass_context = att.context;
    prepass_alpha = att.alpha;
  }

  LstmState state{tape.constant(Tensor::matrix(rows, d)), tape.constant(Tensor::matrix(rows, d))};
  std::vector<Var> hidden;
  hidden.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const Var x = steps == 1 ? x_all : tape.slice_rows(x_all, t * rows, rows);
    Var context = static_context;
    if (attention) {
      Var alpha;
      if (prepass) {
        context = tape.slice_rows(prepass_context, t * rows, rows);
        alpha = tape.slice_rows(prepass_alpha, t * rows, rows);
      } else {
        const Var query = config_.attention == AttentionQuery::Word ? x : state.h;
        const auto att = attend(tape, bound[*slots_.w_a], members, query);
        context = att.context;
        alpha = att.alpha;
      }
      if (options.record_attention) result.attention.push_back(tape.value(alpha));
    }

    if (factor) {
      const Adapted a = attention ? adapt(context) : fixed;
      Var px = tape.matmul(x, lstm.w_x);
      px = tape.add(px, tape.batched_vecmat(tape.batched_vecmat(x, a.ax, r), a.bx, 4 * d));
      Var ph = tape.matmul(state.h, lstm.w_h);
      ph = tape.add(ph, tape.batched_vecmat(tape.batched_vecmat(state.h, a.ah, r), a.bh, 4 * d));
      state = lstm_cell(tape, tape.add_row(tape.add(px, ph), lstm.b), state);
    } else {
      state = lstm_step(tape, lstm, x, state, config_.architecture == Architecture::Concat ? context : Var{});
    }
    hidden.push_back(state.h);
  }
  const Var h_all = steps == 1 ? hidden[0] : tape.concat_rows(hidden);
  result.logits = tape.matmul(h_all, bound[slots_.w_v]);
  return result;
}

Var ContextualLM::loss(Tape& tape, Var logits, const Batch& batch) {
  return tape.softmax_cross_entropy(logits, batch.targets, batch.weights);
}

std::vector<std::string> ContextualLM::member_labels() const {
  switch (config_.set_kind()) {
    case ContextSetKind::LearnedTokens:
      return {"month", "week", "weekday", "hour"};
    case ContextSetKind::FeatureVector:
      return {"datetime"};
    case ContextSetKind::FeatureVectorGated:
      return {"datetime", "zero_gate"};
    case ContextSetKind::Geo:
      return {"geo"};
    case ContextSetKind::Prompt:
      return {"prompt"};
  }
  return {};
}

// --- scoring ---

std::vector<SequenceScore> score_batch(const ContextualLM& model, const Batch& batch) {
  Tape tape;
  const auto out = model.infer(tape, batch);
  const Tensor& logits = tape.value(out.logits);
  std::vector<SequenceScore> scores(batch.rows);
  std::vector<CompensatedSum> totals(batch.rows);
  for (std::size_t t = 0; t < batch.steps; ++t)
    for (std::size_t b = 0; b < batch.rows; ++b) {
      const std::size_t k = t * batch.rows + b;
      if (batch.weights[k] == 0.0) continue;
      const auto row = logits.row(k);
      const long double lp = row[batch.targets[k]] - kernels::log_sum_exp_extended(row);
      scores[b].token_log_probs.push_back(static_cast<double>(lp));
      totals[b].add(lp);
    }
  for (std::size_t b = 0; b < batch.rows; ++b) scores[b].total = totals[b].value();
  return scores;
}

SequenceScore score_utterance(const ContextualLM& model, const Sequence& sequence) {
  return score_batch(model, model.make_batch(std::span<const Sequence>(&sequence, 1)))[0];
}

std::vector<double> next_token_distribution(const ContextualLM& model, const Sequence& prefix) {
  const Batch batch = model.make_batch(std::span<const Sequence>(&prefix, 1));
  Tape tape;
  const auto out = model.infer(tape, batch);
  const auto row = tape.value(out.logits).row(batch.steps - 1);
  std::vector<double> probs(row.begin(), row.end());
  kernels::softmax_inplace(probs);
  return probs;
}

std::vector<std::vector<double>> attention_weights(const ContextualLM& model, const Sequence& sequence) {
  const Batch batch = model.make_batch(std::span<const Sequence>(&sequence, 1));
  Tape tape;
  ForwardOptions options;
  options.record_attention = true;
  const auto out = model.infer(tape, batch, options);
  std::vector<std::vector<double>> weights;
  for (const auto& a : out.attention) weights.emplace_back(a.values().begin(), a.values().end());
  return weights;
}

}  // namespace ctxlm
