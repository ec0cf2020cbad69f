#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxlm/corpus.hpp"
#include "ctxlm/model.hpp"

namespace ctxlm {

/// Word ids per utterance, unknown words mapped to UNK.
std::vector<Sequence> encode_corpus(const Corpus& corpus, const Vocab& vocab);

/// Total log-probability of every sequence (words + EOS), in input order.
/// Sequences are scored in length-sorted batches; each total depends only on
/// its own sequence.
std::vector<long double> sequence_log_probs(const ContextualLM& model, std::span<const Sequence> sequences,
                                       std::size_t batch_size = 64);

/// exp(-log_prob / tokens). Throws if tokens is not positive.
double perplexity(long double log_prob, double tokens);

/// Perplexity over all sequences, summing totals in input order.
double corpus_perplexity(const ContextualLM& model, std::span<const Sequence> sequences,
                         std::size_t batch_size = 64);

struct PartitionResult {
  std::size_t utterances = 0;
  double tokens = 0.0;
  double log_prob = 0.0;
  double perplexity = 0.0;
};

struct EvalReport {
  std::string model;
  std::string corpus_hash;
  nlohmann::json metadata = nlohmann::json::object();
  /// Missing entries are partitions with no utterances.
  std::map<Partition, PartitionResult> partitions;

  std::optional<double> ppl(Partition p) const;
  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

EvalReport evaluate(const ContextualLM& model, std::span<const Sequence> sequences, const PartitionLabels& labels,
                    const std::string& corpus_hash, std::size_t batch_size = 64);

class CorpusMismatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// 100 * (base - model) / base; negative values are degradations.
double relative_reduction(double base_ppl, double model_ppl);

/// Per-partition reductions; absent where either report lacks the partition.
std::map<Partition, std::optional<double>> relative_reduction(const EvalReport& model, const EvalReport& base);

struct ConfidenceInterval {
  double mean = 0.0;
  double half_width = 0.0;
  double level = 0.95;
  std::size_t n_runs = 0;

  double lower() const { return mean - half_width; }
  double upper() const { return mean + half_width; }
};

/// Student-t interval on the mean of the values.
ConfidenceInterval confidence_interval(std::span<const double> values, double level = 0.95);

/// Copy of rec with one datetime field replaced; the other fields stay as
/// they are even when the combination is not a real calendar date.
ContextRecord with_field(const ContextRecord& rec, ContextField field, int value);

/// Valid values of a datetime field in the record's numbering.
std::vector<int> field_values(ContextField field);

/// P(target | BOS, prefix, context with field = v) for each value.
std::vector<double> probability_sweep(const ContextualLM& model, const std::vector<std::size_t>& prefix,
                                      std::size_t target, const ContextRecord& base, ContextField field,
                                      std::span<const int> values);

struct AttentionTrace {
  std::vector<std::string> members;
  std::vector<std::string> tokens;           // consumed input per step, starting with <s>
  std::vector<std::vector<double>> weights;  // steps x members
};

AttentionTrace attention_trace(const ContextualLM& model, const Vocab& vocab, const std::vector<std::string>& words,
                               const ContextRecord& context);

/// Rows of (step, token, member, weight).
std::string trace_csv(const AttentionTrace& trace);
std::string sweep_csv(ContextField field, std::span<const int> values, const std::vector<double>& model_curve,
                      const std::vector<double>* baseline_curve = nullptr);

/// Aligned text table with one row per report and Full/Head/Tail columns.
/// Reductions against the first report are added when with_reduction is set.
std::string format_table(const std::vector<EvalReport>& reports, bool with_reduction = false);

}  // namespace ctxlm
