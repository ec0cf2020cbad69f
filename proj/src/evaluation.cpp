#include "ctxlm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "ctxlm/util.hpp"

namespace ctxlm {

std::vector<Sequence> encode_corpus(const Corpus& corpus, const Vocab& vocab) {
  std::vector<Sequence> out;
  out.reserve(corpus.size());
  for (const auto& u : corpus) out.push_back({vocab.encode(u.tokens), u.context});
  return out;
}

std::vector<long double> sequence_log_probs(const ContextualLM& model, std::span<const Sequence> sequences,
                                       std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("sequence_log_probs: batch_size must be positive");
  std::vector<std::size_t> order(sequences.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sequences[a].words.size() < sequences[b].words.size();
  });
  std::vector<long double> totals(sequences.size(), 0.0L);
  std::vector<Sequence> chunk;
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    const std::size_t end = std::min(order.size(), begin + batch_size);
    chunk.clear();
    for (std::size_t i = begin; i < end; ++i) chunk.push_back(sequences[order[i]]);
    const auto scores = score_batch(model, model.make_batch(chunk));
    for (std::size_t i = begin; i < end; ++i) totals[order[i]] = scores[i - begin].total;
  }
  return totals;
}

double perplexity(long double log_prob, double tokens) {
  if (!(tokens > 0.0)) throw std::invalid_argument("perplexity: no tokens");
  return static_cast<double>(std::exp(-log_prob / tokens));
}

double corpus_perplexity(const ContextualLM& model, std::span<const Sequence> sequences, std::size_t batch_size) {
  const auto totals = sequence_log_probs(model, sequences, batch_size);
  CompensatedSum lp;
  double tokens = 0.0;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    lp.add(totals[i]);
    tokens += static_cast<double>(sequences[i].words.size() + 1);
  }
  return perplexity(lp.value(), tokens);
}

// --- reports ---

std::optional<double> EvalReport::ppl(Partition p) const {
  auto it = partitions.find(p);
  if (it == partitions.end()) return std::nullopt;
  return it->second.perplexity;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json parts = nlohmann::json::object();
  for (Partition p : {Partition::Full, Partition::Head, Partition::Tail}) {
    auto it = partitions.find(p);
    if (it == partitions.end()) {
      parts[partition_name(p)] = nullptr;
      continue;
    }
    const auto& r = it->second;
    parts[partition_name(p)] = {
        {"utterances", r.utterances}, {"tokens", r.tokens}, {"log_prob", r.log_prob}, {"perplexity", r.perplexity}};
  }
  return {{"model", model}, {"corpus_hash", corpus_hash}, {"metadata", metadata}, {"partitions", parts}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  r.model = j.value("model", "");
  r.corpus_hash = j.value("corpus_hash", "");
  r.metadata = j.value("metadata", nlohmann::json::object());
  const auto& parts = j.at("partitions");
  for (Partition p : {Partition::Full, Partition::Head, Partition::Tail}) {
    const std::string name = partition_name(p);
    if (!parts.contains(name) || parts.at(name).is_null()) continue;
    const auto& e = parts.at(name);
    r.partitions[p] = {e.at("utterances").get<std::size_t>(), e.at("tokens").get<double>(),
                       e.at("log_prob").get<double>(), e.at("perplexity").get<double>()};
  }
  return r;
}

EvalReport evaluate(const ContextualLM& model, std::span<const Sequence> sequences, const PartitionLabels& labels,
                    const std::string& corpus_hash, std::size_t batch_size) {
  if (labels.head.size() != sequences.size() || labels.tail.size() != sequences.size())
    throw DimensionError("evaluate: partition labels do not match the evaluation set");
  const auto totals = sequence_log_probs(model, sequences, batch_size);
  EvalReport report;
  report.model = to_string(model.config().architecture);
  if (model.config().attention != AttentionQuery::None) report.model += "+" + to_string(model.config().attention);
  report.corpus_hash = corpus_hash;
  report.metadata["model_config"] = model.config().to_json();
  std::map<Partition, PartitionResult> acc;
  std::map<Partition, CompensatedSum> log_prob;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const double tokens = static_cast<double>(sequences[i].words.size() + 1);
    auto add = [&](Partition p) {
      auto& r = acc[p];
      ++r.utterances;
      r.tokens += tokens;
      log_prob[p].add(totals[i]);
    };
    add(Partition::Full);
    if (labels.head[i]) add(Partition::Head);
    if (labels.tail[i]) add(Partition::Tail);
  }
  for (auto& [p, r] : acc) {
    r.log_prob = static_cast<double>(log_prob[p].value());
    r.perplexity = perplexity(log_prob[p].value(), r.tokens);
    report.partitions[p] = r;
  }
  return report;
}

double relative_reduction(double base_ppl, double model_ppl) {
  if (!(base_ppl > 0.0)) throw std::invalid_argument("relative_reduction: baseline perplexity must be positive");
  return 100.0 * (base_ppl - model_ppl) / base_ppl;
}

std::map<Partition, std::optional<double>> relative_reduction(const EvalReport& model, const EvalReport& base) {
  if (model.corpus_hash != base.corpus_hash)
    throw CorpusMismatchError("reports were computed on different corpora (" + model.corpus_hash + " vs " +
                              base.corpus_hash + ")");
  std::map<Partition, std::optional<double>> out;
  for (Partition p : {Partition::Full, Partition::Head, Partition::Tail}) {
    const auto a = model.ppl(p), b = base.ppl(p);
    out[p] = a && b ? std::optional<double>(relative_reduction(*b, *a)) : std::nullopt;
  }
  return out;
}

ConfidenceInterval confidence_interval(std::span<const double> values, double level) {
  if (values.size() < 2) throw std::invalid_argument("confidence_interval: need at least 2 runs");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence_interval: level must lie in (0, 1)");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(boost::math::complement(dist, (1.0 - level) / 2.0));
  return {mean, t * sd / std::sqrt(n), level, values.size()};
}

// --- sweeps and traces ---

ContextRecord with_field(const ContextRecord& rec, ContextField field, int value) {
  ContextRecord out = rec;
  auto check = [&](int lo, int hi) {
    if (value < lo || value > hi)
      throw std::out_of_range(field_name(field) + " value " + std::to_string(value) + " outside [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "]");
  };
  switch (field) {
    case ContextField::Month:
      check(1, 12);
      out.month = value;
      break;
    case ContextField::Week:
      check(1, 53);
      out.iso_week = value;
      break;
    case ContextField::Weekday:
      check(0, 6);
      out.weekday = value;
      break;
    case ContextField::Hour:
      check(0, 23);
      out.hour = value;
      break;
    default:
      throw std::invalid_argument("sweeps support month, week, weekday and hour, not " + field_name(field));
  }
  return out;
}

std::vector<int> field_values(ContextField field) {
  auto range = [](int lo, int hi) {
    std::vector<int> v;
    for (int i = lo; i <= hi; ++i) v.push_back(i);
    return v;
  };
  switch (field) {
    case ContextField::Month:
      return range(1, 12);
    case ContextField::Week:
      return range(1, 53);
    case ContextField::Weekday:
      return range(0, 6);
    case ContextField::Hour:
      return range(0, 23);
    default:
      throw std::invalid_argument("sweeps support month, week, weekday and hour, not " + field_name(field));
  }
}

std::vector<double> probability_sweep(const ContextualLM& model, const std::vector<std::size_t>& prefix,
                                      std::size_t target, const ContextRecord& base, ContextField field,
                                      std::span<const int> values) {
  if (target >= model.output_size()) throw std::out_of_range("probability_sweep: target outside the vocabulary");
  if (values.empty()) return {};
  std::vector<Sequence> seqs;
  for (int v : values) seqs.push_back({prefix, with_field(base, field, v)});
  const Batch batch = model.make_batch(seqs);
  Tape tape;
  const auto out = model.infer(tape, batch);
  const Tensor& logits = tape.value(out.logits);
  std::vector<double> curve;
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    const auto row = logits.row((batch.steps - 1) * batch.rows + b);
    curve.push_back(std::exp(row[target] - kernels::log_sum_exp(row)));
  }
  return curve;
}

AttentionTrace attention_trace(const ContextualLM& model, const Vocab& vocab, const std::vector<std::string>& words,
                               const ContextRecord& context) {
  if (model.config().attention == AttentionQuery::None)
    throw std::invalid_argument("attention_trace: model has no attention");
  AttentionTrace trace;
  trace.members = model.member_labels();
  trace.tokens.push_back(vocab.token(Vocab::kBos));
  for (const auto& w : words) trace.tokens.push_back(w);
  const auto weights = attention_weights(model, {vocab.encode(words), context});
  trace.weights = weights;
  return trace;
}

namespace {

std::string fmt_double(double v, int precision = 17) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
  return buf;
}

}  // namespace

std::string trace_csv(const AttentionTrace& trace) {
  std::ostringstream out;
  out << "step,token,member,weight\n";
  for (std::size_t t = 0; t < trace.weights.size(); ++t)
    for (std::size_t i = 0; i < trace.members.size(); ++i)
      out << t << ',' << trace.tokens[t] << ',' << trace.members[i] << ',' << fmt_double(trace.weights[t][i]) << '\n';
  return out.str();
}

std::string sweep_csv(ContextField field, std::span<const int> values, const std::vector<double>& model_curve,
                      const std::vector<double>* baseline_curve) {
  std::ostringstream out;
  out << field_name(field) << ",probability";
  if (baseline_curve) out << ",baseline";
  out << '\n';
  for (std::size_t i = 0; i < values.size(); ++i) {
    out << values[i] << ',' << fmt_double(model_curve.at(i));
    if (baseline_curve) out << ',' << fmt_double(baseline_curve->at(i));
    out << '\n';
  }
  return out.str();
}

std::string format_table(const std::vector<EvalReport>& reports, bool with_reduction) {
  const Partition parts[] = {Partition::Full, Partition::Head, Partition::Tail};
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"model"};
  for (Partition p : parts) header.push_back(partition_name(p) + " ppl");
  if (with_reduction)
    for (Partition p : parts) header.push_back(partition_name(p) + " red%");
  cells.push_back(header);
  for (const auto& r : reports) {
    std::vector<std::string> row{r.model};
    for (Partition p : parts) {
      const auto v = r.ppl(p);
      row.push_back(v ? fmt_double(*v, 6) : "absent");
    }
    if (with_reduction) {
      const auto red = relative_reduction(r, reports.front());
      for (Partition p : parts) {
        char buf[32];
        if (red.at(p)) std::snprintf(buf, sizeof(buf), "%.2f", *red.at(p));
        row.push_back(red.at(p) ? buf : "absent");
      }
    }
    cells.push_back(row);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream out;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << "  ";
      if (c == 0)
        out << row[c] << std::string(width[c] - row[c].size(), ' ');
      else
        out << std::string(width[c] - row[c].size(), ' ') << row[c];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace ctxlm
