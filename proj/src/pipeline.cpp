#include "ctxlm/pipeline.hpp"

#include "ctxlm/util.hpp"

namespace ctxlm {

std::uint64_t ExperimentConfig::run_seed() const {
  if (run == 0) return seed;
  return derive_seed(seed, "run-" + std::to_string(run));
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"model", model.to_json()},
          {"train", train.to_json()},
          {"split", {{"train", split.train}, {"dev", split.dev}, {"test", split.test}}},
          {"min_count", min_count},
          {"seed", seed},
          {"run", run},
          {"shuffle_contexts", shuffle_contexts}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
  if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
  if (j.contains("split")) {
    const auto& s = j.at("split");
    c.split.train = s.value("train", c.split.train);
    c.split.dev = s.value("dev", c.split.dev);
    c.split.test = s.value("test", c.split.test);
  }
  c.min_count = j.value("min_count", c.min_count);
  c.seed = j.value("seed", c.seed);
  c.run = j.value("run", c.run);
  c.shuffle_contexts = j.value("shuffle_contexts", c.shuffle_contexts);
  return c;
}

PreparedData prepare_data(const Corpus& corpus, const ExperimentConfig& config) {
  PreparedData data;
  data.corpus_hash = corpus_hash(corpus);
  SplitSpec spec = config.split;
  spec.seed = derive_seed(config.seed, "split");
  data.splits = split_corpus(corpus, spec);
  if (config.shuffle_contexts) {
    const std::uint64_t s = derive_seed(config.seed, "shuffle");
    data.splits.train = shuffle_contexts(data.splits.train, derive_seed(s, "train"));
    data.splits.dev = shuffle_contexts(data.splits.dev, derive_seed(s, "dev"));
    data.splits.test = shuffle_contexts(data.splits.test, derive_seed(s, "test"));
  }
  data.vocab = build_vocab(data.splits.train, config.min_count);
  for (const auto& u : data.splits.train)
    if (u.context.geo_hash) data.context_vocab.add_geo(*u.context.geo_hash);
  data.test_labels = partition_head_tail(data.splits.test, text_frequencies(corpus));
  data.train = encode_corpus(data.splits.train, data.vocab);
  data.dev = encode_corpus(data.splits.dev, data.vocab);
  data.test = encode_corpus(data.splits.test, data.vocab);
  return data;
}

RunOutput run_experiment(const PreparedData& data, const ExperimentConfig& config, const ProgressCallback& progress) {
  ModelConfig mc = config.model;
  mc.vocab_size = data.vocab.size();
  ContextualLM model(mc, data.context_vocab);
  const std::uint64_t seed = config.run_seed();
  init_params(model, derive_seed(seed, "init"));
  TrainConfig tc = config.train;
  tc.seed = seed;
  TrainResult result = train(model, data.train, data.dev, tc, progress);
  EvalReport report = evaluate(model, data.test, data.test_labels, data.corpus_hash);
  report.metadata["seed"] = config.seed;
  report.metadata["run"] = config.run;
  report.metadata["shuffled_contexts"] = config.shuffle_contexts;
  report.metadata["best_step"] = result.best_step;
  report.metadata["best_dev_ppl"] = result.best_dev_ppl;
  report.metadata["grad_clip_norm"] = config.train.grad_clip_norm;
  return {std::move(model), std::move(result), std::move(report)};
}

AblationResult shuffled_ablation(const Corpus& corpus, const ExperimentConfig& config) {
  if (!config.model.adapts() && config.model.architecture != Architecture::Prepend)
    throw ConfigError("the shuffled-context ablation needs a contextual architecture");
  ExperimentConfig truth = config;
  truth.shuffle_contexts = false;
  ExperimentConfig shuffled = config;
  shuffled.shuffle_contexts = true;
  AblationResult out;
  out.true_context = run_experiment(prepare_data(corpus, truth), truth).report;
  out.shuffled = run_experiment(prepare_data(corpus, shuffled), shuffled).report;
  out.delta = relative_reduction(out.true_context, out.shuffled);
  return out;
}

}  // namespace ctxlm
