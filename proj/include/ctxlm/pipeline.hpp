#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxlm/corpus.hpp"
#include "ctxlm/evaluation.hpp"
#include "ctxlm/model.hpp"
#include "ctxlm/training.hpp"

namespace ctxlm {

/// Everything needed to reproduce one training run from a corpus.
///
/// The split always comes from derive_seed(seed, "split"), so runs that differ
/// only in `run` share their data split. Initialization and batch order come
/// from the run seed (seed itself for run 0).
struct ExperimentConfig {
  ModelConfig model;  // vocab_size is filled in from the training split
  TrainConfig train;
  SplitSpec split;
  std::size_t min_count = 1;
  std::uint64_t seed = 0;
  std::size_t run = 0;
  bool shuffle_contexts = false;

  std::uint64_t run_seed() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

struct PreparedData {
  std::string corpus_hash;
  Splits splits;
  Vocab vocab;
  ContextVocab context_vocab;
  PartitionLabels test_labels;
  std::vector<Sequence> train, dev, test;
};

/// Split, vocabulary, head/tail labels (frequencies over the whole corpus)
/// and encoded sequences. With shuffle_contexts, each split has its context
/// records permuted after splitting, so texts and partitions are unchanged.
PreparedData prepare_data(const Corpus& corpus, const ExperimentConfig& config);

struct RunOutput {
  ContextualLM model;
  TrainResult training;
  EvalReport report;
};

RunOutput run_experiment(const PreparedData& data, const ExperimentConfig& config,
                         const ProgressCallback& progress = {});

struct AblationResult {
  EvalReport true_context;
  EvalReport shuffled;
  /// Relative reduction of the true-context model over the shuffled one.
  std::map<Partition, std::optional<double>> delta;
};

/// Trains the same spec on true and on shuffled contexts. Rejects
/// context-free architectures.
AblationResult shuffled_ablation(const Corpus& corpus, const ExperimentConfig& config);

}  // namespace ctxlm
