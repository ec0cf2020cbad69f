#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxlm/corpus.hpp"

namespace ctxlm {

class GeneratorConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A probability table conditioned on one context field: one row per value
/// of the field ("none" has a single row), each row a distribution over the
/// table's outcomes.
struct ConditionalTable {
  std::string field = "none";  // none | hour | weekday | week | month | geo | prompt
  std::vector<std::vector<double>> rows;
};

struct SlotSpec {
  std::vector<std::string> values;
  ConditionalTable table;
};

struct TemplateSpec {
  std::string name;
  std::string text;  // words and {slot} references
};

/// Synthetic corpus description. Sampling order per utterance: date
/// (uniform over the range), hour, minute, geo-hash, prompt, then a template
/// from `template_table` given the context, then every slot of the template
/// left to right from its own table.
struct GeneratorConfig {
  std::size_t utterances = 100000;
  std::string start_date = "2019-01-01";
  std::string end_date = "2020-12-31";
  std::vector<double> hour_probs;  // 24 entries
  std::vector<std::string> geo_hashes;
  std::vector<double> geo_probs;
  double initial_prompt_prob = 0.75;
  std::vector<TemplateSpec> templates;
  ConditionalTable template_table;
  std::map<std::string, SlotSpec> slots;

  /// Throws GeneratorConfigError on malformed tables (rows not summing to 1
  /// within 1e-9, wrong row counts, unknown slots).
  void validate() const;

  /// Replaces every conditional table by its unweighted row average, so text
  /// and context become independent.
  GeneratorConfig without_planted_effects() const;

  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
};

/// Default voice-assistant style config with planted effects: "snooze" after
/// BOS peaking at 5-6am, holiday media queries tied to month, weather and
/// reminder queries tied to weekday, and a large context-free filler share.
GeneratorConfig default_generator_config();

/// Number of values in a table's conditioning field.
std::size_t field_domain_size(const std::string& field, const GeneratorConfig& config);
/// Index of a record in a conditioning field (0 for "none").
std::size_t field_value(const std::string& field, const ContextRecord& rec, const GeneratorConfig& config);

Corpus generate_synthetic(const GeneratorConfig& config, std::uint64_t seed);

/// P(first word == word | field value) implied by the template table,
/// for each value of the table's field.
std::vector<double> first_word_probability(const GeneratorConfig& config, const std::string& word);

}  // namespace ctxlm
