#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ctxlm/tensor.hpp"

namespace ctxlm {

class ContextParseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class DialoguePrompt { Initial, FollowUp };

/// Utterance-level metadata. Local time; minutes are kept but never encoded.
struct ContextRecord {
  int year = 2000;
  int month = 1;         // 1-12
  int day = 1;           // 1-31
  int hour = 0;          // 0-23
  int minute = 0;        // 0-59
  int iso_week = 1;      // 1-53, derived
  int weekday = 0;       // 0 = Monday ... 6 = Sunday, derived
  std::optional<std::string> geo_hash;
  std::optional<DialoguePrompt> prompt;

  /// "YYYY-MM-DD HH:MM"
  std::string timestamp() const;
  friend bool operator==(const ContextRecord&, const ContextRecord&) = default;
  friend auto operator<=>(const ContextRecord&, const ContextRecord&) = default;
};

struct ContextExtras {
  std::optional<std::string> geo_hash;
  std::optional<DialoguePrompt> prompt;
};

/// Parses "YYYY-MM-DD HH:MM" and derives the ISO-8601 week and weekday.
ContextRecord parse_context(std::string_view timestamp, const ContextExtras& extras = {});
/// Builds a record from calendar fields, validating the date.
ContextRecord make_context(int year, int month, int day, int hour, int minute = 0);

/// ISO-8601 (week, weekday) for a valid date; weekday 0 = Monday.
std::pair<int, int> iso_week_and_weekday(int year, int month, int day);
bool is_valid_date(int year, int month, int day);

std::string prompt_name(DialoguePrompt p);
DialoguePrompt parse_prompt(std::string_view name);

enum class ContextField { Month, Week, Weekday, Hour, Geo, Prompt };

std::string field_name(ContextField f);
ContextField parse_field(std::string_view name);

/// Dense token ids for every context field.
///
/// Datetime and prompt domains are closed; geo-hash tokens are learned from
/// data and id 0 of the geo field is the reserved unknown token. Flat ids
/// number all fields consecutively in the order month, week, weekday, hour,
/// geo, prompt.
class ContextVocab {
 public:
  static constexpr std::size_t kUnknownGeo = 0;
  static constexpr std::size_t kUnknownPrompt = 0;

  ContextVocab();

  /// Adds a geo-hash token if not present; returns its local id.
  std::size_t add_geo(const std::string& geo);
  const std::vector<std::string>& geo_tokens() const { return geo_; }

  std::size_t field_size(ContextField f) const;
  std::size_t field_offset(ContextField f) const;
  std::size_t flat_size() const;

  /// Field-local id of a record's value (unknown geo/prompt map to 0).
  std::size_t local_id(ContextField f, const ContextRecord& rec) const;
  std::size_t flat_id(ContextField f, std::size_t local) const { return field_offset(f) + local; }
  std::string token(ContextField f, std::size_t local) const;
  std::string flat_token(std::size_t flat) const;
  std::optional<std::size_t> find_flat(const std::string& token) const;

  friend bool operator==(const ContextVocab&, const ContextVocab&) = default;

 private:
  std::vector<std::string> geo_;
  std::map<std::string, std::size_t> geo_index_;
};

constexpr std::array<ContextField, 4> kDatetimeFields = {ContextField::Month, ContextField::Week, ContextField::Weekday,
                                                          ContextField::Hour};

/// Flat ids of the month, week, weekday and hour tokens, e.g.
/// {month-12, week-52, wednesday, 7am}.
std::array<std::size_t, 4> datetime_tokens(const ContextRecord& rec, const ContextVocab& vocab);
/// Field-local indices of the four datetime tokens.
std::array<std::size_t, 4> datetime_local_ids(const ContextRecord& rec);

/// sin/cos pairs of hour/24, weekday/7, week/53 and month/12 on 0-based indices.
std::array<double, 8> datetime_features(const ContextRecord& rec);

enum class ContextSetKind { LearnedTokens, FeatureVector, FeatureVectorGated, Geo, Prompt };

/// The set M of context vectors an utterance is conditioned on.
struct ContextSet {
  ContextSetKind kind = ContextSetKind::FeatureVector;
  std::vector<std::vector<double>> members;

  std::size_t size() const { return members.size(); }
  /// [m_1; ...; m_k] without any zero-gate member.
  std::vector<double> concatenated() const;
};

/// Embedding tables for learned context representations, one row per token.
struct ContextTables {
  const Tensor* month = nullptr;
  const Tensor* week = nullptr;
  const Tensor* weekday = nullptr;
  const Tensor* hour = nullptr;
  const Tensor* geo = nullptr;
  const Tensor* prompt = nullptr;
};

ContextSet embed_context(ContextSetKind kind, const ContextRecord& rec, const ContextTables& tables = {},
                         const ContextVocab* vocab = nullptr);

/// Uniform random permutation of [0, n) determined by seed.
std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed);

}  // namespace ctxlm
