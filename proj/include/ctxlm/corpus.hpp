#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctxlm/context.hpp"

namespace ctxlm {

class CorpusParseError : public std::runtime_error {
 public:
  CorpusParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Utterance {
  std::vector<std::string> tokens;
  ContextRecord context;

  std::string text() const;
  friend bool operator==(const Utterance&, const Utterance&) = default;
};

using Corpus = std::vector<Utterance>;

struct LoadStats {
  std::size_t lines = 0;
  std::size_t skipped_empty = 0;
};

/// Line format: "YYYY-MM-DD HH:MM<TAB>text" with optional "<TAB>geo=XX" and
/// "<TAB>prompt=initial|follow_up" fields. Lines with empty text are skipped
/// and counted.
Corpus read_corpus(std::istream& in, LoadStats* stats = nullptr);
Corpus load_corpus(const std::string& path, LoadStats* stats = nullptr);
std::string format_utterance(const Utterance& u);
void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const std::string& path, const Corpus& corpus);
/// Hash of the serialized corpus.
std::string corpus_hash(const Corpus& corpus);

/// Word vocabulary with reserved ids BOS = 0, EOS = 1, UNK = 2.
class Vocab {
 public:
  static constexpr std::size_t kBos = 0;
  static constexpr std::size_t kEos = 1;
  static constexpr std::size_t kUnk = 2;

  Vocab();
  explicit Vocab(const std::vector<std::string>& tokens);

  std::size_t size() const { return tokens_.size(); }
  std::size_t id(const std::string& token) const;
  std::optional<std::size_t> find(const std::string& token) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t count(std::size_t id) const { return id < counts_.size() ? counts_[id] : 0; }
  void set_counts(std::vector<std::size_t> counts) { counts_ = std::move(counts); }

  std::vector<std::size_t> encode(const std::vector<std::string>& words) const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::size_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Keeps tokens seen at least min_count times, ordered by descending count
/// then lexicographically.
Vocab build_vocab(const Corpus& train, std::size_t min_count = 1);

struct SplitSpec {
  unsigned train = 90;
  unsigned dev = 5;
  unsigned test = 5;
  std::uint64_t seed = 0;
  void validate() const;
};

struct Splits {
  Corpus train, dev, test;
};

/// Uniform random partition. Dev and test sizes are floor(n * ratio / 100);
/// train receives the remainder.
Splits split_corpus(const Corpus& corpus, const SplitSpec& spec);

enum class Partition { Full, Head, Tail };
std::string partition_name(Partition p);

struct PartitionLabels {
  std::vector<bool> head;
  std::vector<bool> tail;
  std::size_t head_count() const;
  std::size_t tail_count() const;
};

/// Text frequencies over a reference corpus (exact string match on text).
std::unordered_map<std::string, std::size_t> text_frequencies(const Corpus& corpus);

/// Head: the utterance's text is among the top ceil(5%) unique texts by
/// descending frequency (ties lexicographic). Tail: the text occurs exactly
/// once in the frequency source.
PartitionLabels partition_head_tail(const Corpus& eval, const std::unordered_map<std::string, std::size_t>& freq,
                                    double head_fraction = 0.05);

/// Reassigns context records by a seeded uniform permutation; text untouched.
Corpus shuffle_contexts(const Corpus& corpus, std::uint64_t seed);

}  // namespace ctxlm
