#include "ctxlm/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ctxlm/util.hpp"

namespace ctxlm {

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace

std::string Utterance::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

Corpus read_corpus(std::istream& in, LoadStats* stats) {
  Corpus corpus;
  LoadStats local;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++local.lines;
    const auto fields = split_on(line, '\t');
    if (fields.size() < 2) throw CorpusParseError(line_no, "expected '<timestamp>\\t<text>'");
    ContextExtras extras;
    for (std::size_t i = 2; i < fields.size(); ++i) {
      const std::string& f = fields[i];
      if (f.rfind("geo=", 0) == 0) {
        if (f.size() <= 4) throw CorpusParseError(line_no, "empty geo field");
        extras.geo_hash = f.substr(4);
      } else if (f.rfind("prompt=", 0) == 0) {
        try {
          extras.prompt = parse_prompt(f.substr(7));
        } catch (const ContextParseError& e) {
          throw CorpusParseError(line_no, e.what());
        }
      } else {
        throw CorpusParseError(line_no, "unknown field '" + f + "'");
      }
    }
    Utterance u;
    try {
      u.context = parse_context(fields[0], extras);
    } catch (const ContextParseError& e) {
      throw CorpusParseError(line_no, e.what());
    }
    u.tokens = whitespace_tokens(fields[1]);
    if (u.tokens.empty()) {
      ++local.skipped_empty;
      continue;
    }
    corpus.push_back(std::move(u));
  }
  if (stats) *stats = local;
  return corpus;
}

Corpus load_corpus(const std::string& path, LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus " + path);
  return read_corpus(in, stats);
}

std::string format_utterance(const Utterance& u) {
  std::string line = u.context.timestamp() + '\t' + u.text();
  if (u.context.geo_hash) line += "\tgeo=" + *u.context.geo_hash;
  if (u.context.prompt) line += "\tprompt=" + prompt_name(*u.context.prompt);
  return line;
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& u : corpus) out << format_utterance(u) << '\n';
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write corpus " + path);
  write_corpus(out, corpus);
}

std::string corpus_hash(const Corpus& corpus) {
  std::uint64_t h = fnv1a64("");
  for (const auto& u : corpus) {
    h = fnv1a64(format_utterance(u), h);
    h = fnv1a64("\n", h);
  }
  return hex64(h);
}

// ---------------------------------------------------------------------------

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(const std::vector<std::string>& tokens) {
  tokens_ = {"<s>", "</s>", "<unk>"};
  for (const auto& t : tokens) {
    if (t == "<s>" || t == "</s>" || t == "<unk>") continue;
    tokens_.push_back(t);
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = i;
  if (index_.size() != tokens_.size()) throw std::invalid_argument("vocab contains duplicate tokens");
}

std::optional<std::size_t> Vocab::find(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocab::id(const std::string& token) const { return find(token).value_or(kUnk); }

std::vector<std::size_t> Vocab::encode(const std::vector<std::string>& words) const {
  std::vector<std::size_t> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(id(w));
  return ids;
}

Vocab build_vocab(const Corpus& train, std::size_t min_count) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& u : train)
    for (const auto& t : u.tokens) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts)
    if (n >= min_count) kept.emplace_back(tok, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  Vocab vocab(tokens);
  std::vector<std::size_t> vc(vocab.size(), 0);
  for (auto& [tok, n] : kept) vc[vocab.id(tok)] = n;
  vocab.set_counts(std::move(vc));
  return vocab;
}

// ---------------------------------------------------------------------------

void SplitSpec::validate() const {
  if (train + dev + test != 100) throw std::invalid_argument("split ratios must sum to 100");
  if (train == 0) throw std::invalid_argument("train ratio must be positive");
}

Splits split_corpus(const Corpus& corpus, const SplitSpec& spec) {
  spec.validate();
  if (corpus.size() < 3) throw std::invalid_argument("corpus needs at least 3 utterances to split");
  const std::size_t n = corpus.size();
  const std::size_t n_dev = n * spec.dev / 100;
  const std::size_t n_test = n * spec.test / 100;
  const auto perm = random_permutation(n, spec.seed);
  Splits s;
  for (std::size_t i = 0; i < n; ++i) {
    const Utterance& u = corpus[perm[i]];
    if (i < n_dev) s.dev.push_back(u);
    else if (i < n_dev + n_test) s.test.push_back(u);
    else s.train.push_back(u);
  }
  return s;
}

std::string partition_name(Partition p) {
  switch (p) {
    case Partition::Full: return "full";
    case Partition::Head: return "head";
    case Partition::Tail: return "tail";
  }
  return "?";
}

std::size_t PartitionLabels::head_count() const { return static_cast<std::size_t>(std::count(head.begin(), head.end(), true)); }
std::size_t PartitionLabels::tail_count() const { return static_cast<std::size_t>(std::count(tail.begin(), tail.end(), true)); }

std::unordered_map<std::string, std::size_t> text_frequencies(const Corpus& corpus) {
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& u : corpus) ++freq[u.text()];
  return freq;
}

PartitionLabels partition_head_tail(const Corpus& eval, const std::unordered_map<std::string, std::size_t>& freq,
                                    double head_fraction) {
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  const auto head_size = static_cast<std::size_t>(std::ceil(head_fraction * static_cast<double>(ranked.size())));
  std::unordered_map<std::string, bool> is_head;
  for (std::size_t i = 0; i < head_size && i < ranked.size(); ++i) is_head[ranked[i].first] = true;

  PartitionLabels labels;
  labels.head.resize(eval.size());
  labels.tail.resize(eval.size());
  for (std::size_t i = 0; i < eval.size(); ++i) {
    const std::string text = eval[i].text();
    labels.head[i] = is_head.count(text) > 0;
    auto it = freq.find(text);
    labels.tail[i] = it != freq.end() && it->second == 1;
  }
  return labels;
}

Corpus shuffle_contexts(const Corpus& corpus, std::uint64_t seed) {
  const auto perm = random_permutation(corpus.size(), seed);
  Corpus out = corpus;
  for (std::size_t i = 0; i < corpus.size(); ++i) out[i].context = corpus[perm[i]].context;
  return out;
}

}  // namespace ctxlm
