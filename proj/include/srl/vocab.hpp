#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "srl/conllu.hpp"
#include "srl/util.hpp"

namespace srl {

// Dense symbol table with reserved PAD=0 and UNK=1; unseen symbols map to UNK.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocabulary() {
    index_["<pad>"] = kPad;
    index_["<unk>"] = kUnk;
    symbols_ = {"<pad>", "<unk>"};
  }

  // Builds from counts, dropping symbols below min_count. Symbols are added
  // in sorted order so construction is independent of count-map iteration.
  static Vocabulary from_counts(const std::map<std::string, std::size_t>& counts,
                                std::size_t min_count) {
    Vocabulary v;
    v.min_count_ = min_count;
    for (const auto& [sym, c] : counts)
      if (c >= min_count) v.insert(sym);
    return v;
  }

  std::size_t insert(const std::string& sym) {
    auto it = index_.find(sym);
    if (it != index_.end()) return it->second;
    std::size_t id = symbols_.size();
    index_[sym] = id;
    symbols_.push_back(sym);
    return id;
  }

  std::size_t lookup(const std::string& sym) const {
    auto it = index_.find(sym);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& sym) const { return index_.count(sym) > 0; }
  std::size_t size() const { return symbols_.size(); }
  const std::string& symbol(std::size_t id) const { return symbols_.at(id); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  std::size_t min_count() const { return min_count_; }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> symbols_;
  std::size_t min_count_ = 1;
};

struct Vocabularies {
  Vocabulary word;
  Vocabulary lemma;
  Vocabulary upos;
  Vocabulary deprel;
  Vocabulary role;      // never contains the null label
  Vocabulary language;
};

// Word/lemma vocabularies honor min_count; tag inventories are closed.
inline Vocabularies build_vocabularies(const Corpus& corpus, std::size_t min_count = 1) {
  require(!corpus.sentences.empty(), "vocab: empty corpus");
  SymbolCounts counts = corpus.count_symbols();
  Vocabularies v;
  v.word = Vocabulary::from_counts(counts.word, min_count);
  v.lemma = Vocabulary::from_counts(counts.lemma, min_count);
  v.upos = Vocabulary::from_counts(counts.upos, 1);
  v.deprel = Vocabulary::from_counts(counts.deprel, 1);
  v.language = Vocabulary::from_counts(counts.language, 1);
  for (const auto& r : corpus.role_labels) v.role.insert(r);
  return v;
}

// Merge counting across corpora (multi-source training).
inline Vocabularies build_vocabularies(const std::vector<const Corpus*>& corpora,
                                       std::size_t min_count = 1) {
  require(!corpora.empty(), "vocab: no corpora");
  Corpus merged;
  for (const Corpus* c : corpora) {
    require(c != nullptr, "vocab: null corpus");
    for (const auto& s : c->sentences) merged.sentences.push_back(s);
    for (const auto& r : c->role_labels) merged.role_labels.push_back(r);
  }
  std::sort(merged.role_labels.begin(), merged.role_labels.end());
  merged.role_labels.erase(std::unique(merged.role_labels.begin(), merged.role_labels.end()),
                           merged.role_labels.end());
  return build_vocabularies(merged, min_count);
}

// Role-label scoring space: distribution index 0 is the null relation; index
// d >= 1 maps to role vocab id d + 1 (skipping PAD/UNK).
struct LabelSpace {
  std::size_t n_roles = 0;  // K, excludes the null label

  explicit LabelSpace(const Vocabulary& role_vocab) : n_roles(role_vocab.size() - 2) {}
  LabelSpace() = default;

  std::size_t dist_size() const { return n_roles + 1; }
  static constexpr std::size_t kNull = 0;

  std::size_t dist_index_of_role(std::size_t role_vocab_id) const {
    require(role_vocab_id >= 2, "label space: PAD/UNK are not scorable roles");
    return role_vocab_id - 1;
  }
  std::size_t role_vocab_id_of(std::size_t dist_index) const {
    require(dist_index >= 1 && dist_index <= n_roles, "label space: bad distribution index ",
            dist_index);
    return dist_index + 1;
  }
};

}  // namespace srl
