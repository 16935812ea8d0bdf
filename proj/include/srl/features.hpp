#pragma once

#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "srl/conllu.hpp"
#include "srl/params.hpp"
#include "srl/tensor.hpp"
#include "srl/vocab.hpp"

namespace srl {

// Frozen per-token vectors exported by an external encoder.
// File format: first line "#dim=D", then one record per token:
//   sentence_id <TAB> token_index <TAB> space-separated decimal floats
class ContextVectorStore {
 public:
  static ContextVectorStore parse(std::istream& in) {
    ContextVectorStore store;
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "context vectors: empty stream");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    require(line.rfind("#dim=", 0) == 0, "context vectors: missing #dim=D header");
    try {
      store.dim_ = std::stoul(line.substr(5));
    } catch (const std::exception&) {
      fail("context vectors: bad header \"", line, "\"");
    }
    require(store.dim_ > 0, "context vectors: dimension must be positive");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto cols = split(line, '\t');
      require(cols.size() == 3, "context vectors: expected 3 tab-separated fields, line ", lineno);
      std::size_t tok = 0;
      try {
        tok = std::stoul(cols[1]);
      } catch (const std::exception&) {
        fail("context vectors: bad token index \"", cols[1], "\", line ", lineno);
      }
      std::vector<double> values;
      std::istringstream vs(cols[2]);
      double x;
      while (vs >> x) values.push_back(x);
      require(values.size() == store.dim_, "context vectors: (", cols[0], ",", tok, ") has ",
              values.size(), " values, expected ", store.dim_);
      auto key = std::make_pair(cols[0], tok);
      require(!store.map_.count(key), "context vectors: duplicate key (", cols[0], ",", tok, ")");
      store.map_[key] = std::move(values);
    }
    return store;
  }

  static ContextVectorStore parse(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  std::size_t dim() const { return dim_; }

  const std::vector<double>* find(const std::string& sentence_id, std::size_t token_index) const {
    auto it = map_.find({sentence_id, token_index});
    return it == map_.end() ? nullptr : &it->second;
  }

  void insert(const std::string& sentence_id, std::size_t token_index,
              std::vector<double> values) {
    require(values.size() == dim_, "context vectors: wrong dimension on insert");
    auto key = std::make_pair(sentence_id, token_index);
    require(!map_.count(key), "context vectors: duplicate key (", sentence_id, ",", token_index,
            ")");
    map_[key] = std::move(values);
  }

  void set_dim(std::size_t d) { dim_ = d; }

  void serialize(std::ostream& out) const {
    out << "#dim=" << dim_ << "\n";
    for (const auto& [key, values] : map_) {
      out << key.first << '\t' << key.second << '\t';
      for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out << ' ';
        std::ostringstream os;
        os.precision(17);
        os << values[i];
        out << os.str();
      }
      out << "\n";
    }
  }

 private:
  std::size_t dim_ = 0;
  std::map<std::pair<std::string, std::size_t>, std::vector<double>> map_;
};

struct FeatureFlags {
  bool word = true;
  bool lemma = false;
  bool context = false;
  bool pos = true;
};

// Trainable lookup tables for the enabled embedding blocks.
struct FeatureBank {
  Tensor word_table;   // |Vw| x word_dim
  Tensor lemma_table;  // |Vl| x lemma_dim
  Tensor pos_table;    // |Vp| x pos_dim
};

inline FeatureBank make_feature_bank(Params& params, const Vocabularies& vocabs,
                                     const FeatureFlags& flags, std::size_t word_dim,
                                     std::size_t lemma_dim, std::size_t pos_dim, Rng& rng) {
  FeatureBank bank;
  if (flags.word) bank.word_table = params.embedding("feat.word.E", vocabs.word.size(), word_dim, rng);
  if (flags.lemma)
    bank.lemma_table = params.embedding("feat.lemma.E", vocabs.lemma.size(), lemma_dim, rng);
  if (flags.pos) bank.pos_table = params.embedding("feat.pos.E", vocabs.upos.size(), pos_dim, rng);
  return bank;
}

// Per-token input: concatenation of enabled blocks in the fixed order
// (word, lemma, context, pos, tree, high-order). Disabled blocks are omitted.
inline std::vector<Tensor> assemble_input(Tape& tape, const Sentence& s, const FeatureFlags& flags,
                                          const FeatureBank& bank, const Vocabularies& vocabs,
                                          const ContextVectorStore* ctx,
                                          const std::vector<Tensor>& h_tree,
                                          const std::vector<Tensor>& h_ho) {
  bool any = flags.word || flags.lemma || flags.context || flags.pos || !h_tree.empty() ||
             !h_ho.empty();
  require(any, "assemble: no input features");
  require(h_tree.empty() || h_tree.size() == s.size(), "assemble: tree feature count ",
          h_tree.size(), " != sentence length ", s.size());
  require(h_ho.empty() || h_ho.size() == s.size(), "assemble: high-order feature count ",
          h_ho.size(), " != sentence length ", s.size());
  if (flags.context)
    require(ctx != nullptr, "assemble: context feature enabled but no vector store loaded");

  std::vector<Tensor> xs;
  xs.reserve(s.size());
  for (const auto& tok : s.tokens) {
    std::vector<Tensor> blocks;
    if (flags.word) blocks.push_back(tape.lookup(bank.word_table, vocabs.word.lookup(tok.form)));
    if (flags.lemma)
      blocks.push_back(tape.lookup(bank.lemma_table, vocabs.lemma.lookup(tok.lemma)));
    if (flags.context) {
      const auto* v = ctx->find(s.sentence_id, tok.index);
      require(v != nullptr, "assemble: missing context vector for token ", tok.index,
              " of sentence \"", s.sentence_id, "\"");
      blocks.push_back(Tensor::vec(*v));
    }
    if (flags.pos) blocks.push_back(tape.lookup(bank.pos_table, vocabs.upos.lookup(tok.upos)));
    if (!h_tree.empty()) blocks.push_back(h_tree[tok.index - 1]);
    if (!h_ho.empty()) blocks.push_back(h_ho[tok.index - 1]);
    xs.push_back(tape.concat(blocks));
  }
  return xs;
}

}  // namespace srl
