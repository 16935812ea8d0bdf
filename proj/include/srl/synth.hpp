#pragma once

#include <cctype>
#include <string>
#include <vector>

#include "srl/conllu.hpp"
#include "srl/rng.hpp"
#include "srl/util.hpp"

namespace srl {

struct SynthOptions {
  std::uint64_t seed = 7;
  std::size_t n_sentences = 50;
  std::size_t vocab_size = 100;
  std::string profile = "syntax-determined";
  std::string language = "xx";
  double shared_vocab_frac = 0.0;  // fraction of each POS sub-vocab shared across languages
};

namespace synth_detail {

// POS inventory with sub-vocabulary fractions of the total vocab.
inline const std::vector<std::pair<std::string, double>>& pos_classes() {
  static const std::vector<std::pair<std::string, double>> classes = {
      {"NOUN", 0.25}, {"VERB", 0.20}, {"ADJ", 0.10},   {"ADV", 0.10},
      {"DET", 0.05},  {"PRON", 0.10}, {"PROPN", 0.10}, {"ADP", 0.10},
  };
  return classes;
}

inline bool nominal(const std::string& pos) {
  return pos == "NOUN" || pos == "PROPN" || pos == "PRON";
}

// Child POS and deprel given head POS and attachment side. The deprel is a
// deterministic function of (head category, side, child POS), so tree + POS
// inputs carry enough signal to recover every label.
inline std::pair<std::string, std::string> sample_child(const std::string& head_pos, bool left,
                                                        Rng& rng) {
  double u = rng.uniform();
  if (head_pos == "VERB") {
    if (left) {
      if (u < 0.55) return {"NOUN", "nsubj"};
      if (u < 0.80) return {"ADV", "advmod"};
      return {"ADP", "mark"};
    }
    if (u < 0.40) return {"NOUN", "obj"};
    if (u < 0.55) return {"PRON", "iobj"};
    if (u < 0.75) return {"PROPN", "obl"};
    if (u < 0.85) return {"ADV", "advmod"};
    return {"VERB", "conj"};
  }
  if (nominal(head_pos)) {
    if (left) return u < 0.5 ? std::make_pair("DET", "det") : std::make_pair("ADJ", "amod");
    return {"PROPN", "nmod"};
  }
  return {"ADV", "advmod"};
}

// Role labels as a fixed function of the argument's deprel under its
// predicate; non-argument deprels return "".
inline std::string role_of_deprel(const std::string& deprel) {
  if (deprel == "nsubj") return "A0";
  if (deprel == "obj") return "A1";
  if (deprel == "iobj") return "A2";
  if (deprel == "obl") return "AM-LOC";
  if (deprel == "advmod") return "AM-TMP";
  return "";
}

struct TreeBuilder {
  std::vector<std::size_t> head;    // 1-based positions, 0 = root
  std::vector<std::string> pos;
  std::vector<std::string> deprel;
  Rng* rng;

  void span(std::size_t lo, std::size_t hi, std::size_t parent, bool left_of_parent) {
    std::size_t h = lo + rng->below(hi - lo + 1);
    head[h - 1] = parent;
    if (parent == 0) {
      pos[h - 1] = "VERB";
      deprel[h - 1] = "root";
    } else {
      auto [p, d] = sample_child(pos[parent - 1], left_of_parent, *rng);
      pos[h - 1] = p;
      deprel[h - 1] = d;
    }
    if (h > lo) children(lo, h - 1, h, true);
    if (h < hi) children(h + 1, hi, h, false);
  }

  // Partition [lo, hi] into contiguous blocks, each a child subtree of parent.
  void children(std::size_t lo, std::size_t hi, std::size_t parent, bool left) {
    if (lo > hi) return;
    std::size_t s = lo + rng->below(hi - lo + 1);
    span(lo, s, parent, left);
    if (s < hi) children(s + 1, hi, parent, left);
  }
};

}  // namespace synth_detail

// Seeded fixture generator: projective single-root trees of 3..12 tokens. In
// the "syntax-determined" profile every role label is a fixed function of the
// argument's deprel relative to its predicate.
inline Corpus synth_corpus(const SynthOptions& opt) {
  require(opt.n_sentences >= 1, "synth: n_sentences must be >= 1");
  require(opt.profile == "syntax-determined", "synth: unknown grammar profile \"", opt.profile,
          "\"");
  require(opt.vocab_size >= 20, "synth: vocab_size must be >= 20");

  Rng rng(opt.seed);
  Corpus corpus;
  std::set<std::string> roles_seen;

  // Per-POS sub-vocabulary sizes.
  std::map<std::string, std::size_t> sub_size;
  for (const auto& [tag, frac] : synth_detail::pos_classes()) {
    std::size_t n = static_cast<std::size_t>(frac * static_cast<double>(opt.vocab_size));
    sub_size[tag] = std::max<std::size_t>(n, 2);
  }

  auto word_form = [&](const std::string& tag, std::size_t k) {
    std::string low = tag;
    for (auto& c : low) c = static_cast<char>(std::tolower(c));
    std::size_t shared_cut =
        static_cast<std::size_t>(opt.shared_vocab_frac * static_cast<double>(sub_size[tag]));
    if (k < shared_cut) return strf("x", low, k);
    return strf(opt.language, "_", low, k);
  };

  for (std::size_t si = 0; si < opt.n_sentences; ++si) {
    std::size_t n = 3 + rng.below(10);  // 3..12
    synth_detail::TreeBuilder tb;
    tb.head.assign(n, 0);
    tb.pos.assign(n, "");
    tb.deprel.assign(n, "");
    tb.rng = &rng;
    tb.span(1, n, 0, false);

    Sentence s;
    s.sentence_id = strf(opt.language, "-", si + 1);
    s.language = opt.language;
    for (std::size_t i = 0; i < n; ++i) {
      Token t;
      t.index = i + 1;
      t.upos = tb.pos[i];
      t.head = tb.head[i];
      t.deprel = tb.deprel[i];
      t.form = word_form(t.upos, rng.below(sub_size[t.upos]));
      t.lemma = t.form;
      s.tokens.push_back(t);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (s.tokens[i].upos != "VERB") continue;
      if (!rng.bernoulli(0.9)) continue;
      PredicateFrame f;
      f.predicate_index = i + 1;
      f.sense = s.tokens[i].lemma + ".01";
      for (std::size_t j = 0; j < n; ++j) {
        if (s.tokens[j].head != i + 1) continue;
        std::string role = synth_detail::role_of_deprel(s.tokens[j].deprel);
        if (role.empty()) continue;
        f.roles[j + 1] = role;
        roles_seen.insert(role);
      }
      s.frames.push_back(std::move(f));
    }
    validate_sentence(s, 0);
    corpus.sentences.push_back(std::move(s));
  }

  corpus.role_labels.assign(roles_seen.begin(), roles_seen.end());
  corpus.stats = corpus.recount();
  return corpus;
}

}  // namespace srl
