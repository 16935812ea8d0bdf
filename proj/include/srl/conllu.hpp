#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "srl/util.hpp"

namespace srl {

struct Token {
  std::size_t index = 0;  // 1-based
  std::string form;
  std::string lemma;
  std::string upos;
  std::size_t head = 0;  // 0 = virtual root
  std::string deprel;
};

struct PredicateFrame {
  std::size_t predicate_index = 0;
  std::string sense;
  std::map<std::size_t, std::string> roles;  // argument token index -> role label

  bool operator==(const PredicateFrame&) const = default;
};

struct Sentence {
  std::string sentence_id;
  std::string language;
  std::vector<Token> tokens;
  std::vector<PredicateFrame> frames;

  std::size_t size() const { return tokens.size(); }
};

// (predicate index, argument index, role label)
using GoldTriplet = std::tuple<std::size_t, std::size_t, std::string>;

struct LanguageStats {
  std::size_t sentences = 0;
  std::size_t predicates = 0;
  std::size_t arguments = 0;
};

struct SymbolCounts {
  std::map<std::string, std::size_t> word, lemma, upos, deprel, language;
};

struct Corpus {
  std::vector<Sentence> sentences;
  std::vector<std::string> role_labels;              // inventory, sorted, excludes the null label
  std::map<std::string, LanguageStats> stats;        // per language code
  std::vector<std::string> warnings;

  std::map<std::string, LanguageStats> recount() const {
    std::map<std::string, LanguageStats> out;
    for (const auto& s : sentences) {
      auto& st = out[s.language];
      ++st.sentences;
      st.predicates += s.frames.size();
      for (const auto& f : s.frames) st.arguments += f.roles.size();
    }
    return out;
  }

  SymbolCounts count_symbols() const {
    SymbolCounts c;
    for (const auto& s : sentences) {
      ++c.language[s.language];
      for (const auto& t : s.tokens) {
        ++c.word[t.form];
        ++c.lemma[t.lemma];
        ++c.upos[t.upos];
        ++c.deprel[t.deprel];
      }
    }
    return c;
  }
};

// Structural checks. `lines` maps token position -> source line when parsing
// a file; pass {} for synthesized sentences (messages then cite first_line).
inline void validate_sentence(const Sentence& s, std::size_t first_line,
                              const std::vector<std::size_t>& lines = {}) {
  std::size_t n = s.tokens.size();
  require(n > 0, "conllu: empty sentence at line ", first_line);
  auto line_of = [&](std::size_t tok_index) {
    return tok_index - 1 < lines.size() ? lines[tok_index - 1] : first_line;
  };
  std::size_t roots = 0;
  for (const auto& t : s.tokens) {
    require(t.head <= n, "conllu: head ", t.head, " out of range, line ", line_of(t.index));
    require(t.head != t.index, "conllu: self-headed token, line ", line_of(t.index));
    if (t.head == 0) ++roots;
  }
  require(roots == 1, "conllu: sentence at line ", first_line, " has ", roots,
          " root tokens, expected exactly 1");
  // Following heads from any token must reach the virtual root, so no cycles.
  for (const auto& t : s.tokens) {
    std::size_t cur = t.index;
    std::size_t hops = 0;
    while (cur != 0) {
      cur = s.tokens[cur - 1].head;
      require(++hops <= n, "conllu: cyclic heads involving token ", t.index, ", sentence at line ",
              first_line);
    }
  }
  for (const auto& f : s.frames) {
    require(f.predicate_index >= 1 && f.predicate_index <= n,
            "conllu: predicate index out of range, sentence at line ", first_line);
    for (const auto& [arg, role] : f.roles)
      require(arg >= 1 && arg <= n, "conllu: argument index out of range, sentence at line ",
              first_line);
  }
}

namespace detail {

struct RawSentence {
  std::string sentence_id;
  std::string language = "und";
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;
  std::size_t first_line = 0;
};

inline Sentence finish_sentence(const RawSentence& raw, std::set<std::string>& roles_seen,
                                std::vector<std::string>& warnings) {
  Sentence s;
  s.sentence_id = raw.sentence_id;
  s.language = raw.language;

  std::size_t ncols = 0;
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    const auto& cols = raw.rows[r];
    require(cols.size() >= 11, "conllu: expected at least 11 columns, got ", cols.size(),
            ", line ", raw.lines[r]);
    if (ncols == 0) ncols = cols.size();
    require(cols.size() == ncols, "conllu: ragged column count (", cols.size(), " vs ", ncols,
            "), line ", raw.lines[r]);

    Token t;
    try {
      std::size_t pos = 0;
      t.index = std::stoul(cols[0], &pos);
      require(pos == cols[0].size(), "trailing junk");
    } catch (const std::exception&) {
      fail("conllu: non-integer token id \"", cols[0], "\", line ", raw.lines[r]);
    }
    require(t.index == s.tokens.size() + 1, "conllu: token ids must be 1..n in order, line ",
            raw.lines[r]);
    t.form = cols[1];
    t.lemma = cols[2];
    t.upos = cols[3];
    try {
      std::size_t pos = 0;
      t.head = std::stoul(cols[6], &pos);
      require(pos == cols[6].size(), "trailing junk");
    } catch (const std::exception&) {
      fail("conllu: non-integer head \"", cols[6], "\", line ", raw.lines[r]);
    }
    t.deprel = cols[7];
    s.tokens.push_back(t);
  }

  // Predicate column 11 flags predicates; columns 12.. are per-predicate roles.
  std::size_t role_cols = ncols - 11;
  std::vector<std::size_t> predicate_rows;
  for (std::size_t r = 0; r < raw.rows.size(); ++r)
    if (raw.rows[r][10] != "_") predicate_rows.push_back(r);
  require(predicate_rows.size() == role_cols,
          "conllu: role-column/predicate mismatch (", predicate_rows.size(), " flagged predicates, ",
          role_cols, " role columns), sentence at line ", raw.first_line);

  for (std::size_t p = 0; p < predicate_rows.size(); ++p) {
    PredicateFrame f;
    f.predicate_index = predicate_rows[p] + 1;
    f.sense = raw.rows[predicate_rows[p]][10];
    for (std::size_t r = 0; r < raw.rows.size(); ++r) {
      const std::string& role = raw.rows[r][11 + p];
      if (role == "_") continue;
      f.roles[r + 1] = role;
      roles_seen.insert(role);
    }
    s.frames.push_back(std::move(f));
  }

  (void)warnings;
  validate_sentence(s, raw.first_line, raw.lines);
  return s;
}

}  // namespace detail

// CoNLL-U-plus reader: 10 standard columns, then a predicate-sense column,
// then one role column per predicate in textual order. Multi-word token
// ranges and empty nodes (decimal ids) are skipped with a warning.
inline Corpus parse_conllu_plus(std::istream& in) {
  Corpus corpus;
  std::set<std::string> roles_seen;
  detail::RawSentence raw;
  std::string line;
  std::size_t lineno = 0;

  auto flush = [&]() {
    if (raw.rows.empty()) {
      require(raw.sentence_id.empty(), "conllu: sentence \"", raw.sentence_id,
              "\" at line ", raw.first_line, " has no token lines");
      raw = detail::RawSentence{};
      return;
    }
    corpus.sentences.push_back(detail::finish_sentence(raw, roles_seen, corpus.warnings));
    raw = detail::RawSentence{};
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (raw.rows.empty() && raw.sentence_id.empty() && raw.first_line == 0) raw.first_line = lineno;
    if (line[0] == '#') {
      std::string body = trim(line.substr(1));
      auto eq = body.find('=');
      if (eq != std::string::npos) {
        std::string key = trim(body.substr(0, eq));
        std::string val = trim(body.substr(eq + 1));
        if (key == "sent_id") raw.sentence_id = val;
        if (key == "language") raw.language = val;
      }
      continue;
    }
    auto cols = split(line, '\t');
    // MWT ranges ("1-2") and empty nodes ("1.1") carry no SRL annotation here.
    if (cols[0].find('-') != std::string::npos || cols[0].find('.') != std::string::npos) {
      corpus.warnings.push_back(strf("skipped non-word line ", lineno, " (id ", cols[0], ")"));
      continue;
    }
    raw.rows.push_back(cols);
    raw.lines.push_back(lineno);
  }
  if (!raw.rows.empty()) flush();

  corpus.role_labels.assign(roles_seen.begin(), roles_seen.end());
  corpus.stats = corpus.recount();
  return corpus;
}

inline Corpus parse_conllu_plus(const std::string& text) {
  std::istringstream in(text);
  return parse_conllu_plus(in);
}

inline void serialize_conllu_plus(const Corpus& corpus, std::ostream& out) {
  for (const auto& s : corpus.sentences) {
    out << "# sent_id = " << s.sentence_id << "\n";
    out << "# language = " << s.language << "\n";
    for (const auto& t : s.tokens) {
      out << t.index << '\t' << t.form << '\t' << t.lemma << '\t' << t.upos << '\t' << '_' << '\t'
          << '_' << '\t' << t.head << '\t' << t.deprel << '\t' << '_' << '\t' << '_';
      bool is_pred = false;
      for (const auto& f : s.frames)
        if (f.predicate_index == t.index) {
          out << '\t' << f.sense;
          is_pred = true;
          break;
        }
      if (!is_pred) out << '\t' << '_';
      for (const auto& f : s.frames) {
        auto it = f.roles.find(t.index);
        out << '\t' << (it == f.roles.end() ? "_" : it->second);
      }
      out << "\n";
    }
    out << "\n";
  }
}

inline std::string serialize_conllu_plus(const Corpus& corpus) {
  std::ostringstream out;
  serialize_conllu_plus(corpus, out);
  return out.str();
}

// One triplet per (frame, role entry); the null relation is never emitted.
inline std::set<GoldTriplet> derive_triplets(const Sentence& s) {
  std::set<GoldTriplet> out;
  for (const auto& f : s.frames)
    for (const auto& [arg, role] : f.roles) out.insert({f.predicate_index, arg, role});
  return out;
}

inline bool same_corpus(const Corpus& a, const Corpus& b) {
  if (a.sentences.size() != b.sentences.size()) return false;
  for (std::size_t i = 0; i < a.sentences.size(); ++i) {
    const auto& x = a.sentences[i];
    const auto& y = b.sentences[i];
    if (x.sentence_id != y.sentence_id || x.language != y.language) return false;
    if (x.tokens.size() != y.tokens.size() || x.frames.size() != y.frames.size()) return false;
    for (std::size_t t = 0; t < x.tokens.size(); ++t) {
      const auto& u = x.tokens[t];
      const auto& v = y.tokens[t];
      if (u.index != v.index || u.form != v.form || u.lemma != v.lemma || u.upos != v.upos ||
          u.head != v.head || u.deprel != v.deprel)
        return false;
    }
    if (!(x.frames == y.frames)) return false;
  }
  return a.role_labels == b.role_labels;
}

}  // namespace srl
