#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "srl/conllu.hpp"
#include "srl/encoder.hpp"
#include "srl/features.hpp"
#include "srl/params.hpp"
#include "srl/tensor.hpp"
#include "srl/tree.hpp"
#include "srl/vocab.hpp"

namespace srl {

// ---------------------------------------------------------------------------
// Scorer parameters.

struct HeadProjection {
  Tensor W, b;  // r = ReLU(W h + b)
};

struct BiaffineParams {
  Tensor W1;  // d_r x d_r
  Tensor W2;  // 2 d_r
  Tensor b;   // scalar
};

struct ScorerParams {
  HeadProjection ffn_p, ffn_a;
  Tensor w_unary_p, w_unary_a;  // d_r, ranking scores for the beams
  BiaffineParams biaffine;
  Tensor label_W, label_b;      // K x d_r, K: role scores from r^a only
  LabelSpace labels;
  std::size_t head_dim = 0;
};

inline ScorerParams make_scorer(Params& params, std::size_t encoder_dim, std::size_t head_dim,
                                const LabelSpace& labels, Rng& rng) {
  require(labels.n_roles >= 1, "scorer: empty role inventory");
  ScorerParams sp;
  sp.labels = labels;
  sp.head_dim = head_dim;
  sp.ffn_p.W = params.glorot("scorer.ffnp.W", head_dim, encoder_dim, rng);
  sp.ffn_p.b = params.zeros("scorer.ffnp.b", {head_dim});
  sp.ffn_a.W = params.glorot("scorer.ffna.W", head_dim, encoder_dim, rng);
  sp.ffn_a.b = params.zeros("scorer.ffna.b", {head_dim});
  sp.w_unary_p = params.glorot_vec("scorer.unary.p", head_dim, rng);
  sp.w_unary_a = params.glorot_vec("scorer.unary.a", head_dim, rng);
  sp.biaffine.W1 = params.glorot("scorer.biaffine.W1", head_dim, head_dim, rng);
  sp.biaffine.W2 = params.glorot_vec("scorer.biaffine.W2", 2 * head_dim, rng);
  sp.biaffine.b = params.zeros("scorer.biaffine.b", {1});
  sp.label_W = params.glorot("scorer.label.W", labels.n_roles, head_dim, rng);
  sp.label_b = params.zeros("scorer.label.b", {labels.n_roles});
  return sp;
}

inline Tensor project_head(Tape& t, const HeadProjection& p, const Tensor& h) {
  return t.relu(t.add(t.matmul(p.W, h), p.b));
}

// Phi(r^p, r^a) = r^p . W1 . r^a + W2 . [r^p ; r^a] + b
inline Tensor pair_score(Tape& t, const BiaffineParams& p, const Tensor& rp, const Tensor& ra) {
  Tensor bilinear = t.matmul(t.matmul(rp, p.W1), ra);
  Tensor linear = t.matmul(p.W2, t.concat({rp, ra}));
  return t.add(t.add(bilinear, linear), p.b);
}

// Logits over the null label plus the K roles: index 0 is the null relation
// with its logit pinned to the constant 0; index d >= 1 carries
// Phi(r^p, r^a) + label_score(r^a)[d - 1].
inline Tensor pair_label_logits(Tape& t, const ScorerParams& sp, const Tensor& rp,
                                const Tensor& ra) {
  Tensor phi = pair_score(t, sp.biaffine, rp, ra);
  Tensor label_scores = t.add(t.matmul(sp.label_W, ra), sp.label_b);
  Tensor shifted = t.add(label_scores, phi);
  return t.concat({Tensor::scalar(0.0), shifted});
}

inline Tensor pair_label_distribution(Tape& t, const ScorerParams& sp, const Tensor& rp,
                                      const Tensor& ra) {
  return t.softmax(pair_label_logits(t, sp, rp, ra));
}

// ---------------------------------------------------------------------------
// Beam pruning: keep the top ceil(alpha*n) tokens (at least 1, at most n) by
// unary score, ties toward the lower token index; kept lists sorted by index.

inline std::size_t beam_size(double alpha, std::size_t n) {
  require(alpha > 0.0 && alpha <= 1.0, "beam: alpha ", alpha, " outside (0, 1]");
  auto k = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n)));
  return std::min(n, std::max<std::size_t>(1, k));
}

inline std::vector<std::size_t> top_by_score(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  idx.resize(std::min(k, idx.size()));
  std::sort(idx.begin(), idx.end());
  return idx;
}

// ---------------------------------------------------------------------------
// Full model: feature bank + optional tree encoder + sequence encoder +
// relation scorer, with every trainable group in one registry.

struct ModelConfig {
  FeatureFlags features;
  TreeEncoderChoice tree_choice = TreeEncoderChoice::kNone;
  EncoderMode encoder_mode = EncoderMode::kBasic;
  std::size_t word_dim = 300;
  std::size_t lemma_dim = 300;
  std::size_t pos_dim = 100;
  std::size_t context_dim = 0;   // from the vector store when enabled
  std::size_t ho_dim = 0;        // from the pretrained GNN when enabled
  std::size_t tree_hidden = 300;
  std::size_t gcn_layers = 2;
  std::size_t lstm_hidden = 650;
  std::size_t lstm_layers = 2;
  std::size_t head_dim = 300;
  std::size_t lang_dim = 8;
  double alpha_p = 0.4;
  double alpha_a = 0.7;
  double dropout = 0.3;
  bool freeze_embeddings = false;

  std::size_t base_input_dim() const {
    std::size_t d = 0;
    if (features.word) d += word_dim;
    if (features.lemma) d += lemma_dim;
    if (features.context) d += context_dim;
    if (features.pos) d += pos_dim;
    return d;
  }
};

struct SrlModel {
  ModelConfig cfg;
  Vocabularies vocabs;
  Params params;
  FeatureBank bank;
  TreeEncoder tree;
  EncoderParams encoder;
  ScorerParams scorer;

  std::size_t encoder_out_dim() const { return 2 * cfg.lstm_hidden; }
};

inline SrlModel make_srl_model(const ModelConfig& cfg, const Vocabularies& vocabs, Rng& rng) {
  SrlModel m;
  m.cfg = cfg;
  m.vocabs = vocabs;
  m.bank = make_feature_bank(m.params, m.vocabs, cfg.features, cfg.word_dim, cfg.lemma_dim,
                             cfg.pos_dim, rng);
  if (cfg.freeze_embeddings) {
    if (m.bank.word_table.defined()) m.bank.word_table.set_requires_grad(false);
    if (m.bank.lemma_table.defined()) m.bank.lemma_table.set_requires_grad(false);
    if (m.bank.pos_table.defined()) m.bank.pos_table.set_requires_grad(false);
  }
  // The tree and high-order blocks are derived features; the token-level
  // pipeline always needs at least one base block to feed them.
  std::size_t base_dim = cfg.base_input_dim();
  require(base_dim > 0, "assemble: no input features");
  m.tree = make_tree_encoder(m.params, cfg.tree_choice, base_dim, cfg.tree_hidden, cfg.gcn_layers,
                             rng);
  std::size_t enc_in = base_dim + m.tree.out_dim() + cfg.ho_dim;
  m.encoder = make_encoder(m.params, cfg.encoder_mode, enc_in, cfg.lstm_hidden, cfg.lstm_layers,
                           std::max<std::size_t>(m.vocabs.language.size() - 2, 1), cfg.lang_dim,
                           rng);
  m.scorer = make_scorer(m.params, m.encoder_out_dim(), cfg.head_dim, LabelSpace(m.vocabs.role),
                         rng);
  return m;
}

// Language vocab ids start at 2 (PAD/UNK are reserved); encoder rows are
// vocab id - 2.
inline std::optional<std::size_t> encoder_language_row(const SrlModel& m,
                                                       const std::string& language) {
  std::size_t id = m.vocabs.language.lookup(language);
  if (id < 2) return std::nullopt;
  return id - 2;
}

// ---------------------------------------------------------------------------
// Per-sentence forward pass.

struct SentenceScores {
  std::vector<std::size_t> pred_cands;  // 0-based token indices, sorted
  std::vector<std::size_t> arg_cands;
  std::vector<std::vector<Tensor>> logits;   // [pred][arg] -> K+1 logits
  std::vector<Tensor> unary_p, unary_a;      // per token, scalar
  std::size_t oracle_misses = 0;             // gold pairs outside the beams
};

struct ForwardOptions {
  bool training = false;
  // Replaces the predicate beam with the gold predicate positions
  // (argument-role labeling given gold predicates).
  bool gold_predicates = false;
  // Inject beam-pruned gold predicates/arguments into the candidate sets.
  bool gold_beam_inject = false;
  double alpha_p = -1.0;  // < 0: use the model default
  double alpha_a = -1.0;
};

inline SentenceScores score_sentence(Tape& t, SrlModel& m, const Sentence& s,
                                     const ContextVectorStore* ctx,
                                     const std::vector<std::vector<double>>* ho_vectors,
                                     const ForwardOptions& opt, Rng& dropout_rng) {
  std::size_t n = s.size();
  require(n > 0, "model: empty sentence \"", s.sentence_id, "\"");

  std::vector<Tensor> base =
      assemble_input(t, s, m.cfg.features, m.bank, m.vocabs, ctx, {}, {});
  std::vector<Tensor> h_tree = tree_feature(t, s, base, m.tree);
  std::vector<Tensor> h_ho;
  if (m.cfg.ho_dim > 0) {
    require(ho_vectors != nullptr && ho_vectors->size() == n,
            "model: high-order features missing for sentence \"", s.sentence_id, "\"");
    for (const auto& v : *ho_vectors) h_ho.push_back(Tensor::vec(v));
  }
  std::vector<Tensor> xs(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Tensor> blocks = {base[i]};
    if (!h_tree.empty()) blocks.push_back(h_tree[i]);
    if (!h_ho.empty()) blocks.push_back(h_ho[i]);
    Tensor x = blocks.size() == 1 ? blocks[0] : t.concat(blocks);
    xs[i] = t.dropout(x, m.cfg.dropout, dropout_rng, opt.training);
  }

  std::optional<std::size_t> lang_row;
  if (m.cfg.encoder_mode == EncoderMode::kPgn) {
    lang_row = encoder_language_row(m, s.language);
  }
  std::vector<Tensor> hs;
  if (m.cfg.encoder_mode == EncoderMode::kPgn && !lang_row.has_value()) {
    // Language unseen in training: fall back to the mean language embedding.
    hs = encode_with_language_vector(t, m.encoder, xs, mean_language_vector(m.encoder));
  } else {
    hs = encode(t, m.encoder, xs, lang_row);
  }
  for (auto& h : hs) h = t.dropout(h, m.cfg.dropout, dropout_rng, opt.training);

  SentenceScores out;
  std::vector<Tensor> rp(n), ra(n);
  std::vector<double> up(n), ua(n);
  out.unary_p.resize(n);
  out.unary_a.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    rp[i] = project_head(t, m.scorer.ffn_p, hs[i]);
    ra[i] = project_head(t, m.scorer.ffn_a, hs[i]);
    out.unary_p[i] = t.matmul(m.scorer.w_unary_p, rp[i]);
    out.unary_a[i] = t.matmul(m.scorer.w_unary_a, ra[i]);
    up[i] = out.unary_p[i].item();
    ua[i] = out.unary_a[i].item();
  }

  double alpha_p = opt.alpha_p > 0 ? opt.alpha_p : m.cfg.alpha_p;
  double alpha_a = opt.alpha_a > 0 ? opt.alpha_a : m.cfg.alpha_a;
  if (opt.gold_predicates) {
    std::set<std::size_t> preds;
    for (const auto& f : s.frames) preds.insert(f.predicate_index - 1);
    out.pred_cands.assign(preds.begin(), preds.end());
  } else {
    out.pred_cands = top_by_score(up, beam_size(alpha_p, n));
  }
  out.arg_cands = top_by_score(ua, beam_size(alpha_a, n));

  auto gold = derive_triplets(s);
  std::set<std::size_t> in_p(out.pred_cands.begin(), out.pred_cands.end());
  std::set<std::size_t> in_a(out.arg_cands.begin(), out.arg_cands.end());
  std::set<std::size_t> miss_p, miss_a;
  for (const auto& [p, a, role] : gold) {
    bool missed = false;
    if (!in_p.count(p - 1)) {
      miss_p.insert(p - 1);
      missed = true;
    }
    if (!in_a.count(a - 1)) {
      miss_a.insert(a - 1);
      missed = true;
    }
    if (missed) ++out.oracle_misses;
  }
  if (opt.gold_beam_inject) {
    for (std::size_t p : miss_p) in_p.insert(p);
    for (std::size_t a : miss_a) in_a.insert(a);
    out.pred_cands.assign(in_p.begin(), in_p.end());
    out.arg_cands.assign(in_a.begin(), in_a.end());
    if (!miss_p.empty() || !miss_a.empty()) out.oracle_misses = 0;
  }

  out.logits.resize(out.pred_cands.size());
  for (std::size_t pi = 0; pi < out.pred_cands.size(); ++pi) {
    out.logits[pi].resize(out.arg_cands.size());
    for (std::size_t ai = 0; ai < out.arg_cands.size(); ++ai)
      out.logits[pi][ai] =
          pair_label_logits(t, m.scorer, rp[out.pred_cands[pi]], ra[out.arg_cands[ai]]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loss: negative log likelihood over every candidate pair; a pair that is not
// a gold triplet is supervised toward the null label. Gold pairs pruned out
// of the beams contribute nothing (reported as oracle misses upstream).

inline Tensor sentence_loss(Tape& t, const SrlModel& m, const SentenceScores& sc,
                            const std::set<GoldTriplet>& gold) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> gold_label;  // 0-based -> dist index
  for (const auto& [p, a, role] : gold) {
    std::size_t role_id = m.vocabs.role.lookup(role);
    require(role_id >= 2, "loss: gold role \"", role, "\" missing from the role vocabulary");
    gold_label[{p - 1, a - 1}] = m.scorer.labels.dist_index_of_role(role_id);
  }
  std::vector<Tensor> terms;
  for (std::size_t pi = 0; pi < sc.pred_cands.size(); ++pi)
    for (std::size_t ai = 0; ai < sc.arg_cands.size(); ++ai) {
      auto it = gold_label.find({sc.pred_cands[pi], sc.arg_cands[ai]});
      std::size_t target = it == gold_label.end() ? LabelSpace::kNull : it->second;
      terms.push_back(t.cross_entropy(sc.logits[pi][ai], target));
    }
  if (terms.empty()) return Tensor::scalar(0.0);
  return t.reduce_sum(t.concat(terms));
}

// Auxiliary ranking objective: binary cross-entropy pushing gold predicate
// and argument tokens above the rest, so the beam scorers W_p/W_a receive a
// training signal (the likelihood in the relation loss never touches them).
inline Tensor unary_ranking_loss(Tape& t, const SentenceScores& sc, const Sentence& s) {
  std::set<std::size_t> gold_p, gold_a;
  for (const auto& f : s.frames) {
    gold_p.insert(f.predicate_index - 1);
    for (const auto& [a, role] : f.roles) gold_a.insert(a - 1);
  }
  std::vector<Tensor> terms;
  for (std::size_t i = 0; i < s.size(); ++i) {
    terms.push_back(t.bce_with_logits(sc.unary_p[i], gold_p.count(i) ? 1.0 : 0.0));
    terms.push_back(t.bce_with_logits(sc.unary_a[i], gold_a.count(i) ? 1.0 : 0.0));
  }
  return t.affine(t.reduce_sum(t.concat(terms)), 1.0 / static_cast<double>(s.size()), 0.0);
}

// ---------------------------------------------------------------------------
// Decoding: per candidate pair, argmax over the null label and the K roles;
// ties resolve toward the null label, then the lower label id.

struct DecodedTriplet {
  std::size_t predicate = 0;  // 1-based token indices
  std::size_t argument = 0;
  std::string role;
  double score = 0.0;

  auto key() const { return std::tie(predicate, argument, role); }
  bool operator<(const DecodedTriplet& o) const { return key() < o.key(); }
  bool operator==(const DecodedTriplet& o) const { return key() == o.key(); }
};

inline std::vector<DecodedTriplet> decode_scores(const SrlModel& m, const SentenceScores& sc) {
  std::vector<DecodedTriplet> out;
  for (std::size_t pi = 0; pi < sc.pred_cands.size(); ++pi)
    for (std::size_t ai = 0; ai < sc.arg_cands.size(); ++ai) {
      const auto& vals = sc.logits[pi][ai].vals();
      std::size_t best = 0;
      for (std::size_t d = 1; d < vals.size(); ++d)
        if (vals[d] > vals[best]) best = d;
      if (best == LabelSpace::kNull) continue;
      DecodedTriplet tri;
      tri.predicate = sc.pred_cands[pi] + 1;
      tri.argument = sc.arg_cands[ai] + 1;
      tri.role = m.vocabs.role.symbol(m.scorer.labels.role_vocab_id_of(best));
      tri.score = vals[best];
      out.push_back(std::move(tri));
    }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<DecodedTriplet> decode_sentence(SrlModel& m, const Sentence& s,
                                                   const ContextVectorStore* ctx,
                                                   const std::vector<std::vector<double>>* ho,
                                                   const ForwardOptions& opt) {
  Tape t(false);
  Rng unused(0);
  ForwardOptions o = opt;
  o.training = false;
  auto sc = score_sentence(t, m, s, ctx, ho, o, unused);
  return decode_scores(m, sc);
}

}  // namespace srl
