#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "srl/adam.hpp"
#include "srl/checkpoint.hpp"
#include "srl/conllu.hpp"
#include "srl/params.hpp"
#include "srl/tensor.hpp"
#include "srl/vocab.hpp"

namespace srl {

// ---------------------------------------------------------------------------
// Joint word-syntax graph: sentence words plus a virtual Root are the main
// nodes; one syntactic node per distinct UPOS tag and per distinct deprel
// label in the sentence. Edges: word—its UPOS node, head—deprel—dependent per
// arc (the virtual Root standing in as head of the root word's arc), and
// word adjacency.

struct JointNode {
  enum Kind { kWord = 0, kUpos = 1, kDeprel = 2, kRoot = 3 };
  Kind kind = kWord;
  std::string label;          // form / tag / deprel; empty for Root
  std::size_t word_pos = 0;   // 0-based token position for word nodes
};

struct JointGraph {
  std::vector<JointNode> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // u < v, sorted, unique
  std::vector<std::vector<std::size_t>> adj;
  std::size_t n_words = 0;

  bool has_edge(std::size_t u, std::size_t v) const {
    if (u > v) std::swap(u, v);
    return std::binary_search(edges.begin(), edges.end(), std::make_pair(u, v));
  }
};

inline JointGraph build_joint_graph(const Sentence& s) {
  JointGraph g;
  g.n_words = s.size();
  for (const auto& t : s.tokens) g.nodes.push_back({JointNode::kWord, t.form, t.index - 1});

  std::set<std::string> upos_set, deprel_set;
  for (const auto& t : s.tokens) {
    upos_set.insert(t.upos);
    deprel_set.insert(t.deprel);
  }
  std::map<std::string, std::size_t> upos_node, deprel_node;
  for (const auto& tag : upos_set) {
    upos_node[tag] = g.nodes.size();
    g.nodes.push_back({JointNode::kUpos, tag, 0});
  }
  for (const auto& lab : deprel_set) {
    deprel_node[lab] = g.nodes.size();
    g.nodes.push_back({JointNode::kDeprel, lab, 0});
  }
  std::size_t root_node = g.nodes.size();
  g.nodes.push_back({JointNode::kRoot, "", 0});

  std::set<std::pair<std::size_t, std::size_t>> edges;
  auto link = [&](std::size_t u, std::size_t v) {
    if (u == v) return;
    if (u > v) std::swap(u, v);
    edges.insert({u, v});
  };
  for (const auto& t : s.tokens) {
    std::size_t w = t.index - 1;
    link(w, upos_node[t.upos]);
    std::size_t rnode = deprel_node[t.deprel];
    std::size_t head = t.head == 0 ? root_node : t.head - 1;
    link(head, rnode);
    link(rnode, w);
    if (t.index >= 2) link(w - 1, w);
  }
  g.edges.assign(edges.begin(), edges.end());
  g.adj.assign(g.nodes.size(), {});
  for (const auto& [u, v] : g.edges) {
    g.adj[u].push_back(v);
    g.adj[v].push_back(u);
  }
  return g;
}

// ---------------------------------------------------------------------------
// GNN over the joint graph. Kind-specific input embeddings (all at the hidden
// size), shared propagation weights, mean aggregation over neighbors:
//   h_v <- ReLU(W_self h_v + mean_u W_nbr h_u + b)

struct GnnConfig {
  std::size_t hidden = 350;
  std::size_t layers = 5;
  double mask_rate = 0.15;
  std::size_t negative_ratio = 1;
};

struct GnnLayer {
  Tensor W_self, W_nbr, b;
};

struct GnnParams {
  GnnConfig config;
  Tensor emb_word, emb_upos, emb_deprel, emb_root, emb_mask;
  std::vector<GnnLayer> layers;
  Tensor head_word_W, head_word_b;      // masked-node classification heads
  Tensor head_upos_W, head_upos_b;
  Tensor head_deprel_W, head_deprel_b;
  Tensor edge_B;                        // bilinear edge scorer
};

// Ho-module vocabularies (word/upos/deprel inventories of the pretraining
// corpus); the deprel table doubles as the model's dependency-label embedding.
inline GnnParams make_gnn(Params& params, const Vocabularies& vocabs, const GnnConfig& config,
                          Rng& rng) {
  GnnParams p;
  p.config = config;
  std::size_t d = config.hidden;
  p.emb_word = params.embedding("ho.emb.word", vocabs.word.size(), d, rng);
  p.emb_upos = params.embedding("ho.emb.upos", vocabs.upos.size(), d, rng);
  p.emb_deprel = params.embedding("ho.emb.deprel", vocabs.deprel.size(), d, rng);
  p.emb_root = params.embedding("ho.emb.root", 1, d, rng);
  p.emb_mask = params.embedding("ho.emb.mask", 1, d, rng);
  for (std::size_t l = 0; l < config.layers; ++l) {
    GnnLayer layer;
    layer.W_self = params.glorot(strf("ho.l", l, ".Wself"), d, d, rng);
    layer.W_nbr = params.glorot(strf("ho.l", l, ".Wnbr"), d, d, rng);
    layer.b = params.zeros(strf("ho.l", l, ".b"), {d});
    p.layers.push_back(layer);
  }
  p.head_word_W = params.glorot("ho.head.word.W", vocabs.word.size(), d, rng);
  p.head_word_b = params.zeros("ho.head.word.b", {vocabs.word.size()});
  p.head_upos_W = params.glorot("ho.head.upos.W", vocabs.upos.size(), d, rng);
  p.head_upos_b = params.zeros("ho.head.upos.b", {vocabs.upos.size()});
  p.head_deprel_W = params.glorot("ho.head.deprel.W", vocabs.deprel.size(), d, rng);
  p.head_deprel_b = params.zeros("ho.head.deprel.b", {vocabs.deprel.size()});
  p.edge_B = params.glorot("ho.edge.B", d, d, rng);
  return p;
}

inline Tensor gnn_input_embedding(Tape& t, const GnnParams& p, const Vocabularies& vocabs,
                                  const JointNode& node) {
  switch (node.kind) {
    case JointNode::kWord: return t.lookup(p.emb_word, vocabs.word.lookup(node.label));
    case JointNode::kUpos: return t.lookup(p.emb_upos, vocabs.upos.lookup(node.label));
    case JointNode::kDeprel: return t.lookup(p.emb_deprel, vocabs.deprel.lookup(node.label));
    case JointNode::kRoot: return t.lookup(p.emb_root, 0);
  }
  fail("gnn: bad node kind");
}

// Per-node vectors after all propagation layers. Nodes listed in `masked`
// take the MASK symbol embedding as input.
inline std::vector<Tensor> gnn_forward(Tape& t, const JointGraph& g, const GnnParams& p,
                                       const Vocabularies& vocabs,
                                       const std::set<std::size_t>& masked = {}) {
  std::vector<Tensor> h;
  h.reserve(g.nodes.size());
  for (std::size_t v = 0; v < g.nodes.size(); ++v)
    h.push_back(masked.count(v) ? t.lookup(p.emb_mask, 0)
                                : gnn_input_embedding(t, p, vocabs, g.nodes[v]));
  for (const auto& layer : p.layers) {
    std::vector<Tensor> sent(g.nodes.size());
    for (std::size_t v = 0; v < g.nodes.size(); ++v) sent[v] = t.matmul(layer.W_nbr, h[v]);
    std::vector<Tensor> next(g.nodes.size());
    for (std::size_t v = 0; v < g.nodes.size(); ++v) {
      Tensor agg;
      if (g.adj[v].empty()) {
        agg = Tensor::zeros({p.config.hidden});
      } else {
        std::vector<Tensor> in;
        for (std::size_t u : g.adj[v]) in.push_back(sent[u]);
        agg = t.affine(t.sum(in), 1.0 / static_cast<double>(in.size()), 0.0);
      }
      next[v] = t.relu(t.add(t.add(t.matmul(layer.W_self, h[v]), agg), layer.b));
    }
    h = std::move(next);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Pre-training objectives.

struct MaskedNodeResult {
  Tensor loss;              // mean cross-entropy over masked nodes
  std::size_t masked = 0;
  std::size_t correct = 0;  // argmax == target
  std::vector<std::pair<int, std::size_t>> targets;  // (node kind, label id)
};

inline std::vector<std::size_t> maskable_nodes(const JointGraph& g) {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < g.nodes.size(); ++v)
    if (g.nodes[v].kind != JointNode::kRoot) out.push_back(v);
  return out;
}

// Masks floor(rate*|V|) nodes (at least 1, at most the maskable count) and
// predicts each masked node's label from its final-layer vector.
inline MaskedNodeResult masked_node_loss(Tape& t, const JointGraph& g, const GnnParams& p,
                                         const Vocabularies& vocabs, Rng& rng) {
  auto maskable = maskable_nodes(g);
  require(!maskable.empty(), "masked-node: graph has no maskable node");
  std::size_t want = static_cast<std::size_t>(p.config.mask_rate *
                                              static_cast<double>(g.nodes.size()));
  std::size_t count = std::min(std::max<std::size_t>(want, 1), maskable.size());
  std::set<std::size_t> masked;
  for (std::size_t i : rng.sample_distinct(maskable.size(), count)) masked.insert(maskable[i]);

  auto h = gnn_forward(t, g, p, vocabs, masked);
  MaskedNodeResult res;
  res.masked = masked.size();
  std::vector<Tensor> losses;
  for (std::size_t v : masked) {
    const JointNode& node = g.nodes[v];
    Tensor W, b;
    std::size_t target = 0;
    switch (node.kind) {
      case JointNode::kWord:
        W = p.head_word_W; b = p.head_word_b; target = vocabs.word.lookup(node.label); break;
      case JointNode::kUpos:
        W = p.head_upos_W; b = p.head_upos_b; target = vocabs.upos.lookup(node.label); break;
      case JointNode::kDeprel:
        W = p.head_deprel_W; b = p.head_deprel_b; target = vocabs.deprel.lookup(node.label); break;
      case JointNode::kRoot: fail("masked-node: Root is not maskable");
    }
    Tensor logits = t.add(t.matmul(W, h[v]), b);
    losses.push_back(t.cross_entropy(logits, target));
    res.targets.push_back({static_cast<int>(node.kind), target});
    std::size_t arg = 0;
    for (std::size_t i = 1; i < logits.numel(); ++i)
      if (logits.vals()[i] > logits.vals()[arg]) arg = i;
    if (arg == target) ++res.correct;
  }
  res.loss = t.affine(t.sum(losses), 1.0 / static_cast<double>(losses.size()), 0.0);
  return res;
}

struct EdgePredictionResult {
  Tensor loss;                              // mean BCE over scored pairs
  std::vector<std::pair<double, int>> scored;  // (score, is-edge) for AUC
  bool negatives_exhausted = false;         // complete graph: positives only
};

inline Tensor edge_score(Tape& t, const GnnParams& p, const Tensor& hu, const Tensor& hv) {
  return t.matmul(t.matmul(hu, p.edge_B), hv);
}

// Scores every true edge against an equal count (times the negative ratio) of
// uniformly sampled non-adjacent pairs.
inline EdgePredictionResult edge_prediction_loss(Tape& t, const JointGraph& g, const GnnParams& p,
                                                 const Vocabularies& vocabs, Rng& rng) {
  require(!g.edges.empty(), "edge-prediction: graph has no edges");
  auto h = gnn_forward(t, g, p, vocabs);

  // B h_v computed once per node; each pair then costs one dot product.
  std::vector<Tensor> bh(g.nodes.size());
  auto score = [&](std::size_t u, std::size_t v) {
    if (!bh[v].defined()) bh[v] = t.matmul(p.edge_B, h[v]);
    return t.matmul(h[u], bh[v]);
  };

  EdgePredictionResult res;
  std::vector<Tensor> losses;
  for (const auto& [u, v] : g.edges) {
    Tensor s = score(u, v);
    res.scored.push_back({s.item(), 1});
    losses.push_back(t.bce_with_logits(s, 1.0));
  }

  std::size_t n = g.nodes.size();
  std::size_t max_pairs = n * (n - 1) / 2;
  std::size_t wanted = g.edges.size() * p.config.negative_ratio;
  if (max_pairs <= g.edges.size()) {
    res.negatives_exhausted = true;
  } else {
    std::set<std::pair<std::size_t, std::size_t>> drawn;
    std::size_t attempts = 0;
    while (drawn.size() < wanted && attempts < 50 * wanted + 200) {
      ++attempts;
      std::size_t u = rng.below(n);
      std::size_t v = rng.below(n);
      if (u == v) continue;
      if (u > v) std::swap(u, v);
      if (g.has_edge(u, v) || drawn.count({u, v})) continue;
      drawn.insert({u, v});
      Tensor s = score(u, v);
      res.scored.push_back({s.item(), 0});
      losses.push_back(t.bce_with_logits(s, 0.0));
    }
    if (drawn.empty()) res.negatives_exhausted = true;
  }
  res.loss = t.affine(t.sum(losses), 1.0 / static_cast<double>(losses.size()), 0.0);
  return res;
}

// Mann-Whitney AUC with tie correction.
inline double compute_auc(const std::vector<std::pair<double, int>>& scored) {
  std::vector<std::pair<double, int>> s = scored;
  std::sort(s.begin(), s.end());
  double pos = 0, neg = 0;
  for (const auto& [sc, y] : s) (y ? pos : neg) += 1.0;
  if (pos == 0 || neg == 0) return 0.5;
  double rank_sum = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i;
    while (j < s.size() && s[j].first == s[i].first) ++j;
    double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k)
      if (s[k].second) rank_sum += avg_rank;
    i = j;
  }
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

// ---------------------------------------------------------------------------
// Feature extraction: per-token vectors of the word main nodes, frozen.

inline std::vector<std::vector<double>> extract_ho(const Sentence& s, const GnnParams& p,
                                                   const Vocabularies& vocabs) {
  Tape t(false);
  JointGraph g = build_joint_graph(s);
  auto h = gnn_forward(t, g, p, vocabs);
  std::vector<std::vector<double>> out;
  out.reserve(g.n_words);
  for (std::size_t w = 0; w < g.n_words; ++w) out.push_back(h[w].vals());
  return out;
}

// ---------------------------------------------------------------------------
// Pre-training driver: joint objective = masked-node loss + edge-prediction
// loss (unweighted sum), one sentence graph per optimizer step, graphs
// visited in seeded shuffled order.

struct PretrainOptions {
  GnnConfig gnn;
  std::size_t steps = 2000;
  double lr = 0.001;
  std::uint64_t seed = 1;
};

struct PretrainedGnn {
  Params params;
  GnnParams gnn;
  Vocabularies vocabs;
  std::vector<double> loss_history;
};

inline PretrainedGnn pretrain_ho(const std::vector<const Corpus*>& corpora,
                                 const PretrainOptions& opt) {
  PretrainedGnn out;
  out.vocabs = build_vocabularies(corpora, 1);
  Rng init_rng = Rng(opt.seed).fork(1);
  Rng mask_rng = Rng(opt.seed).fork(2);
  Rng order_rng = Rng(opt.seed).fork(3);
  out.gnn = make_gnn(out.params, out.vocabs, opt.gnn, init_rng);

  std::vector<JointGraph> graphs;
  for (const Corpus* c : corpora)
    for (const auto& s : c->sentences) graphs.push_back(build_joint_graph(s));
  require(!graphs.empty(), "pretrain: no sentences");

  AdamState adam(opt.lr);
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  for (std::size_t step = 0; step < opt.steps; ++step) {
    if (cursor == order.size()) {
      order.resize(graphs.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      order_rng.shuffle(order);
      cursor = 0;
    }
    const JointGraph& g = graphs[order[cursor++]];
    Tape t;
    out.params.zero_grad();
    auto node = masked_node_loss(t, g, out.gnn, out.vocabs, mask_rng);
    auto edge = edge_prediction_loss(t, g, out.gnn, out.vocabs, mask_rng);
    Tensor loss = t.add(node.loss, edge.loss);
    t.backward(loss);
    adam.step(out.params);
    out.loss_history.push_back(loss.item());
  }
  return out;
}

struct PretrainEval {
  double masked_accuracy = 0.0;
  double majority_rate = 0.0;  // rate of the most frequent masked target
  double edge_auc = 0.5;
};

// Seeded held-out evaluation: masked-node accuracy (against the rate a
// constant most-frequent-class predictor would reach on the same draws) and
// edge-prediction AUC.
inline PretrainEval eval_pretrain(const GnnParams& gnn, const Vocabularies& vocabs,
                                  const std::vector<const Sentence*>& heldout,
                                  std::uint64_t seed) {
  require(!heldout.empty(), "pretrain eval: no held-out sentences");
  Rng rng(seed);
  std::size_t masked_total = 0, masked_correct = 0;
  std::map<std::pair<int, std::size_t>, std::size_t> target_counts;
  std::vector<std::pair<double, int>> scored;
  for (const Sentence* s : heldout) {
    JointGraph g = build_joint_graph(*s);
    Tape t(false);
    auto node = masked_node_loss(t, g, gnn, vocabs, rng);
    masked_total += node.masked;
    masked_correct += node.correct;
    for (const auto& target : node.targets) ++target_counts[target];
    auto edge = edge_prediction_loss(t, g, gnn, vocabs, rng);
    for (const auto& sc : edge.scored) scored.push_back(sc);
  }
  PretrainEval out;
  out.masked_accuracy =
      masked_total == 0 ? 0.0 : static_cast<double>(masked_correct) / masked_total;
  std::size_t top = 0;
  for (const auto& [key, c] : target_counts) top = std::max(top, c);
  out.majority_rate = masked_total == 0 ? 0.0 : static_cast<double>(top) / masked_total;
  out.edge_auc = compute_auc(scored);
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary sidecar for ho checkpoints (symbols beyond PAD/UNK, in id order).

inline void save_ho_vocab(const Vocabularies& vocabs, const std::string& path) {
  std::ofstream os(path);
  require(os.good(), "ho vocab: cannot open \"", path, "\" for writing");
  os << "#srl-ho-vocab\n";
  auto dump = [&](const char* kind, const Vocabulary& v) {
    for (std::size_t i = 2; i < v.size(); ++i) os << kind << '\t' << v.symbol(i) << "\n";
  };
  dump("word", vocabs.word);
  dump("upos", vocabs.upos);
  dump("deprel", vocabs.deprel);
  require(os.good(), "ho vocab: write to \"", path, "\" failed");
}

inline Vocabularies load_ho_vocab(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "ho vocab: cannot open \"", path, "\"");
  std::string line;
  require(static_cast<bool>(std::getline(is, line)) && trim(line) == "#srl-ho-vocab",
          "ho vocab: bad header in \"", path, "\"");
  Vocabularies v;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    auto cols = split(line, '\t');
    require(cols.size() == 2, "ho vocab: malformed line \"", line, "\"");
    if (cols[0] == "word")
      v.word.insert(cols[1]);
    else if (cols[0] == "upos")
      v.upos.insert(cols[1]);
    else if (cols[0] == "deprel")
      v.deprel.insert(cols[1]);
    else
      fail("ho vocab: unknown kind \"", cols[0], "\"");
  }
  return v;
}

}  // namespace srl
