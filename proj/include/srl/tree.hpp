#pragma once

#include <string>
#include <vector>

#include "srl/conllu.hpp"
#include "srl/params.hpp"
#include "srl/tensor.hpp"

namespace srl {

// Dependency graph over the sentence's tokens (0-based); the virtual root is
// not a node. Arcs exist head->dep and dep->head, plus a self-loop per node.
struct DepGraph {
  std::size_t n = 0;
  std::size_t root = 0;                             // 0-based root token
  std::vector<int> parent;                          // -1 for the root token
  std::vector<std::vector<std::size_t>> children;
  std::vector<std::string> deprel;                  // label of the arc to the head

  static DepGraph from_sentence(const Sentence& s) {
    DepGraph g;
    g.n = s.size();
    g.parent.assign(g.n, -1);
    g.children.assign(g.n, {});
    g.deprel.resize(g.n);
    for (const auto& t : s.tokens) {
      g.deprel[t.index - 1] = t.deprel;
      if (t.head == 0) {
        g.root = t.index - 1;
      } else {
        g.parent[t.index - 1] = static_cast<int>(t.head - 1);
        g.children[t.head - 1].push_back(t.index - 1);
      }
    }
    return g;
  }

  // Children-before-parent order for bottom-up passes.
  std::vector<std::size_t> post_order() const {
    std::vector<std::size_t> order;
    order.reserve(n);
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    while (!stack.empty()) {
      auto& [node, next_child] = stack.back();
      if (next_child < children[node].size()) {
        std::size_t c = children[node][next_child++];
        stack.push_back({c, 0});
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    return order;
  }
};

enum class GcnEdge : std::size_t { kSelf = 0, kHeadToDep = 1, kDepToHead = 2 };
constexpr std::size_t kGcnEdgeTypes = 3;

// ---------------------------------------------------------------------------
// TreeLSTM (bidirectional over the tree: bottom-up and top-down passes).

struct TreeLstmDirection {
  Tensor Wi, Ui, bi;
  Tensor Wf, Uf, bf;
  Tensor Wo, Uo, bo;
  Tensor Wu, Uu, bu;
};

struct TreeLstmParams {
  TreeLstmDirection up, down;
  std::size_t in_dim = 0;
  std::size_t hidden = 0;
};

inline TreeLstmDirection make_treelstm_direction(Params& params, const std::string& prefix,
                                                 std::size_t in_dim, std::size_t hidden,
                                                 Rng& rng) {
  TreeLstmDirection d;
  d.Wi = params.glorot(prefix + ".Wi", hidden, in_dim, rng);
  d.Ui = params.glorot(prefix + ".Ui", hidden, hidden, rng);
  d.bi = params.zeros(prefix + ".bi", {hidden});
  d.Wf = params.glorot(prefix + ".Wf", hidden, in_dim, rng);
  d.Uf = params.glorot(prefix + ".Uf", hidden, hidden, rng);
  d.bf = params.zeros(prefix + ".bf", {hidden});
  d.Wo = params.glorot(prefix + ".Wo", hidden, in_dim, rng);
  d.Uo = params.glorot(prefix + ".Uo", hidden, hidden, rng);
  d.bo = params.zeros(prefix + ".bo", {hidden});
  d.Wu = params.glorot(prefix + ".Wu", hidden, in_dim, rng);
  d.Uu = params.glorot(prefix + ".Uu", hidden, hidden, rng);
  d.bu = params.zeros(prefix + ".bu", {hidden});
  return d;
}

inline TreeLstmParams make_treelstm(Params& params, const std::string& prefix, std::size_t in_dim,
                                    std::size_t hidden, Rng& rng) {
  TreeLstmParams p;
  p.in_dim = in_dim;
  p.hidden = hidden;
  p.up = make_treelstm_direction(params, prefix + ".up", in_dim, hidden, rng);
  p.down = make_treelstm_direction(params, prefix + ".down", in_dim, hidden, rng);
  return p;
}

namespace tree_detail {

struct NodeState {
  Tensor h, c;
};

// One TreeLSTM cell application with an explicit neighbor set: the child-sum
// feeds the input/output/update gates, and each neighbor gets its own forget
// gate against the shared W_f x_j term.
inline NodeState treelstm_cell(Tape& t, const TreeLstmDirection& p, const Tensor& x,
                               const std::vector<NodeState>& neighbors, std::size_t hidden) {
  Tensor hbar;
  if (neighbors.empty()) {
    hbar = Tensor::zeros({hidden});
  } else {
    std::vector<Tensor> hs;
    for (const auto& nb : neighbors) hs.push_back(nb.h);
    hbar = t.sum(hs);
  }
  Tensor i = t.sigmoid(t.add(t.add(t.matmul(p.Wi, x), t.matmul(p.Ui, hbar)), p.bi));
  Tensor o = t.sigmoid(t.add(t.add(t.matmul(p.Wo, x), t.matmul(p.Uo, hbar)), p.bo));
  Tensor u = t.tanh(t.add(t.add(t.matmul(p.Wu, x), t.matmul(p.Uu, hbar)), p.bu));
  Tensor c = t.mul(i, u);
  Tensor wfx = t.matmul(p.Wf, x);
  for (const auto& nb : neighbors) {
    Tensor f = t.sigmoid(t.add(t.add(wfx, t.matmul(p.Uf, nb.h)), p.bf));
    c = t.add(c, t.mul(f, nb.c));
  }
  return {t.mul(o, t.tanh(c)), c};
}

}  // namespace tree_detail

// h_tree_j = [h_up_j ; h_down_j], dim 2*hidden. The bottom-up pass sums over
// children; the top-down pass uses the parent as the sole neighbor (the root
// uses the empty set).
inline std::vector<Tensor> treelstm_encode(Tape& t, const DepGraph& g,
                                           const std::vector<Tensor>& xs,
                                           const TreeLstmParams& p) {
  require(xs.size() == g.n, "treelstm: ", xs.size(), " inputs for ", g.n, " nodes");
  for (const auto& x : xs)
    require(x.rank() == 1 && x.dim(0) == p.in_dim, "treelstm: input dim ", shape_str(x.shape()),
            " does not match weight columns [", p.in_dim, "]");

  std::vector<tree_detail::NodeState> up(g.n), down(g.n);
  for (std::size_t j : g.post_order()) {
    std::vector<tree_detail::NodeState> kids;
    for (std::size_t c : g.children[j]) kids.push_back(up[c]);
    up[j] = tree_detail::treelstm_cell(t, p.up, xs[j], kids, p.hidden);
  }
  auto order = g.post_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {  // parents before children
    std::size_t j = *it;
    std::vector<tree_detail::NodeState> par;
    if (g.parent[j] >= 0) par.push_back(down[static_cast<std::size_t>(g.parent[j])]);
    down[j] = tree_detail::treelstm_cell(t, p.down, xs[j], par, p.hidden);
  }

  std::vector<Tensor> out;
  out.reserve(g.n);
  for (std::size_t j = 0; j < g.n; ++j) out.push_back(t.concat({up[j].h, down[j].h}));
  return out;
}

// ---------------------------------------------------------------------------
// Gated GCN with edge types {self-loop, head->dep, dep->head}. Messages carry
// a scalar gate per arc; a node update is ReLU of the sum of incoming
// messages. Layer k consumes layer k-1's states (layer 0 = the inputs).

struct GcnLayer {
  Tensor W[kGcnEdgeTypes];   // hidden x layer_in
  Tensor b[kGcnEdgeTypes];   // hidden
  Tensor wg[kGcnEdgeTypes];  // layer_in (scalar gate via dot product)
  Tensor bg[kGcnEdgeTypes];  // scalar
};

struct GcnParams {
  std::vector<GcnLayer> layers;
  std::size_t in_dim = 0;
  std::size_t hidden = 0;
};

inline GcnParams make_gcn(Params& params, const std::string& prefix, std::size_t in_dim,
                          std::size_t hidden, std::size_t n_layers, Rng& rng) {
  require(n_layers >= 1, "gcn: layer count must be >= 1");
  static const char* kEdgeName[kGcnEdgeTypes] = {"self", "hd", "dh"};
  GcnParams p;
  p.in_dim = in_dim;
  p.hidden = hidden;
  for (std::size_t l = 0; l < n_layers; ++l) {
    std::size_t layer_in = l == 0 ? in_dim : hidden;
    GcnLayer layer;
    for (std::size_t e = 0; e < kGcnEdgeTypes; ++e) {
      std::string base = strf(prefix, ".l", l, ".", kEdgeName[e]);
      layer.W[e] = params.glorot(base + ".W", hidden, layer_in, rng);
      layer.b[e] = params.zeros(base + ".b", {hidden});
      layer.wg[e] = params.glorot_vec(base + ".wg", layer_in, rng);
      layer.bg[e] = params.zeros(base + ".bg", {1});
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

inline std::vector<Tensor> gcn_encode(Tape& t, const DepGraph& g, const std::vector<Tensor>& xs,
                                      const GcnParams& p) {
  require(!p.layers.empty(), "gcn: no layers");
  require(xs.size() == g.n, "gcn: ", xs.size(), " inputs for ", g.n, " nodes");

  std::vector<Tensor> h = xs;
  for (const auto& layer : p.layers) {
    // Message from source node src of edge type e, shared by all receivers.
    std::vector<std::vector<Tensor>> cache(g.n, std::vector<Tensor>(kGcnEdgeTypes));
    auto message = [&](std::size_t src, GcnEdge e) {
      auto& slot = cache[src][static_cast<std::size_t>(e)];
      if (!slot.defined()) {
        std::size_t ei = static_cast<std::size_t>(e);
        Tensor gate = t.sigmoid(t.add(t.matmul(layer.wg[ei], h[src]), layer.bg[ei]));
        slot = t.mul(t.add(t.matmul(layer.W[ei], h[src]), layer.b[ei]), gate);
      }
      return slot;
    };
    std::vector<Tensor> next(g.n);
    for (std::size_t j = 0; j < g.n; ++j) {
      std::vector<Tensor> incoming;
      incoming.push_back(message(j, GcnEdge::kSelf));
      if (g.parent[j] >= 0)
        incoming.push_back(message(static_cast<std::size_t>(g.parent[j]), GcnEdge::kHeadToDep));
      for (std::size_t c : g.children[j]) incoming.push_back(message(c, GcnEdge::kDepToHead));
      next[j] = t.relu(t.sum(incoming));
    }
    h = std::move(next);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Dispatch.

enum class TreeEncoderChoice { kNone, kTreeLstm, kGcn };

inline TreeEncoderChoice parse_tree_encoder(const std::string& name) {
  if (name == "none") return TreeEncoderChoice::kNone;
  if (name == "treelstm") return TreeEncoderChoice::kTreeLstm;
  if (name == "gcn") return TreeEncoderChoice::kGcn;
  fail("tree encoder: unknown choice \"", name, "\" (expected treelstm, gcn or none)");
}

struct TreeEncoder {
  TreeEncoderChoice choice = TreeEncoderChoice::kNone;
  TreeLstmParams treelstm;
  GcnParams gcn;

  std::size_t out_dim() const {
    switch (choice) {
      case TreeEncoderChoice::kNone: return 0;
      case TreeEncoderChoice::kTreeLstm: return 2 * treelstm.hidden;
      case TreeEncoderChoice::kGcn: return gcn.hidden;
    }
    return 0;
  }
};

inline TreeEncoder make_tree_encoder(Params& params, TreeEncoderChoice choice, std::size_t in_dim,
                                     std::size_t hidden, std::size_t gcn_layers, Rng& rng) {
  TreeEncoder enc;
  enc.choice = choice;
  if (choice == TreeEncoderChoice::kTreeLstm)
    enc.treelstm = make_treelstm(params, "tree.lstm", in_dim, hidden, rng);
  if (choice == TreeEncoderChoice::kGcn)
    enc.gcn = make_gcn(params, "tree.gcn", in_dim, hidden, gcn_layers, rng);
  return enc;
}

// "none" yields an empty sequence; assemble_input then omits the tree block.
inline std::vector<Tensor> tree_feature(Tape& t, const Sentence& s, const std::vector<Tensor>& xs,
                                        const TreeEncoder& enc) {
  switch (enc.choice) {
    case TreeEncoderChoice::kNone: return {};
    case TreeEncoderChoice::kTreeLstm:
      return treelstm_encode(t, DepGraph::from_sentence(s), xs, enc.treelstm);
    case TreeEncoderChoice::kGcn: return gcn_encode(t, DepGraph::from_sentence(s), xs, enc.gcn);
  }
  return {};
}

}  // namespace srl
