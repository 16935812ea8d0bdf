#pragma once

#include <functional>
#include <string>
#include <vector>

#include "srl/encoder.hpp"
#include "srl/ho.hpp"
#include "srl/model.hpp"
#include "srl/synth.hpp"
#include "srl/tensor.hpp"
#include "srl/tree.hpp"

namespace srl {

// Central finite differences against one reverse pass. The forward closure
// must rebuild the loss from the watched tensors' current values and be
// deterministic across calls.
struct GradCheck {
  double max_rel_err = 0.0;
  std::size_t checks = 0;
};

inline double rel_err(double analytic, double numeric) {
  double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) / denom;
}

inline GradCheck gradcheck(const std::function<Tensor(Tape&)>& forward,
                           const std::vector<Tensor>& watched, double step = 1e-6) {
  for (const auto& w : watched) w.zero_grad();
  std::vector<std::vector<double>> analytic;
  {
    Tape t;
    Tensor loss = forward(t);
    t.backward(loss);
    for (const auto& w : watched) analytic.push_back(w.grad());
  }
  GradCheck res;
  for (std::size_t wi = 0; wi < watched.size(); ++wi) {
    const Tensor& w = watched[wi];
    for (std::size_t i = 0; i < w.numel(); ++i) {
      double keep = w.vals()[i];
      w.vals()[i] = keep + step;
      double up;
      {
        Tape t(false);
        up = forward(t).item();
      }
      w.vals()[i] = keep - step;
      double down;
      {
        Tape t(false);
        down = forward(t).item();
      }
      w.vals()[i] = keep;
      double numeric = (up - down) / (2.0 * step);
      res.max_rel_err = std::max(res.max_rel_err, rel_err(analytic[wi][i], numeric));
      ++res.checks;
    }
  }
  return res;
}

struct SuiteResult {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t checks = 0;
};

namespace gradcheck_detail {

inline Tensor rand_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (auto& v : t.vals()) v = rng.uniform(-scale, scale);
  return t;
}

inline Tensor rand_const(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), false);
  for (auto& v : t.vals()) v = rng.uniform(-1.0, 1.0);
  return t;
}

// Collapse any output to a scalar with a fixed random projection so that a
// single backward covers every output element.
inline Tensor collapse(Tape& t, const Tensor& out, const Tensor& probe) {
  return t.reduce_sum(t.mul(out, probe));
}

inline void run_case(std::vector<SuiteResult>& results, const std::string& name,
                     const std::function<Tensor(Tape&)>& forward,
                     const std::vector<Tensor>& watched) {
  GradCheck g = gradcheck(forward, watched);
  for (auto& r : results)
    if (r.name == name) {
      r.max_rel_err = std::max(r.max_rel_err, g.max_rel_err);
      r.checks += g.checks;
      return;
    }
  results.push_back({name, g.max_rel_err, g.checks});
}

inline void primitive_cases(std::vector<SuiteResult>& results, Rng& rng) {
  // Enough repetitions that every primitive sees >= 100 random points.
  for (int rep = 0; rep < 20; ++rep) {
    {
      Tensor a = rand_tensor({3, 4}, rng), b = rand_tensor({4, 2}, rng);
      Tensor probe = rand_const({3, 2}, rng);
      run_case(results, "matmul",
               [&](Tape& t) { return collapse(t, t.matmul(a, b), probe); }, {a, b});
      Tensor x = rand_tensor({4}, rng);
      Tensor probe_v = rand_const({3}, rng);
      run_case(results, "matmul",
               [&](Tape& t) { return collapse(t, t.matmul(a, x), probe_v); }, {a, x});
    }
    {
      Tensor a = rand_tensor({5}, rng), b = rand_tensor({5}, rng), s = rand_tensor({1}, rng);
      Tensor probe = rand_const({5}, rng);
      run_case(results, "add", [&](Tape& t) { return collapse(t, t.add(a, b), probe); }, {a, b});
      run_case(results, "add", [&](Tape& t) { return collapse(t, t.add(a, s), probe); }, {a, s});
      run_case(results, "elementwise-mul",
               [&](Tape& t) { return collapse(t, t.mul(a, b), probe); }, {a, b});
      run_case(results, "elementwise-mul",
               [&](Tape& t) { return collapse(t, t.mul(a, s), probe); }, {a, s});
    }
    {
      Tensor a = rand_tensor({3}, rng), b = rand_tensor({2}, rng), c = rand_tensor({4}, rng);
      Tensor probe = rand_const({9}, rng);
      run_case(results, "concat",
               [&](Tape& t) { return collapse(t, t.concat({a, b, c}), probe); }, {a, b, c});
    }
    for (const char* act : {"sigmoid", "tanh", "relu"}) {
      Tensor x = rand_tensor({6}, rng, 2.0);
      // Keep relu inputs away from the kink, where a subgradient check is
      // meaningless.
      if (std::string(act) == "relu")
        for (auto& v : x.vals())
          if (std::fabs(v) < 1e-3) v = 0.5;
      Tensor probe = rand_const({6}, rng);
      std::string name = act;
      run_case(results, name,
               [&, name](Tape& t) {
                 Tensor y = name == "sigmoid" ? t.sigmoid(x)
                            : name == "tanh"  ? t.tanh(x)
                                              : t.relu(x);
                 return collapse(t, y, probe);
               },
               {x});
    }
    {
      Tensor x = rand_tensor({7}, rng, 3.0);
      Tensor probe = rand_const({7}, rng);
      run_case(results, "softmax",
               [&](Tape& t) { return collapse(t, t.softmax(x), probe); }, {x});
    }
    {
      Tensor a = rand_tensor({4}, rng), b = rand_tensor({4}, rng), c = rand_tensor({4}, rng);
      Tensor probe = rand_const({4}, rng);
      run_case(results, "sum-over-set",
               [&](Tape& t) { return collapse(t, t.sum({a, b, c}), probe); }, {a, b, c});
      run_case(results, "reduce-sum", [&](Tape& t) { return t.reduce_sum(t.mul(a, b)); }, {a, b});
    }
    {
      Tensor table = rand_tensor({5, 3}, rng);
      Tensor probe = rand_const({3}, rng);
      std::size_t row = rng.below(5);
      run_case(results, "embedding-lookup",
               [&](Tape& t) { return collapse(t, t.lookup(table, row), probe); }, {table});
    }
    {
      Tensor x = rand_tensor({6}, rng);
      std::uint64_t seed = rng.next();
      Tensor probe = rand_const({6}, rng);
      run_case(results, "dropout-mask",
               [&](Tape& t) {
                 Rng mask_rng(seed);
                 return collapse(t, t.dropout(x, 0.3, mask_rng, true), probe);
               },
               {x});
    }
    {
      Tensor x = rand_tensor({5}, rng);
      Tensor probe = rand_const({5}, rng);
      double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-1.0, 1.0);
      run_case(results, "scalar-affine",
               [&](Tape& t) { return collapse(t, t.affine(x, a, b), probe); }, {x});
    }
    {
      Tensor x = rand_tensor({8}, rng);
      Tensor probe = rand_const({3}, rng);
      run_case(results, "slice",
               [&](Tape& t) { return collapse(t, t.slice(x, 2, 3), probe); }, {x});
      Tensor probe2 = rand_const({2, 4}, rng);
      run_case(results, "reshape",
               [&](Tape& t) { return collapse(t, t.reshape(x, {2, 4}), probe2); }, {x});
      run_case(results, "pick", [&](Tape& t) { return t.pick(x, 5); }, {x});
    }
    {
      Tensor logits = rand_tensor({5}, rng, 2.0);
      std::size_t target = rng.below(5);
      run_case(results, "cross-entropy",
               [&](Tape& t) { return t.cross_entropy(logits, target); }, {logits});
      Tensor s = rand_tensor({1}, rng, 2.0);
      double y = rng.bernoulli(0.5) ? 1.0 : 0.0;
      run_case(results, "bce-with-logits",
               [&](Tape& t) { return t.bce_with_logits(s, y); }, {s});
    }
  }
}

inline Sentence tiny_sentence() {
  //  "w2 -> w1, w2 -> w3", one frame with one role
  Sentence s;
  s.sentence_id = "fx-1";
  s.language = "xx";
  s.tokens = {
      {1, "xa", "xa", "NOUN", 2, "nsubj"},
      {2, "xb", "xb", "VERB", 0, "root"},
      {3, "xc", "xc", "NOUN", 2, "obj"},
  };
  PredicateFrame f;
  f.predicate_index = 2;
  f.sense = "xb.01";
  f.roles = {{1, "A0"}, {3, "A1"}};
  s.frames.push_back(f);
  return s;
}

inline void composite_cases(std::vector<SuiteResult>& results, Rng& rng) {
  Sentence sent = tiny_sentence();
  DepGraph graph = DepGraph::from_sentence(sent);

  {
    Params params;
    Rng prng = rng.fork(101);
    TreeLstmParams p = make_treelstm(params, "t", 3, 4, prng);
    std::vector<Tensor> xs = {rand_tensor({3}, rng), rand_tensor({3}, rng),
                              rand_tensor({3}, rng)};
    Tensor probe = rand_const({8 * 3}, rng);
    std::vector<Tensor> watched = xs;
    for (const auto& [name, tensor] : params.items()) watched.push_back(tensor);
    run_case(results, "treelstm",
             [&](Tape& t) {
               auto hs = treelstm_encode(t, graph, xs, p);
               return collapse(t, t.concat(hs), probe);
             },
             watched);
  }
  {
    Params params;
    Rng prng = rng.fork(102);
    GcnParams p = make_gcn(params, "g", 3, 4, 2, prng);
    std::vector<Tensor> xs = {rand_tensor({3}, rng), rand_tensor({3}, rng),
                              rand_tensor({3}, rng)};
    Tensor probe = rand_const({12}, rng);
    std::vector<Tensor> watched = xs;
    for (const auto& [name, tensor] : params.items()) watched.push_back(tensor);
    run_case(results, "gcn",
             [&](Tape& t) {
               auto hs = gcn_encode(t, graph, xs, p);
               return collapse(t, t.concat(hs), probe);
             },
             watched);
  }
  {
    Params params;
    Rng prng = rng.fork(103);
    Corpus mini;
    mini.sentences = {sent};
    mini.role_labels = {"A0", "A1"};
    Vocabularies vocabs = build_vocabularies(mini, 1);
    GnnConfig config;
    config.hidden = 4;
    config.layers = 2;
    GnnParams p = make_gnn(params, vocabs, config, prng);
    JointGraph jg = build_joint_graph(sent);
    std::vector<Tensor> watched;
    for (const auto& [name, tensor] : params.items()) watched.push_back(tensor);
    std::uint64_t seed = rng.next();
    run_case(results, "gnn",
             [&](Tape& t) {
               Rng mask_rng(seed);
               auto node = masked_node_loss(t, jg, p, vocabs, mask_rng);
               auto edge = edge_prediction_loss(t, jg, p, vocabs, mask_rng);
               return t.add(node.loss, edge.loss);
             },
             watched);
  }
  {
    Params params;
    Rng prng = rng.fork(104);
    EncoderParams enc = make_encoder(params, EncoderMode::kPgn, 3, 4, 2, 2, 2, prng);
    std::vector<Tensor> xs = {rand_tensor({3}, rng), rand_tensor({3}, rng),
                              rand_tensor({3}, rng)};
    Tensor probe = rand_const({8 * 3}, rng);
    std::vector<Tensor> watched = xs;
    for (const auto& [name, tensor] : params.items()) watched.push_back(tensor);
    run_case(results, "pgn-bilstm",
             [&](Tape& t) {
               auto hs = encode(t, enc, xs, std::size_t{1});
               return collapse(t, t.concat(hs), probe);
             },
             watched);
  }
  {
    Params params;
    Rng prng = rng.fork(105);
    LabelSpace labels;
    labels.n_roles = 2;
    ScorerParams sp = make_scorer(params, 6, 4, labels, prng);
    std::vector<Tensor> hs = {rand_tensor({6}, rng), rand_tensor({6}, rng),
                              rand_tensor({6}, rng), rand_tensor({6}, rng)};
    std::vector<Tensor> watched = hs;
    for (const auto& [name, tensor] : params.items()) watched.push_back(tensor);
    run_case(results, "biaffine+loss",
             [&](Tape& t) {
               std::vector<Tensor> terms;
               for (std::size_t i = 0; i < hs.size(); ++i)
                 for (std::size_t j = 0; j < hs.size(); ++j) {
                   Tensor rp = project_head(t, sp.ffn_p, hs[i]);
                   Tensor ra = project_head(t, sp.ffn_a, hs[j]);
                   std::size_t target = (i + j) % 3;
                   terms.push_back(t.cross_entropy(pair_label_logits(t, sp, rp, ra), target));
                 }
               return t.reduce_sum(t.concat(terms));
             },
             watched);
  }
}

inline void full_model_case(std::vector<SuiteResult>& results, Rng& rng, EncoderMode mode,
                            const std::string& name) {
  Sentence sent = tiny_sentence();
  Corpus mini;
  mini.sentences = {sent};
  mini.role_labels = {"A0", "A1"};
  Vocabularies vocabs = build_vocabularies(mini, 1);

  ModelConfig cfg;
  cfg.features.word = true;
  cfg.features.pos = true;
  cfg.word_dim = 3;
  cfg.pos_dim = 2;
  cfg.tree_choice = TreeEncoderChoice::kGcn;
  cfg.tree_hidden = 3;
  cfg.gcn_layers = 1;
  cfg.encoder_mode = mode;
  cfg.lstm_hidden = 4;
  cfg.lstm_layers = 1;
  cfg.head_dim = 3;
  cfg.lang_dim = 2;
  cfg.alpha_p = 1.0;
  cfg.alpha_a = 1.0;
  cfg.dropout = 0.0;

  Rng init = rng.fork(106);
  SrlModel m = make_srl_model(cfg, vocabs, init);
  std::vector<Tensor> watched;
  for (const auto& [pname, tensor] : m.params.items()) watched.push_back(tensor);
  auto gold = derive_triplets(sent);
  run_case(results, name,
           [&](Tape& t) {
             Rng unused(0);
             ForwardOptions opt;
             auto scores = score_sentence(t, m, sent, nullptr, nullptr, opt, unused);
             Tensor loss = sentence_loss(t, m, scores, gold);
             return t.add(loss, unary_ranking_loss(t, scores, sent));
           },
           watched);
}

}  // namespace gradcheck_detail

// Runs the full finite-difference suite: every primitive at random points and
// one fixture per composite module.
inline std::vector<SuiteResult> run_gradient_suite(std::uint64_t seed = 12345) {
  std::vector<SuiteResult> results;
  Rng rng(seed);
  gradcheck_detail::primitive_cases(results, rng);
  gradcheck_detail::composite_cases(results, rng);
  gradcheck_detail::full_model_case(results, rng, EncoderMode::kBasic, "srl-loss-basic");
  gradcheck_detail::full_model_case(results, rng, EncoderMode::kPgn, "srl-loss-pgn");
  return results;
}

}  // namespace srl
