#pragma once

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "srl/adam.hpp"
#include "srl/checkpoint.hpp"
#include "srl/config.hpp"
#include "srl/conllu.hpp"
#include "srl/ho.hpp"
#include "srl/metrics.hpp"
#include "srl/model.hpp"

namespace srl {

inline Corpus load_corpus_file(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), "corpus: cannot open \"", path, "\"");
  Corpus c = parse_conllu_plus(is);
  for (const auto& w : c.warnings) std::cerr << path << ": warning: " << w << "\n";
  return c;
}

// ---------------------------------------------------------------------------
// Pretrained high-order feature source: GNN checkpoint + vocab sidecar, with
// per-sentence extraction cached (features are frozen, so one pass suffices).

struct HoFeatureSource {
  Params params;
  GnnParams gnn;
  Vocabularies vocabs;
  std::map<std::string, std::vector<std::vector<double>>> cache;

  static HoFeatureSource load(const std::string& ckpt_path) {
    HoFeatureSource src;
    src.vocabs = load_ho_vocab(ckpt_path + ".vocab");
    auto groups = read_checkpoint(ckpt_path);
    GnnConfig config;
    config.layers = 0;
    for (const auto& g : groups) {
      if (g.name == "ho.emb.word") config.hidden = g.shape.at(1);
      if (g.name.rfind("ho.l", 0) == 0 && g.name.find(".Wself") != std::string::npos)
        ++config.layers;
    }
    require(config.hidden > 0 && config.layers > 0, "ho checkpoint: \"", ckpt_path,
            "\" does not look like a pretrained GNN");
    Rng rng(0);
    src.gnn = make_gnn(src.params, src.vocabs, config, rng);
    load_checkpoint(src.params, ckpt_path);
    return src;
  }

  const std::vector<std::vector<double>>& features_for(const Sentence& s) {
    auto it = cache.find(s.sentence_id);
    if (it == cache.end())
      it = cache.emplace(s.sentence_id, extract_ho(s, gnn, vocabs)).first;
    require(it->second.size() == s.size(), "ho features: cached size mismatch for \"",
            s.sentence_id, "\"");
    return it->second;
  }
};

// ---------------------------------------------------------------------------
// A training/evaluation session: resources, model, optimizer.

struct Session {
  ExperimentConfig cfg;
  std::map<std::string, Corpus> train_corpora;  // by source language
  std::optional<ContextVectorStore> ctx;
  std::optional<HoFeatureSource> ho;
  SrlModel model;
  std::vector<double> epoch_losses;
  std::size_t train_oracle_misses = 0;

  const ContextVectorStore* ctx_ptr() const { return ctx ? &*ctx : nullptr; }

  const std::vector<std::vector<double>>* ho_features(const Sentence& s) {
    if (!ho) return nullptr;
    return &ho->features_for(s);
  }
};

inline ModelConfig model_config_from(const ExperimentConfig& cfg, std::size_t context_dim,
                                     std::size_t ho_dim) {
  ModelConfig mc;
  mc.features.word = cfg.use_word;
  mc.features.lemma = cfg.use_lemma;
  mc.features.context = !cfg.context_vectors.empty();
  mc.features.pos = cfg.use_pos;
  mc.tree_choice = parse_tree_encoder(cfg.tree_encoder);
  mc.encoder_mode = parse_encoder_mode(cfg.encoder);
  mc.word_dim = cfg.word_dim;
  mc.lemma_dim = cfg.lemma_dim;
  mc.pos_dim = cfg.pos_dim;
  mc.context_dim = context_dim;
  mc.ho_dim = ho_dim;
  mc.tree_hidden = cfg.tree_hidden;
  mc.gcn_layers = cfg.gcn_layers;
  mc.lstm_hidden = cfg.lstm_hidden;
  mc.lstm_layers = cfg.lstm_layers;
  mc.head_dim = cfg.head_dim;
  mc.lang_dim = cfg.lang_dim;
  mc.alpha_p = cfg.alpha_p;
  mc.alpha_a = cfg.alpha_a;
  mc.dropout = cfg.dropout;
  mc.freeze_embeddings = cfg.freeze_embeddings;
  return mc;
}

// Loads corpora and feature resources, then builds the model. All enabled
// resources must load cleanly before any training starts.
inline Session open_session(const ExperimentConfig& cfg) {
  cfg.validate_for_training();
  Session s;
  s.cfg = cfg;
  for (const auto& lang : cfg.sources)
    s.train_corpora[lang] = load_corpus_file(cfg.train_files.at(lang));

  std::size_t context_dim = 0;
  if (!cfg.context_vectors.empty()) {
    std::ifstream is(cfg.context_vectors);
    require(is.good(), "context vectors: cannot open \"", cfg.context_vectors, "\"");
    s.ctx = ContextVectorStore::parse(is);
    context_dim = s.ctx->dim();
  }
  std::size_t ho_dim = 0;
  if (!cfg.ho_checkpoint.empty()) {
    s.ho = HoFeatureSource::load(cfg.ho_checkpoint);
    ho_dim = s.ho->gnn.config.hidden;
  }

  std::vector<const Corpus*> sources;
  for (const auto& lang : cfg.sources) sources.push_back(&s.train_corpora.at(lang));
  Vocabularies vocabs = build_vocabularies(sources, cfg.min_count);
  Rng init_rng = Rng(cfg.seed).fork(10);
  s.model = make_srl_model(model_config_from(cfg, context_dim, ho_dim), vocabs, init_rng);
  return s;
}

// ---------------------------------------------------------------------------
// Training loop: shuffled mini-batches (languages mixed freely), summed
// relation loss plus the unary ranking term, Adam updates, no early stopping.

inline void train(Session& s) {
  std::vector<std::pair<std::string, std::size_t>> index;  // (language, sentence position)
  for (const auto& [lang, corpus] : s.train_corpora)
    for (std::size_t i = 0; i < corpus.sentences.size(); ++i) index.push_back({lang, i});
  require(!index.empty(), "train: no sentences");

  AdamState adam(s.cfg.lr);
  Rng shuffle_rng = Rng(s.cfg.seed).fork(20);
  Rng dropout_rng = Rng(s.cfg.seed).fork(21);
  std::size_t epochs = s.cfg.effective_epochs();

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    shuffle_rng.shuffle(index);
    double epoch_loss = 0.0;
    std::size_t epoch_misses = 0;
    for (std::size_t start = 0; start < index.size(); start += s.cfg.batch_size) {
      std::size_t end = std::min(index.size(), start + s.cfg.batch_size);
      double inv_batch = 1.0 / static_cast<double>(end - start);
      s.model.params.zero_grad();
      for (std::size_t bi = start; bi < end; ++bi) {
        const Sentence& sent = s.train_corpora.at(index[bi].first).sentences[index[bi].second];
        Tape tape;
        ForwardOptions opt;
        opt.training = true;
        opt.gold_beam_inject = s.cfg.gold_beam_inject;
        auto scores =
            score_sentence(tape, s.model, sent, s.ctx_ptr(), s.ho_features(sent), opt, dropout_rng);
        epoch_misses += scores.oracle_misses;
        Tensor loss = sentence_loss(tape, s.model, scores, derive_triplets(sent));
        if (s.cfg.unary_loss_weight > 0.0) {
          Tensor aux = tape.affine(unary_ranking_loss(tape, scores, sent),
                                   s.cfg.unary_loss_weight, 0.0);
          loss = tape.add(loss, aux);
        }
        epoch_loss += loss.item();
        tape.backward(tape.affine(loss, inv_batch, 0.0));
      }
      adam.step(s.model.params);
    }
    s.epoch_losses.push_back(epoch_loss / static_cast<double>(index.size()));
    s.train_oracle_misses = epoch_misses;
  }
}

// ---------------------------------------------------------------------------
// Evaluation.

struct EvalOptions {
  bool gold_predicates = false;
  double alpha_p = -1.0;  // < 0: model default
  double alpha_a = -1.0;
};

inline MetricsReport evaluate_corpus(Session& s, const Corpus& corpus, const EvalOptions& opt) {
  std::set<TripletRecord> gold, predicted;
  std::size_t misses = 0;
  for (const auto& sent : corpus.sentences) {
    for (const auto& [p, a, role] : derive_triplets(sent))
      gold.insert({sent.sentence_id, p, a, role});
    Tape tape(false);
    Rng unused(0);
    ForwardOptions fopt;
    fopt.training = false;
    fopt.gold_predicates = opt.gold_predicates;
    fopt.alpha_p = opt.alpha_p;
    fopt.alpha_a = opt.alpha_a;
    auto scores =
        score_sentence(tape, s.model, sent, s.ctx_ptr(), s.ho_features(sent), fopt, unused);
    misses += scores.oracle_misses;
    for (const auto& tri : decode_scores(s.model, scores))
      predicted.insert({sent.sentence_id, tri.predicate, tri.argument, tri.role});
  }
  MetricsReport rep = score_triplets(gold, predicted);
  rep.oracle_misses = misses;
  return rep;
}

inline void write_predictions(Session& s, const Corpus& corpus, const EvalOptions& opt,
                              std::ostream& out) {
  for (const auto& sent : corpus.sentences) {
    Tape tape(false);
    Rng unused(0);
    ForwardOptions fopt;
    fopt.gold_predicates = opt.gold_predicates;
    fopt.alpha_p = opt.alpha_p;
    fopt.alpha_a = opt.alpha_a;
    auto scores =
        score_sentence(tape, s.model, sent, s.ctx_ptr(), s.ho_features(sent), fopt, unused);
    for (const auto& tri : decode_scores(s.model, scores))
      out << sent.sentence_id << '\t' << tri.predicate << '\t' << tri.argument << '\t' << tri.role
          << '\t' << tri.score << "\n";
  }
}

// Fraction of gold (p, a) pairs whose endpoints both survive the beams.
inline double beam_oracle_recall(Session& s, const Corpus& corpus, double alpha_p,
                                 double alpha_a) {
  std::size_t total = 0, kept = 0;
  for (const auto& sent : corpus.sentences) {
    Tape tape(false);
    Rng unused(0);
    ForwardOptions opt;
    opt.alpha_p = alpha_p;
    opt.alpha_a = alpha_a;
    auto scores = score_sentence(tape, s.model, sent, s.ctx_ptr(), s.ho_features(sent), opt,
                                 unused);
    auto gold = derive_triplets(sent);
    total += gold.size();
    kept += gold.size() - scores.oracle_misses;
  }
  return total == 0 ? 1.0 : static_cast<double>(kept) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Transfer matrix: bilingual mode trains one BASIC model per source and
// evaluates every other language; multi-source mode trains one PGN model per
// target on all remaining languages.

inline TransferMatrix run_transfer_matrix(const ExperimentConfig& base, const std::string& mode) {
  require(mode == "bilingual" || mode == "multi", "transfer matrix: unknown mode \"", mode, "\"");
  std::vector<std::string> langs;
  for (const auto& [lang, path] : base.train_files) langs.push_back(lang);
  require(langs.size() >= 2, "transfer matrix: need at least 2 languages, got ", langs.size());
  for (const auto& lang : langs)
    require(base.eval_files.count(lang), "transfer matrix: missing eval.", lang, " file");

  TransferMatrix matrix;
  auto run_cell = [&](const ExperimentConfig& cfg, const std::string& source_name,
                      const std::string& target) {
    try {
      Session s = open_session(cfg);
      train(s);
      Corpus eval_corpus = load_corpus_file(base.eval_files.at(target));
      MetricsReport rep = evaluate_corpus(s, eval_corpus, {});
      matrix.cells.push_back({source_name, target, mode, rep.micro.precision(),
                              rep.micro.recall(), rep.micro.f1()});
    } catch (const std::exception& e) {
      fail("transfer matrix: cell (", source_name, " -> ", target, ") failed: ", e.what());
    }
  };

  if (mode == "bilingual") {
    for (const auto& src : langs) {
      ExperimentConfig cfg = base;
      cfg.sources = {src};
      cfg.encoder = "basic";
      std::optional<Session> s;
      try {
        s.emplace(open_session(cfg));
        train(*s);
      } catch (const std::exception& e) {
        fail("transfer matrix: row (", src, " -> *) failed: ", e.what());
      }
      for (const auto& tgt : langs) {
        if (tgt == src) continue;
        try {
          Corpus eval_corpus = load_corpus_file(base.eval_files.at(tgt));
          MetricsReport rep = evaluate_corpus(*s, eval_corpus, {});
          matrix.cells.push_back(
              {src, tgt, mode, rep.micro.precision(), rep.micro.recall(), rep.micro.f1()});
        } catch (const std::exception& e) {
          fail("transfer matrix: cell (", src, " -> ", tgt, ") failed: ", e.what());
        }
      }
    }
  } else {
    for (const auto& tgt : langs) {
      ExperimentConfig cfg = base;
      cfg.sources.clear();
      for (const auto& lang : langs)
        if (lang != tgt) cfg.sources.push_back(lang);
      cfg.target = tgt;
      cfg.encoder = "pgn";
      run_cell(cfg, "rest", tgt);
    }
  }
  return matrix;
}

}  // namespace srl
