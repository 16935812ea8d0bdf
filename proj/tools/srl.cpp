// Command-line surface: synthetic data, high-order pretraining, training,
// evaluation, transfer matrices and the gradient-check suite.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "srl/checkpoint.hpp"
#include "srl/config.hpp"
#include "srl/gradcheck.hpp"
#include "srl/ho.hpp"
#include "srl/synth.hpp"
#include "srl/train.hpp"

namespace {

void apply_overrides(srl::ExperimentConfig& cfg, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    auto eq = kv.find('=');
    srl::require(eq != std::string::npos, "--set expects key=value, got \"", kv, "\"");
    cfg.set(srl::trim(kv.substr(0, eq)), srl::trim(kv.substr(eq + 1)));
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  srl::require(os.good(), "cannot open \"", path, "\" for writing");
  return os;
}

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string encoder, sources, target, tree;
  long long epochs = -1, seed = -1, batch_size = -1;
  double lr = -1, alpha_p = -1, alpha_a = -1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config file (key = value lines)");
    cmd->add_option("--set", sets, "override a config key, e.g. --set word_dim=64")
        ->take_all();
    cmd->add_option("--encoder", encoder, "encoder mode: pgn or basic");
    cmd->add_option("--sources", sources, "comma-separated source language codes");
    cmd->add_option("--target", target, "target language code");
    cmd->add_option("--tree", tree, "tree encoder: treelstm, gcn or none");
    cmd->add_option("--epochs", epochs, "training epochs (0 = 80 bilingual / 300 multi-source)");
    cmd->add_option("--seed", seed, "random seed (also honors SRL_SEED)");
    cmd->add_option("--batch-size", batch_size, "mini-batch size");
    cmd->add_option("--lr", lr, "Adam learning rate");
    cmd->add_option("--alpha-p", alpha_p, "predicate beam threshold");
    cmd->add_option("--alpha-a", alpha_a, "argument beam threshold");
  }

  srl::ExperimentConfig build() const {
    srl::ExperimentConfig cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    apply_overrides(cfg, sets);
    if (!encoder.empty()) cfg.set("encoder", encoder);
    if (!sources.empty()) cfg.set("sources", sources);
    if (!target.empty()) cfg.set("target", target);
    if (!tree.empty()) cfg.set("tree_encoder", tree);
    if (epochs >= 0) cfg.set("epochs", std::to_string(epochs));
    if (seed >= 0) cfg.set("seed", std::to_string(seed));
    if (batch_size >= 0) cfg.set("batch_size", std::to_string(batch_size));
    if (lr >= 0) cfg.set("lr", std::to_string(lr));
    if (alpha_p >= 0) cfg.set("alpha_p", std::to_string(alpha_p));
    if (alpha_a >= 0) cfg.set("alpha_a", std::to_string(alpha_a));
    return cfg;
  }
};

int cmd_synth(const srl::SynthOptions& opt, const std::string& out_path) {
  srl::Corpus corpus = srl::synth_corpus(opt);
  auto os = open_out(out_path);
  srl::serialize_conllu_plus(corpus, os);
  std::cerr << "wrote " << corpus.sentences.size() << " sentences to " << out_path << "\n";
  std::cerr << "language\tsentences\tpredicates\targuments\n";
  for (const auto& [lang, st] : corpus.stats)
    std::cerr << lang << '\t' << st.sentences << '\t' << st.predicates << '\t' << st.arguments
              << "\n";
  return 0;
}

int cmd_pretrain(const std::vector<std::string>& train_paths, const srl::PretrainOptions& opt,
                 const std::string& out_path) {
  std::vector<srl::Corpus> corpora;
  for (const auto& p : train_paths) corpora.push_back(srl::load_corpus_file(p));
  std::vector<const srl::Corpus*> ptrs;
  for (const auto& c : corpora) ptrs.push_back(&c);
  srl::PretrainedGnn pre = srl::pretrain_ho(ptrs, opt);
  srl::save_checkpoint(pre.params, out_path);
  srl::save_ho_vocab(pre.vocabs, out_path + ".vocab");
  double first = pre.loss_history.empty() ? 0 : pre.loss_history.front();
  double last = pre.loss_history.empty() ? 0 : pre.loss_history.back();
  std::cerr << "pretrained " << opt.steps << " steps; loss " << first << " -> " << last << "\n";
  std::cerr << "wrote " << out_path << " and " << out_path << ".vocab\n";
  return 0;
}

int cmd_train(const ConfigArgs& args, const std::string& out_path,
              const std::string& loss_log_path) {
  srl::ExperimentConfig cfg = args.build();
  srl::Session session = srl::open_session(cfg);
  srl::train(session);
  srl::save_checkpoint(session.model.params, out_path);
  if (!loss_log_path.empty()) {
    auto os = open_out(loss_log_path);
    os << "epoch\tmean_loss\n";
    for (std::size_t e = 0; e < session.epoch_losses.size(); ++e)
      os << e + 1 << '\t' << session.epoch_losses[e] << "\n";
  }
  std::cerr << "trained " << session.epoch_losses.size() << " epochs";
  if (!session.epoch_losses.empty())
    std::cerr << "; loss " << session.epoch_losses.front() << " -> "
              << session.epoch_losses.back();
  std::cerr << "; final-epoch beam oracle misses " << session.train_oracle_misses << "\n";
  std::cerr << "wrote " << out_path << "\n";
  return 0;
}

int cmd_eval(const ConfigArgs& args, const std::string& ckpt, const std::string& corpus_path,
             bool gold_predicates, const std::string& predictions_path,
             const std::string& report_path) {
  srl::ExperimentConfig cfg = args.build();
  srl::Session session = srl::open_session(cfg);
  srl::load_checkpoint(session.model.params, ckpt);

  std::string path = corpus_path;
  if (path.empty()) {
    srl::require(!cfg.target.empty() && cfg.eval_files.count(cfg.target),
                 "eval: no --corpus given and no eval.", cfg.target, " in the config");
    path = cfg.eval_files.at(cfg.target);
  }
  srl::Corpus corpus = srl::load_corpus_file(path);

  srl::EvalOptions opt;
  opt.gold_predicates = gold_predicates;
  srl::MetricsReport rep = srl::evaluate_corpus(session, corpus, opt);

  std::string source;
  for (const auto& lang : cfg.sources) source += (source.empty() ? "" : "+") + lang;
  std::string target = cfg.target.empty() ? "?" : cfg.target;
  std::string mode = gold_predicates ? "arg-labeling" : "end2end";
  if (report_path.empty()) {
    srl::write_report(rep, source, target, mode, std::cout);
  } else {
    auto os = open_out(report_path);
    srl::write_report(rep, source, target, mode, os);
  }
  if (!predictions_path.empty()) {
    auto os = open_out(predictions_path);
    srl::write_predictions(session, corpus, opt, os);
  }
  return 0;
}

int cmd_transfer(const ConfigArgs& args, const std::string& mode, const std::string& out_path) {
  srl::ExperimentConfig cfg = args.build();
  srl::TransferMatrix matrix = srl::run_transfer_matrix(cfg, mode);
  if (out_path.empty()) {
    matrix.serialize(std::cout);
  } else {
    auto os = open_out(out_path);
    matrix.serialize(os);
  }
  return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
  auto results = srl::run_gradient_suite(seed);
  double worst = 0.0;
  std::size_t checks = 0;
  for (const auto& r : results) {
    std::cout << r.name << "\tmax_rel_err=" << r.max_rel_err << "\tchecks=" << r.checks << "\n";
    worst = std::max(worst, r.max_rel_err);
    checks += r.checks;
  }
  std::cout << "total\tmax_rel_err=" << worst << "\tchecks=" << checks << "\n";
  if (worst > 1e-4) {
    std::cerr << "gradient check FAILED (max relative error " << worst << " > 1e-4)\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-lingual end-to-end semantic role labeling"};
  app.require_subcommand(1);

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "generate a synthetic CoNLL-U-plus corpus");
  srl::SynthOptions sopt;
  std::string synth_out;
  long long synth_seed = 7, synth_n = 50, synth_vocab = 100;
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--sentences", synth_n, "number of sentences");
  synth->add_option("--vocab", synth_vocab, "vocabulary size");
  synth->add_option("--profile", sopt.profile, "grammar profile (syntax-determined)");
  synth->add_option("--language", sopt.language, "language code");
  synth->add_option("--shared-frac", sopt.shared_vocab_frac,
                    "fraction of each POS sub-vocabulary shared across languages");
  synth->add_option("--out", synth_out, "output file")->required();

  // pretrain-ho
  auto* pre = app.add_subcommand("pretrain-ho", "pre-train the high-order feature GNN");
  std::vector<std::string> pre_train;
  srl::PretrainOptions popt;
  std::string pre_out;
  long long pre_steps = 2000, pre_seed = 1, pre_hidden = 350, pre_layers = 5;
  pre->add_option("--train", pre_train, "training corpora (repeatable)")
      ->required()
      ->take_all();
  pre->add_option("--steps", pre_steps, "optimizer steps");
  pre->add_option("--lr", popt.lr, "Adam learning rate");
  pre->add_option("--seed", pre_seed, "seed");
  pre->add_option("--hidden", pre_hidden, "GNN hidden size");
  pre->add_option("--layers", pre_layers, "GNN propagation layers");
  pre->add_option("--mask-rate", popt.gnn.mask_rate, "masked-node rate");
  pre->add_option("--neg-ratio", popt.gnn.negative_ratio, "negative sampling ratio");
  pre->add_option("--out", pre_out, "checkpoint path (vocab sidecar at <out>.vocab)")->required();

  // train
  auto* tr = app.add_subcommand("train", "train an SRL model");
  ConfigArgs train_args;
  train_args.attach(tr);
  std::string train_out, train_loss_log;
  tr->add_option("--out", train_out, "checkpoint output path")->required();
  tr->add_option("--loss-log", train_loss_log, "per-epoch loss TSV");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ConfigArgs eval_args;
  eval_args.attach(ev);
  std::string eval_ckpt, eval_corpus, eval_predictions, eval_report;
  bool gold_predicates = false;
  ev->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  ev->add_option("--corpus", eval_corpus, "evaluation corpus (default: eval.<target>)");
  ev->add_flag("--gold-predicates", gold_predicates,
               "argument-role labeling with gold predicates");
  ev->add_option("--predictions", eval_predictions, "triplet output file");
  ev->add_option("--report", eval_report, "metrics TSV (default: stdout)");

  // transfer-matrix
  auto* tm = app.add_subcommand("transfer-matrix", "train/evaluate a source-target grid");
  ConfigArgs tm_args;
  tm_args.attach(tm);
  std::string tm_mode = "bilingual", tm_out;
  tm->add_option("--mode", tm_mode, "bilingual or multi");
  tm->add_option("--out", tm_out, "matrix TSV (default: stdout)");

  // grad-check
  auto* gc = app.add_subcommand("grad-check", "run the finite-difference gradient suite");
  long long gc_seed = 12345;
  gc->add_option("--seed", gc_seed, "suite seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) {
      sopt.seed = static_cast<std::uint64_t>(synth_seed);
      sopt.n_sentences = static_cast<std::size_t>(synth_n);
      sopt.vocab_size = static_cast<std::size_t>(synth_vocab);
      return cmd_synth(sopt, synth_out);
    }
    if (pre->parsed()) {
      popt.steps = static_cast<std::size_t>(pre_steps);
      popt.seed = static_cast<std::uint64_t>(pre_seed);
      popt.gnn.hidden = static_cast<std::size_t>(pre_hidden);
      popt.gnn.layers = static_cast<std::size_t>(pre_layers);
      return cmd_pretrain(pre_train, popt, pre_out);
    }
    if (tr->parsed()) return cmd_train(train_args, train_out, train_loss_log);
    if (ev->parsed())
      return cmd_eval(eval_args, eval_ckpt, eval_corpus, gold_predicates, eval_predictions,
                      eval_report);
    if (tm->parsed()) return cmd_transfer(tm_args, tm_mode, tm_out);
    if (gc->parsed()) return cmd_gradcheck(static_cast<std::uint64_t>(gc_seed));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
