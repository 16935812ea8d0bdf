#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "srl/synth.hpp"
#include "srl/train.hpp"

using namespace srl;

TEST_CASE("config files parse key = value lines with comments and overrides") {
  std::string path = "cfg_test.cfg";
  {
    std::ofstream os(path);
    os << "# a comment\n"
       << "sources = en, de\n"
       << "target = fr\n"
       << "train.en = data/en.conllu\n"
       << "word_dim = 64   # trailing comment\n"
       << "alpha_p = 0.4\n"
       << "encoder = pgn\n";
  }
  ExperimentConfig cfg;
  cfg.load_file(path);
  CHECK(cfg.sources == std::vector<std::string>{"en", "de"});
  CHECK(cfg.target == "fr");
  CHECK(cfg.train_files.at("en") == "data/en.conllu");
  CHECK(cfg.word_dim == 64);
  CHECK(cfg.encoder == "pgn");
  cfg.set("word_dim", "32");  // flag override wins
  CHECK(cfg.word_dim == 32);
  CHECK_THROWS_WITH(cfg.set("wordd_dim", "1"), Catch::Matchers::ContainsSubstring("unknown key"));
  CHECK_THROWS_WITH(cfg.set("encoder", "moe"), Catch::Matchers::ContainsSubstring("unknown mode"));
  std::remove(path.c_str());
}

TEST_CASE("SRL_SEED seeds the default and explicit seeds win") {
  setenv("SRL_SEED", "4242", 1);
  ExperimentConfig cfg;
  CHECK(cfg.seed == 4242);
  cfg.set("seed", "7");
  CHECK(cfg.seed == 7);
  unsetenv("SRL_SEED");
}

TEST_CASE("basic mode requires exactly one source; pgn needs at least one") {
  ExperimentConfig cfg;
  cfg.set("encoder", "basic");
  cfg.set("sources", "en,de");
  cfg.set("train.en", "x");
  cfg.set("train.de", "y");
  CHECK_THROWS_WITH(cfg.validate_for_training(),
                    Catch::Matchers::ContainsSubstring("exactly 1 source"));
  ExperimentConfig cfg2;
  cfg2.set("encoder", "pgn");
  CHECK_THROWS_WITH(cfg2.validate_for_training(),
                    Catch::Matchers::ContainsSubstring("no source languages"));
}

TEST_CASE("default epochs: 80 bilingual, 300 multi-source") {
  ExperimentConfig cfg;
  cfg.set("sources", "en");
  CHECK(cfg.effective_epochs() == 80);
  cfg.set("sources", "en,de");
  CHECK(cfg.effective_epochs() == 300);
  cfg.set("epochs", "5");
  CHECK(cfg.effective_epochs() == 5);
}

// ---------------------------------------------------------------------------
// Metrics.

static std::set<TripletRecord> as_set(std::vector<TripletRecord> v) {
  return {v.begin(), v.end()};
}

TEST_CASE("metric formulas on the trivial cases") {
  auto gold = as_set({{"s1", 2, 1, "A0"}, {"s1", 2, 3, "A1"}});
  MetricsReport perfect = score_triplets(gold, gold);
  CHECK(perfect.micro.precision() == 100.0);
  CHECK(perfect.micro.recall() == 100.0);
  CHECK(perfect.micro.f1() == 100.0);

  auto half = as_set({{"s1", 2, 1, "A0"}, {"s1", 2, 3, "A2"}});
  MetricsReport fifty = score_triplets(gold, half);
  CHECK(fifty.micro.precision() == 50.0);
  CHECK(fifty.micro.recall() == 50.0);
  CHECK(fifty.micro.f1() == 50.0);

  MetricsReport empty = score_triplets(gold, {});
  CHECK(empty.micro.precision() == 0.0);
  CHECK(empty.micro.recall() == 0.0);
  CHECK(empty.micro.f1() == 0.0);
}

TEST_CASE("metrics equal an independent set-intersection scorer on random cases") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    std::set<TripletRecord> gold, pred;
    const char* roles[3] = {"A0", "A1", "AM-TMP"};
    for (int i = 0; i < 30; ++i) {
      TripletRecord r{strf("s", rng.below(5)), rng.below(9) + 1, rng.below(9) + 1,
                      roles[rng.below(3)]};
      if (rng.bernoulli(0.5)) gold.insert(r);
      if (rng.bernoulli(0.5)) pred.insert(r);
    }
    MetricsReport rep = score_triplets(gold, pred);
    std::size_t inter = 0;
    for (const auto& p : pred) inter += gold.count(p);
    double P = pred.empty() ? 0.0 : 100.0 * inter / pred.size();
    double R = gold.empty() ? 0.0 : 100.0 * inter / gold.size();
    double F = (P + R == 0) ? 0.0 : 2 * P * R / (P + R);
    CHECK(rep.micro.precision() == Catch::Approx(P).margin(1e-12));
    CHECK(rep.micro.recall() == Catch::Approx(R).margin(1e-12));
    CHECK(rep.micro.f1() == Catch::Approx(F).margin(1e-12));
  }
}

TEST_CASE("distance buckets partition all gold triplets exactly once") {
  Rng rng(31);
  std::set<TripletRecord> gold;
  const char* roles[2] = {"A0", "A1"};
  for (int i = 0; i < 200; ++i)
    gold.insert({strf("s", rng.below(20)), rng.below(12) + 1, rng.below(12) + 1,
                 roles[rng.below(2)]});
  MetricsReport rep = score_triplets(gold, {});
  std::size_t total = 0;
  for (std::size_t b = 0; b < kDistanceBuckets; ++b) total += rep.by_distance[b].gold;
  CHECK(total == gold.size());
  CHECK(distance_bucket(3, 3) == 0);
  CHECK(distance_bucket(3, 4) == 1);
  CHECK(distance_bucket(9, 2) == 5);
}

TEST_CASE("transfer matrix TSV round-trip is idempotent") {
  TransferMatrix m;
  m.cells.push_back({"en", "de", "bilingual", 50.04, 42.16, 45.7});
  m.cells.push_back({"de", "fr", "bilingual", 33.333, 66.666, 44.4});
  std::string once = m.serialize();
  TransferMatrix parsed = TransferMatrix::parse(once);
  CHECK(parsed.serialize() == once);
  REQUIRE(parsed.cells.size() == 2);
  CHECK(parsed.cells[0].source == "en");
  CHECK(parsed.cells[0].f1 == Catch::Approx(45.7));
}

// ---------------------------------------------------------------------------
// End-to-end smoke on a small synthetic setup.

static ExperimentConfig smoke_config(const std::string& dir, std::uint64_t seed) {
  SynthOptions so;
  so.seed = 19;
  so.n_sentences = 14;
  so.vocab_size = 40;
  so.language = "aa";
  Corpus c = synth_corpus(so);
  std::ofstream os(dir + "/aa.conllu");
  serialize_conllu_plus(c, os);

  ExperimentConfig cfg;
  cfg.set("sources", "aa");
  cfg.set("target", "aa");
  cfg.set("train.aa", dir + "/aa.conllu");
  cfg.set("eval.aa", dir + "/aa.conllu");
  cfg.set("encoder", "basic");
  cfg.set("tree_encoder", "gcn");
  cfg.set("word_dim", "12");
  cfg.set("pos_dim", "6");
  cfg.set("tree_hidden", "8");
  cfg.set("gcn_layers", "1");
  cfg.set("lstm_hidden", "10");
  cfg.set("lstm_layers", "1");
  cfg.set("head_dim", "8");
  cfg.set("epochs", "10");
  cfg.set("batch_size", "4");
  cfg.set("dropout", "0.1");
  cfg.set("seed", std::to_string(seed));
  return cfg;
}

TEST_CASE("training drops the loss and a second identical run is bitwise identical") {
  std::string dir = ".";
  ExperimentConfig cfg = smoke_config(dir, 5);

  Session s1 = open_session(cfg);
  train(s1);
  REQUIRE(s1.epoch_losses.size() == 10);
  CHECK(s1.epoch_losses[9] < s1.epoch_losses[0]);

  Session s2 = open_session(cfg);
  train(s2);
  save_checkpoint(s1.model.params, "det_a.ckpt");
  save_checkpoint(s2.model.params, "det_b.ckpt");
  std::ifstream f1("det_a.ckpt", std::ios::binary), f2("det_b.ckpt", std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  std::remove("det_a.ckpt");
  std::remove("det_b.ckpt");

  Corpus eval_c = load_corpus_file(cfg.train_files.at("aa"));
  MetricsReport r1 = evaluate_corpus(s1, eval_c, {});
  MetricsReport r2 = evaluate_corpus(s2, eval_c, {});
  CHECK(r1.micro.precision() == r2.micro.precision());
  CHECK(r1.micro.recall() == r2.micro.recall());

  // Argument labeling with gold predicates on the training fixture scores at
  // least as well as end-to-end.
  EvalOptions gp;
  gp.gold_predicates = true;
  MetricsReport ra = evaluate_corpus(s1, eval_c, gp);
  CHECK(ra.micro.f1() >= r1.micro.f1() - 1e-9);

  // Beam oracle recall is monotone in alpha.
  double prev = -1.0;
  for (double alpha : {0.2, 0.4, 0.7, 1.0}) {
    double rec = beam_oracle_recall(s1, eval_c, alpha, alpha);
    CHECK(rec >= prev - 1e-12);
    prev = rec;
  }
  CHECK(prev == 1.0);  // alpha = 1 keeps everything

  std::remove((dir + "/aa.conllu").c_str());
}

TEST_CASE("stock dimensions: word 300 plus pos 100 give a 400-dim input") {
  ExperimentConfig cfg;
  CHECK(cfg.word_dim == 300);
  CHECK(cfg.pos_dim == 100);
  CHECK(cfg.tree_hidden == 300);
  CHECK(cfg.lstm_hidden == 650);
  CHECK(cfg.batch_size == 30);
  CHECK(cfg.lr == 0.001);
  ModelConfig mc = model_config_from(cfg, 0, 0);
  CHECK(mc.base_input_dim() == 400);
}

TEST_CASE("the null logit stays pinned to zero after training") {
  ExperimentConfig cfg = smoke_config(".", 8);
  cfg.set("epochs", "6");
  Session s = open_session(cfg);
  train(s);
  const Sentence& sent = s.train_corpora.at("aa").sentences[0];
  Tape t(false);
  Rng unused(0);
  auto sc = score_sentence(t, s.model, sent, nullptr, nullptr, {}, unused);
  for (const auto& row : sc.logits)
    for (const auto& logits : row) CHECK(logits.vals()[0] == 0.0);
  std::remove("./aa.conllu");
}

TEST_CASE("per-label reports carry a row for every gold role present") {
  ExperimentConfig cfg = smoke_config(".", 9);
  cfg.set("epochs", "2");
  Session s = open_session(cfg);
  train(s);
  Corpus c = load_corpus_file(cfg.train_files.at("aa"));
  MetricsReport rep = evaluate_corpus(s, c, {});
  std::set<std::string> gold_roles;
  for (const auto& sent : c.sentences)
    for (const auto& [p, a, role] : derive_triplets(sent)) gold_roles.insert(role);
  for (const auto& role : gold_roles) {
    INFO(role);
    CHECK(rep.per_label.count(role) == 1);
  }
  CHECK(gold_roles.count("A0") == 1);
  std::remove("./aa.conllu");
}

static void write_matrix_fixture(const std::string& lang, std::uint64_t seed) {
  SynthOptions so;
  so.seed = seed;
  so.n_sentences = 8;
  so.vocab_size = 30;
  so.language = lang;
  Corpus c = synth_corpus(so);
  std::ofstream os(lang + "_tm.conllu");
  serialize_conllu_plus(c, os);
}

TEST_CASE("transfer matrix: 3 languages give 6 bilingual cells and 3 multi cells") {
  for (auto [lang, seed] : {std::pair<const char*, std::uint64_t>{"ta", 41},
                            {"tb", 42},
                            {"tc", 43}}) {
    write_matrix_fixture(lang, seed);
  }
  ExperimentConfig base;
  base.set("epochs", "2");
  base.set("batch_size", "4");
  base.set("word_dim", "8");
  base.set("pos_dim", "4");
  base.set("tree_encoder", "none");
  base.set("lstm_hidden", "6");
  base.set("lstm_layers", "1");
  base.set("head_dim", "6");
  base.set("lang_dim", "2");
  base.set("dropout", "0.0");
  base.set("seed", "2");
  for (const char* lang : {"ta", "tb", "tc"}) {
    base.set(strf("train.", lang), strf(lang, "_tm.conllu"));
    base.set(strf("eval.", lang), strf(lang, "_tm.conllu"));
  }

  TransferMatrix bi = run_transfer_matrix(base, "bilingual");
  CHECK(bi.cells.size() == 6);
  for (const auto& cell : bi.cells) CHECK(cell.source != cell.target);

  TransferMatrix multi = run_transfer_matrix(base, "multi");
  CHECK(multi.cells.size() == 3);
  for (const auto& cell : multi.cells) CHECK(cell.source == "rest");

  // A failing cell aborts with the cell named.
  {
    std::ofstream os("tc_tm.conllu");
    os << "garbage\n";
  }
  CHECK_THROWS_WITH(run_transfer_matrix(base, "bilingual"),
                    Catch::Matchers::ContainsSubstring("cell (") &&
                        Catch::Matchers::ContainsSubstring("tc"));
  for (const char* lang : {"ta", "tb", "tc"}) std::remove(strf(lang, "_tm.conllu").c_str());
}

TEST_CASE("missing feature resources are rejected before training") {
  ExperimentConfig cfg;
  cfg.set("sources", "aa");
  cfg.set("train.aa", "no_such_file.conllu");
  cfg.set("encoder", "basic");
  CHECK_THROWS_WITH(open_session(cfg), Catch::Matchers::ContainsSubstring("no_such_file"));
}

TEST_CASE("predictions are written one triplet per line") {
  std::string dir = ".";
  ExperimentConfig cfg = smoke_config(dir, 6);
  cfg.set("epochs", "3");
  Session s = open_session(cfg);
  train(s);
  Corpus eval_c = load_corpus_file(cfg.train_files.at("aa"));
  std::ostringstream out;
  write_predictions(s, eval_c, {}, out);
  std::istringstream in(out.str());
  std::string line;
  while (std::getline(in, line)) {
    auto cols = split(line, '\t');
    REQUIRE(cols.size() == 5);
    CHECK(cols[0].rfind("aa-", 0) == 0);
    CHECK(std::stoul(cols[1]) >= 1);
    CHECK(std::stoul(cols[2]) >= 1);
  }
  std::remove((dir + "/aa.conllu").c_str());
}
