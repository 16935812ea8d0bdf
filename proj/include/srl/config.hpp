#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "srl/encoder.hpp"
#include "srl/tree.hpp"
#include "srl/util.hpp"

namespace srl {

// Line-oriented "key = value" experiment configuration; '#' starts a comment.
// CLI flags override file values through set(). SRL_SEED overrides the
// default seed when set in the environment.
struct ExperimentConfig {
  // data
  std::vector<std::string> sources;
  std::string target;
  std::map<std::string, std::string> train_files;  // language -> path
  std::map<std::string, std::string> eval_files;   // language -> path
  std::string context_vectors;                     // optional path
  std::string ho_checkpoint;                       // optional path (expects .vocab sidecar)

  // features
  bool use_word = true;
  bool use_lemma = false;
  std::string tree_encoder = "none";
  bool use_pos = true;

  // dimensions
  std::size_t word_dim = 300;
  std::size_t lemma_dim = 300;
  std::size_t pos_dim = 100;
  std::size_t tree_hidden = 300;
  std::size_t gcn_layers = 2;
  std::size_t lstm_hidden = 650;
  std::size_t lstm_layers = 2;
  std::size_t head_dim = 300;
  std::size_t lang_dim = 8;

  // encoder + training
  std::string encoder = "basic";
  double lr = 0.001;
  std::size_t batch_size = 30;
  std::size_t epochs = 0;  // 0: 80 bilingual / 300 multi-source
  double alpha_p = 0.4;
  double alpha_a = 0.7;
  double dropout = 0.3;
  std::uint64_t seed = 1;
  bool seed_set = false;
  std::size_t min_count = 1;
  bool freeze_embeddings = false;
  bool gold_beam_inject = false;
  double unary_loss_weight = 1.0;

  ExperimentConfig() {
    if (const char* env = std::getenv("SRL_SEED")) {
      try {
        seed = std::stoull(env);
      } catch (const std::exception&) {
        fail("config: SRL_SEED=\"", env, "\" is not an integer");
      }
    }
  }

  std::size_t effective_epochs() const {
    if (epochs > 0) return epochs;
    return sources.size() > 1 ? 300 : 80;
  }

  void set(const std::string& key, const std::string& value) {
    auto as_bool = [&]() {
      if (value == "true" || value == "1" || value == "yes") return true;
      if (value == "false" || value == "0" || value == "no") return false;
      fail("config: \"", key, "\" expects a boolean, got \"", value, "\"");
    };
    auto as_size = [&]() -> std::size_t {
      try {
        return std::stoull(value);
      } catch (const std::exception&) {
        fail("config: \"", key, "\" expects an integer, got \"", value, "\"");
      }
    };
    auto as_double = [&]() -> double {
      try {
        return std::stod(value);
      } catch (const std::exception&) {
        fail("config: \"", key, "\" expects a number, got \"", value, "\"");
      }
    };

    if (key == "sources") {
      sources.clear();
      for (auto& s : split(value, ',')) {
        std::string lang = trim(s);
        if (!lang.empty()) sources.push_back(lang);
      }
    } else if (key == "target") {
      target = value;
    } else if (key.rfind("train.", 0) == 0) {
      train_files[key.substr(6)] = value;
    } else if (key.rfind("eval.", 0) == 0) {
      eval_files[key.substr(5)] = value;
    } else if (key == "context_vectors") {
      context_vectors = value;
    } else if (key == "ho_checkpoint") {
      ho_checkpoint = value;
    } else if (key == "use_word") {
      use_word = as_bool();
    } else if (key == "use_lemma") {
      use_lemma = as_bool();
    } else if (key == "use_pos") {
      use_pos = as_bool();
    } else if (key == "tree_encoder") {
      parse_tree_encoder(value);  // validates
      tree_encoder = value;
    } else if (key == "word_dim") {
      word_dim = as_size();
    } else if (key == "lemma_dim") {
      lemma_dim = as_size();
    } else if (key == "pos_dim") {
      pos_dim = as_size();
    } else if (key == "tree_hidden") {
      tree_hidden = as_size();
    } else if (key == "gcn_layers") {
      gcn_layers = as_size();
    } else if (key == "lstm_hidden") {
      lstm_hidden = as_size();
    } else if (key == "lstm_layers") {
      lstm_layers = as_size();
    } else if (key == "head_dim") {
      head_dim = as_size();
    } else if (key == "lang_dim") {
      lang_dim = as_size();
    } else if (key == "encoder") {
      parse_encoder_mode(value);  // validates
      encoder = value;
    } else if (key == "lr") {
      lr = as_double();
    } else if (key == "batch_size") {
      batch_size = as_size();
    } else if (key == "epochs") {
      epochs = as_size();
    } else if (key == "alpha_p") {
      alpha_p = as_double();
    } else if (key == "alpha_a") {
      alpha_a = as_double();
    } else if (key == "dropout") {
      dropout = as_double();
    } else if (key == "seed") {
      seed = as_size();
      seed_set = true;
    } else if (key == "min_count") {
      min_count = as_size();
    } else if (key == "freeze_embeddings") {
      freeze_embeddings = as_bool();
    } else if (key == "gold_beam_inject") {
      gold_beam_inject = as_bool();
    } else if (key == "unary_loss_weight") {
      unary_loss_weight = as_double();
    } else {
      fail("config: unknown key \"", key, "\"");
    }
  }

  void load_file(const std::string& path) {
    std::ifstream is(path);
    require(is.good(), "config: cannot open \"", path, "\"");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      require(eq != std::string::npos, "config: expected key = value at ", path, ":", lineno);
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      try {
        set(key, value);
      } catch (const std::exception& e) {
        fail(e.what(), " (", path, ":", lineno, ")");
      }
    }
  }

  void validate_for_training() const {
    require(!sources.empty(), "config: no source languages configured");
    if (encoder == "basic")
      require(sources.size() == 1, "config: basic mode requires exactly 1 source language, got ",
              sources.size());
    for (const auto& lang : sources)
      require(train_files.count(lang), "config: missing train.", lang, " file");
    require(batch_size >= 1, "config: batch_size must be >= 1");
    require(alpha_p > 0.0 && alpha_p <= 1.0, "config: alpha_p outside (0, 1]");
    require(alpha_a > 0.0 && alpha_a <= 1.0, "config: alpha_a outside (0, 1]");
  }
};

}  // namespace srl
