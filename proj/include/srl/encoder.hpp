#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "srl/params.hpp"
#include "srl/tensor.hpp"

namespace srl {

// ---------------------------------------------------------------------------
// Flattened BiLSTM parameter schedule. Block order is part of the checkpoint
// contract: for each layer, for each direction (fwd then bwd): input weights
// for gates (input, forget, output, cell), then recurrent weights in the same
// gate order, then biases in the same gate order.

struct LayoutBlock {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

struct BiLstmLayout {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  std::size_t layers = 0;
  std::vector<LayoutBlock> blocks;
  std::size_t total = 0;

  static BiLstmLayout build(std::size_t input_dim, std::size_t hidden, std::size_t layers) {
    require(layers >= 1, "bilstm layout: layer count must be >= 1");
    BiLstmLayout lay;
    lay.input_dim = input_dim;
    lay.hidden = hidden;
    lay.layers = layers;
    static const char* kGate[4] = {"i", "f", "o", "c"};
    std::size_t off = 0;
    auto push = [&](const std::string& name, std::vector<std::size_t> shape) {
      LayoutBlock b;
      b.name = name;
      b.shape = std::move(shape);
      b.offset = off;
      b.size = 1;
      for (std::size_t d : b.shape) b.size *= d;
      off += b.size;
      lay.blocks.push_back(std::move(b));
    };
    for (std::size_t l = 0; l < layers; ++l) {
      std::size_t in = l == 0 ? input_dim : 2 * hidden;
      for (const char* dir : {"fwd", "bwd"}) {
        std::string base = strf("l", l, ".", dir, ".");
        for (const char* g : kGate) push(base + "W" + g, {hidden, in});
        for (const char* g : kGate) push(base + "U" + g, {hidden, hidden});
        for (const char* g : kGate) push(base + "b" + g, {hidden});
      }
    }
    lay.total = off;
    return lay;
  }
};

struct LstmCell {
  Tensor Wi, Wf, Wo, Wc;
  Tensor Ui, Uf, Uo, Uc;
  Tensor bi, bf, bo, bc;
};

// One value vector laid out per BiLstmLayout: Glorot-uniform weights (scaled
// by `weight_scale`), zero biases except the forget-gate bias at 1.0.
inline std::vector<double> init_lstm_flat(const BiLstmLayout& layout, Rng& rng,
                                          double weight_scale) {
  std::vector<double> v(layout.total, 0.0);
  for (const auto& b : layout.blocks) {
    bool is_bias = b.shape.size() == 1;
    if (is_bias) {
      if (b.name.size() >= 2 && b.name.substr(b.name.size() - 2) == "bf")
        std::fill(v.begin() + b.offset, v.begin() + b.offset + b.size, 1.0);
      continue;
    }
    double a = weight_scale * std::sqrt(6.0 / static_cast<double>(b.shape[0] + b.shape[1]));
    for (std::size_t i = 0; i < b.size; ++i) v[b.offset + i] = rng.uniform(-a, a);
  }
  return v;
}

enum class EncoderMode { kBasic, kPgn };

inline EncoderMode parse_encoder_mode(const std::string& name) {
  if (name == "basic") return EncoderMode::kBasic;
  if (name == "pgn") return EncoderMode::kPgn;
  fail("encoder: unknown mode \"", name, "\" (expected pgn or basic)");
}

struct EncoderParams {
  EncoderMode mode = EncoderMode::kBasic;
  BiLstmLayout layout;
  // PGN mode: the full flattened cell-parameter vector is W_pgn * e_lang.
  Tensor W_pgn;      // total x d_lang
  Tensor lang_emb;   // n_languages x d_lang
  // Basic mode: directly owned blocks, one tensor per layout block.
  std::vector<Tensor> basic_blocks;
};

inline EncoderParams make_encoder(Params& params, EncoderMode mode, std::size_t input_dim,
                                  std::size_t hidden, std::size_t layers, std::size_t n_languages,
                                  std::size_t lang_dim, Rng& rng) {
  EncoderParams enc;
  enc.mode = mode;
  enc.layout = BiLstmLayout::build(input_dim, hidden, layers);
  if (mode == EncoderMode::kBasic) {
    for (const auto& b : enc.layout.blocks) {
      Tensor t = Tensor::zeros(b.shape);
      enc.basic_blocks.push_back(params.add("enc.basic." + b.name, t));
    }
    auto flat = init_lstm_flat(enc.layout, rng, 1.0);
    for (std::size_t i = 0; i < enc.layout.blocks.size(); ++i) {
      const auto& b = enc.layout.blocks[i];
      std::copy(flat.begin() + b.offset, flat.begin() + b.offset + b.size,
                enc.basic_blocks[i].vals().begin());
    }
  } else {
    require(n_languages >= 1, "encoder: pgn mode requires at least one language");
    require(lang_dim >= 1, "encoder: language embedding dim must be >= 1");
    // Each column is an independently drawn full init vector; language rows
    // average them with weights summing to ~1, so generated parameters keep
    // the init scale and the generated forget bias stays near 1.
    Tensor W = Tensor::zeros({enc.layout.total, lang_dim});
    for (std::size_t k = 0; k < lang_dim; ++k) {
      auto flat = init_lstm_flat(enc.layout, rng, std::sqrt(static_cast<double>(lang_dim)));
      for (std::size_t r = 0; r < enc.layout.total; ++r) W.vals()[r * lang_dim + k] = flat[r];
    }
    enc.W_pgn = params.add("enc.pgn.W", W);
    Tensor E = Tensor::zeros({n_languages, lang_dim});
    for (auto& v : E.vals())
      v = (1.0 + rng.uniform(-0.5, 0.5)) / static_cast<double>(lang_dim);
    enc.lang_emb = params.add("enc.lang.E", E);
  }
  return enc;
}

// V_lang = W_pgn * e_lang; gradient flows into both factors.
inline Tensor generate_params(Tape& t, const EncoderParams& enc, std::size_t language_id) {
  require(enc.mode == EncoderMode::kPgn, "encoder: generate_params requires pgn mode");
  require(language_id < enc.lang_emb.dim(0), "encoder: unknown language id ", language_id);
  return t.matmul(enc.W_pgn, t.lookup(enc.lang_emb, language_id));
}

// Mean of the trained language rows; stand-in embedding for a language the
// table does not know (multi-source transfer to an unseen target).
inline Tensor mean_language_vector(const EncoderParams& enc) {
  require(enc.mode == EncoderMode::kPgn, "encoder: no language table in basic mode");
  std::size_t n = enc.lang_emb.dim(0);
  std::size_t d = enc.lang_emb.dim(1);
  Tensor e = Tensor::zeros({d});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) e.vals()[j] += enc.lang_emb.vals()[r * d + j];
  for (auto& v : e.vals()) v /= static_cast<double>(n);
  return e;
}

namespace encoder_detail {

inline std::vector<LstmCell> unflatten(Tape& t, const BiLstmLayout& layout, const Tensor& flat) {
  require(flat.rank() == 1 && flat.dim(0) == layout.total, "encoder: flattened vector ",
          shape_str(flat.shape()), " does not match layout length [", layout.total, "]");
  std::vector<LstmCell> cells;
  for (std::size_t i = 0; i < layout.blocks.size(); i += 12) {
    LstmCell c;
    Tensor* slots[12] = {&c.Wi, &c.Wf, &c.Wo, &c.Wc, &c.Ui, &c.Uf, &c.Uo, &c.Uc,
                         &c.bi, &c.bf, &c.bo, &c.bc};
    for (std::size_t k = 0; k < 12; ++k) {
      const auto& b = layout.blocks[i + k];
      Tensor piece = t.slice(flat, b.offset, b.size);
      *slots[k] = b.shape.size() == 1 ? piece : t.reshape(piece, b.shape);
    }
    cells.push_back(std::move(c));
  }
  return cells;
}

inline std::vector<LstmCell> basic_cells(const EncoderParams& enc) {
  std::vector<LstmCell> cells;
  for (std::size_t i = 0; i < enc.layout.blocks.size(); i += 12) {
    LstmCell c;
    const auto& b = enc.basic_blocks;
    c.Wi = b[i];     c.Wf = b[i + 1]; c.Wo = b[i + 2]; c.Wc = b[i + 3];
    c.Ui = b[i + 4]; c.Uf = b[i + 5]; c.Uo = b[i + 6]; c.Uc = b[i + 7];
    c.bi = b[i + 8]; c.bf = b[i + 9]; c.bo = b[i + 10]; c.bc = b[i + 11];
    cells.push_back(std::move(c));
  }
  return cells;
}

// One direction over the sequence; `reverse` walks right-to-left.
inline std::vector<Tensor> run_lstm(Tape& t, const LstmCell& cell, const std::vector<Tensor>& xs,
                                    std::size_t hidden, bool reverse) {
  std::vector<Tensor> hs(xs.size());
  Tensor h = Tensor::zeros({hidden});
  Tensor c = Tensor::zeros({hidden});
  for (std::size_t step = 0; step < xs.size(); ++step) {
    std::size_t idx = reverse ? xs.size() - 1 - step : step;
    const Tensor& x = xs[idx];
    Tensor i = t.sigmoid(t.add(t.add(t.matmul(cell.Wi, x), t.matmul(cell.Ui, h)), cell.bi));
    Tensor f = t.sigmoid(t.add(t.add(t.matmul(cell.Wf, x), t.matmul(cell.Uf, h)), cell.bf));
    Tensor o = t.sigmoid(t.add(t.add(t.matmul(cell.Wo, x), t.matmul(cell.Uo, h)), cell.bo));
    Tensor u = t.tanh(t.add(t.add(t.matmul(cell.Wc, x), t.matmul(cell.Uc, h)), cell.bc));
    c = t.add(t.mul(f, c), t.mul(i, u));
    h = t.mul(o, t.tanh(c));
    hs[idx] = h;
  }
  return hs;
}

inline std::vector<Tensor> run_bilstm(Tape& t, const std::vector<LstmCell>& cells,
                                      const BiLstmLayout& layout, const std::vector<Tensor>& xs) {
  std::vector<Tensor> seq = xs;
  for (std::size_t l = 0; l < layout.layers; ++l) {
    auto fwd = run_lstm(t, cells[2 * l], seq, layout.hidden, false);
    auto bwd = run_lstm(t, cells[2 * l + 1], seq, layout.hidden, true);
    std::vector<Tensor> merged(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) merged[i] = t.concat({fwd[i], bwd[i]});
    seq = std::move(merged);
  }
  return seq;
}

}  // namespace encoder_detail

// Encode with an explicit language vector (PGN mode).
inline std::vector<Tensor> encode_with_language_vector(Tape& t, const EncoderParams& enc,
                                                       const std::vector<Tensor>& xs,
                                                       const Tensor& e_lang) {
  require(!xs.empty(), "encoder: empty input sequence");
  Tensor flat = t.matmul(enc.W_pgn, e_lang);
  auto cells = encoder_detail::unflatten(t, enc.layout, flat);
  return encoder_detail::run_bilstm(t, cells, enc.layout, xs);
}

// Per-token output is [h_fwd ; h_bwd] of the final layer (dim 2 * hidden).
inline std::vector<Tensor> encode(Tape& t, const EncoderParams& enc, const std::vector<Tensor>& xs,
                                  std::optional<std::size_t> language_id) {
  require(!xs.empty(), "encoder: empty input sequence");
  if (enc.mode == EncoderMode::kBasic)
    return encoder_detail::run_bilstm(t, encoder_detail::basic_cells(enc), enc.layout, xs);
  require(language_id.has_value(), "encoder: pgn mode requires a language id");
  require(*language_id < enc.lang_emb.dim(0), "encoder: unknown language id ", *language_id);
  Tensor e = t.lookup(enc.lang_emb, *language_id);
  return encode_with_language_vector(t, enc, xs, e);
}

}  // namespace srl
