#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "srl/rng.hpp"
#include "srl/tensor.hpp"
#include "srl/util.hpp"

namespace srl {

// Named trainable parameter groups in registration order (the order is part
// of the checkpoint file layout).
class Params {
 public:
  Tensor add(const std::string& name, Tensor t) {
    require(!index_.count(name), "params: duplicate group \"", name, "\"");
    t.set_requires_grad(true);
    index_[name] = items_.size();
    items_.push_back({name, t});
    return t;
  }

  Tensor zeros(const std::string& name, std::vector<std::size_t> shape) {
    return add(name, Tensor::zeros(std::move(shape)));
  }

  // Uniform in [-sqrt(3/d), +sqrt(3/d)] where d is the trailing dimension.
  Tensor embedding(const std::string& name, std::size_t rows, std::size_t dim, Rng& rng) {
    Tensor t = Tensor::zeros({rows, dim});
    double a = std::sqrt(3.0 / static_cast<double>(dim));
    for (auto& v : t.vals()) v = rng.uniform(-a, a);
    return add(name, t);
  }

  // Glorot-uniform for a rows x cols weight matrix.
  Tensor glorot(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng) {
    Tensor t = Tensor::zeros({rows, cols});
    double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (auto& v : t.vals()) v = rng.uniform(-a, a);
    return add(name, t);
  }

  Tensor glorot_vec(const std::string& name, std::size_t n, Rng& rng) {
    Tensor t = Tensor::zeros({n});
    double a = std::sqrt(6.0 / static_cast<double>(n + 1));
    for (auto& v : t.vals()) v = rng.uniform(-a, a);
    return add(name, t);
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  Tensor get(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "params: unknown group \"", name, "\"");
    return items_[it->second].second;
  }

  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }

  std::size_t total_values() const {
    std::size_t n = 0;
    for (const auto& [name, t] : items_) n += t.numel();
    return n;
  }

  void zero_grad() {
    for (auto& [name, t] : items_) t.zero_grad();
  }

  // Adopt every group of another registry, prefixing its names.
  void absorb(const std::string& prefix, const Params& other) {
    for (const auto& [name, t] : other.items()) {
      require(!index_.count(prefix + name), "params: duplicate group \"", prefix + name, "\"");
      index_[prefix + name] = items_.size();
      items_.push_back({prefix + name, t});
    }
  }

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace srl
