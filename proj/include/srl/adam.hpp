#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "srl/params.hpp"
#include "srl/util.hpp"

namespace srl {

// Adam with bias correction. Moment buffers are keyed by group name and
// allocated on first step.
class AdamState {
 public:
  explicit AdamState(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                     double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  std::int64_t steps() const { return t_; }
  double lr() const { return lr_; }

  void step(Params& params) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& [name, p] : params.items()) {
      require(p.has_grad(), "adam: missing gradient for parameter group \"", name, "\"");
      auto& slot = moments_[name];
      if (slot.m.empty()) {
        slot.m.assign(p.numel(), 0.0);
        slot.v.assign(p.numel(), 0.0);
      }
      require(slot.m.size() == p.numel(), "adam: moment/parameter size mismatch for \"", name,
              "\"");
      double* w = p.vals().data();
      const double* g = p.grad().data();
      for (std::size_t i = 0; i < p.numel(); ++i) {
        slot.m[i] = beta1_ * slot.m[i] + (1.0 - beta1_) * g[i];
        slot.v[i] = beta2_ * slot.v[i] + (1.0 - beta2_) * g[i] * g[i];
        double mhat = slot.m[i] / bc1;
        double vhat = slot.v[i] / bc2;
        w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::unordered_map<std::string, Moments> moments_;
};

}  // namespace srl
