// Adam on named parameter blocks, plus the central-difference gradient checker
// used to validate every hand-derived gradient in the project.
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "regain/numerics.hpp"

namespace regain {

// Non-owning view of one parameter (or gradient) block.
struct ParamView {
  std::string name;
  double* data = nullptr;
  std::size_t size = 0;
};

using ParamViews = std::vector<ParamView>;

struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::vector<Vector> m, v;

  void reset() {
    t = 0;
    m.clear();
    v.clear();
  }
};

// Bias-corrected Adam update. Moments live in `state`, keyed by block order;
// shapes are checked on every call.
inline void adam_step(const ParamViews& params, const ParamViews& grads, AdamState& state) {
  require(params.size() == grads.size(), "adam_step: block count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size, 0.0);
      state.v.emplace_back(p.size, 0.0);
    }
  }
  require(state.m.size() == params.size(), "adam_step: state/param block mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t b = 0; b < params.size(); ++b) {
    const auto& p = params[b];
    const auto& g = grads[b];
    require(p.size == g.size && p.size == state.m[b].size(),
            "adam_step: shape mismatch in block " + p.name);
    for (std::size_t i = 0; i < p.size; ++i) {
      const double gi = g.data[i];
      if (!std::isfinite(gi))
        throw std::runtime_error("adam_step: non-finite gradient in block " + p.name);
      state.m[b][i] = state.beta1 * state.m[b][i] + (1.0 - state.beta1) * gi;
      state.v[b][i] = state.beta2 * state.v[b][i] + (1.0 - state.beta2) * gi * gi;
      const double mhat = state.m[b][i] / bc1;
      const double vhat = state.v[b][i] / bc2;
      p.data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

// Central differences: (f(p+h) - f(p-h)) / 2h per coordinate. `loss_fn` must be
// a pure function of the viewed parameters; they are restored exactly.
inline std::vector<Vector> finite_difference_gradient(const std::function<double()>& loss_fn,
                                                      const ParamViews& params,
                                                      double h = 1e-5) {
  require(h > 0.0, "finite_difference_gradient: h must be positive");
  std::vector<Vector> out;
  out.reserve(params.size());
  for (const auto& p : params) {
    Vector g(p.size, 0.0);
    for (std::size_t i = 0; i < p.size; ++i) {
      const double saved = p.data[i];
      p.data[i] = saved + h;
      const double lp = loss_fn();
      p.data[i] = saved - h;
      const double lm = loss_fn();
      p.data[i] = saved;
      if (!std::isfinite(lp) || !std::isfinite(lm))
        throw std::runtime_error("finite_difference_gradient: non-finite loss at block " +
                                 p.name);
      g[i] = (lp - lm) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

// max_i |a_i - b_i| / max(1, |a_i|, |b_i|), over all blocks.
inline double max_relative_error(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  require(a.size() == b.size(), "max_relative_error: block count mismatch");
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    require(a[k].size() == b[k].size(), "max_relative_error: block size mismatch");
    for (std::size_t i = 0; i < a[k].size(); ++i) {
      const double den = std::max({1.0, std::fabs(a[k][i]), std::fabs(b[k][i])});
      worst = std::max(worst, std::fabs(a[k][i] - b[k][i]) / den);
    }
  }
  return worst;
}

}  // namespace regain
