// Sandglass dense autoencoder over rasters. The bottleneck activations are the
// image features fed to the RNN; tanh keeps them inside the [-1,1] scaling
// contract, the logistic output matches raster range. Gradients are
// hand-derived and checked against finite differences in the tests.
#pragma once

#include <functional>

#include "regain/checkpoint.hpp"
#include "regain/numerics.hpp"
#include "regain/optim.hpp"
#include "regain/rng.hpp"

namespace regain {

struct AeConfig {
  int input = 256;
  std::vector<int> hidden = {64};  // encoder stack; decoder mirrors it
  int features = 8;

  std::vector<int> layer_sizes() const {
    std::vector<int> sizes;
    sizes.push_back(input);
    for (int h : hidden) sizes.push_back(h);
    sizes.push_back(features);
    for (auto it = hidden.rbegin(); it != hidden.rend(); ++it) sizes.push_back(*it);
    sizes.push_back(input);
    return sizes;
  }
};

struct AeParams {
  AeConfig cfg;
  std::vector<Matrix> W;
  std::vector<Vector> b;

  std::size_t n_layers() const { return W.size(); }
  std::size_t encoder_layers() const { return cfg.hidden.size() + 1; }

  ParamViews views() {
    ParamViews v;
    for (std::size_t l = 0; l < W.size(); ++l) {
      v.push_back({"ae.W" + std::to_string(l), W[l].data(), W[l].size()});
      v.push_back({"ae.b" + std::to_string(l), b[l].data(), b[l].size()});
    }
    return v;
  }
};

inline AeParams make_autoencoder(const AeConfig& cfg, SeededRng& rng) {
  require(cfg.features < cfg.input, "autoencoder: bottleneck must be smaller than input");
  AeParams p;
  p.cfg = cfg;
  const auto sizes = cfg.layer_sizes();
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Matrix w(sizes[l + 1], sizes[l]);
    const double s = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
    for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-s, s);
    p.W.push_back(std::move(w));
    p.b.emplace_back(sizes[l + 1], 0.0);
  }
  return p;
}

namespace detail {

struct AeTrace {
  std::vector<Vector> act;  // act[0] = input, act[l+1] = output of layer l
};

inline Vector ae_layer(const Matrix& w, const Vector& bias, const Vector& x, bool logistic) {
  Vector y(bias);
  gemv(w, x, y, 1.0);
  for (auto& v : y) v = logistic ? 1.0 / (1.0 + std::exp(-v)) : std::tanh(v);
  return y;
}

inline AeTrace ae_forward(const AeParams& p, std::span<const double> raster) {
  require(raster.size() == static_cast<std::size_t>(p.cfg.input),
          "autoencoder: raster dimension mismatch");
  AeTrace tr;
  tr.act.emplace_back(raster.begin(), raster.end());
  for (std::size_t l = 0; l < p.n_layers(); ++l) {
    const bool logistic = l + 1 == p.n_layers();
    tr.act.push_back(ae_layer(p.W[l], p.b[l], tr.act.back(), logistic));
  }
  return tr;
}

}  // namespace detail

inline Vector encode(const AeParams& p, std::span<const double> raster) {
  require(raster.size() == static_cast<std::size_t>(p.cfg.input),
          "encode: raster dimension mismatch");
  Vector x(raster.begin(), raster.end());
  for (std::size_t l = 0; l < p.encoder_layers(); ++l)
    x = detail::ae_layer(p.W[l], p.b[l], x, false);
  return x;
}

inline Vector decode(const AeParams& p, std::span<const double> f) {
  require(f.size() == static_cast<std::size_t>(p.cfg.features),
          "decode: feature dimension mismatch");
  Vector x(f.begin(), f.end());
  for (std::size_t l = p.encoder_layers(); l < p.n_layers(); ++l)
    x = detail::ae_layer(p.W[l], p.b[l], x, l + 1 == p.n_layers());
  return x;
}

// (1/N') sum over images of the squared reconstruction error
inline double cae_loss(const AeParams& p, const Matrix& rasters) {
  double total = 0.0;
  for (std::size_t n = 0; n < rasters.rows(); ++n) {
    const auto tr = detail::ae_forward(p, rasters.row_span(n));
    total += sq_dist(tr.act.back(), tr.act.front());
  }
  return total / static_cast<double>(rasters.rows());
}

struct AeGrads {
  std::vector<Matrix> W;
  std::vector<Vector> b;

  explicit AeGrads(const AeParams& p) {
    for (std::size_t l = 0; l < p.n_layers(); ++l) {
      W.emplace_back(p.W[l].rows(), p.W[l].cols());
      b.emplace_back(p.b[l].size(), 0.0);
    }
  }

  void zero() {
    for (auto& w : W) w.fill(0.0);
    for (auto& v : b) std::fill(v.begin(), v.end(), 0.0);
  }

  ParamViews views() {
    ParamViews v;
    for (std::size_t l = 0; l < W.size(); ++l) {
      v.push_back({"ae.W" + std::to_string(l), W[l].data(), W[l].size()});
      v.push_back({"ae.b" + std::to_string(l), b[l].data(), b[l].size()});
    }
    return v;
  }
};

// Accumulates d/dparams of sum-over-pixel squared error for one raster,
// normalized by inv_n (the 1/N' of the loss). Returns this sample's term.
inline double cae_backward_sample(const AeParams& p, std::span<const double> raster,
                                  double inv_n, AeGrads& g) {
  const auto tr = detail::ae_forward(p, raster);
  const Vector& out = tr.act.back();
  const std::size_t L = p.n_layers();
  Vector delta(out.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double e = out[i] - raster[i];
    loss += e * e;
    delta[i] = 2.0 * inv_n * e * out[i] * (1.0 - out[i]);  // through the logistic
  }
  for (std::size_t l = L; l-- > 0;) {
    ger(g.W[l], delta, tr.act[l]);
    axpy(1.0, delta, g.b[l]);
    if (l == 0) break;
    Vector prev(tr.act[l].size());
    gemv_t(p.W[l], delta, prev);
    for (std::size_t i = 0; i < prev.size(); ++i)
      prev[i] *= 1.0 - tr.act[l][i] * tr.act[l][i];  // through tanh
    delta = std::move(prev);
  }
  return loss * inv_n;
}

struct CaeTrainOpts {
  int epochs = 300;
  int batch = 32;
  double lr = 0.001;
  double jitter = 0.10;  // intensity augmentation during training
};

// Minibatch Adam on Eq-style reconstruction loss. Returns the per-epoch loss
// curve (clean data, recomputed after each epoch's updates).
inline Vector train_cae(AeParams& p, const Matrix& rasters, const CaeTrainOpts& opts,
                        SeededRng& rng) {
  require(rasters.rows() > 0, "train_cae: empty dataset");
  Vector curve;
  if (opts.epochs == 0) return curve;
  AdamState adam;
  adam.lr = opts.lr;
  AeGrads grads(p);
  const auto pviews = p.views();
  std::vector<std::size_t> order(rasters.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += opts.batch) {
      const std::size_t stop = std::min(order.size(), start + opts.batch);
      grads.zero();
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        Vector x(rasters.row_span(order[k]).begin(), rasters.row_span(order[k]).end());
        if (opts.jitter > 0.0) {
          const double f = 1.0 + rng.uniform(-opts.jitter, opts.jitter);
          for (auto& v : x) v = clamp(v * f, 0.0, 1.0);
        }
        cae_backward_sample(p, x, inv, grads);
      }
      adam_step(pviews, grads.views(), adam);
    }
    const double loss = cae_loss(p, rasters);
    if (!std::isfinite(loss))
      throw std::runtime_error("train_cae: loss diverged at epoch " + std::to_string(epoch));
    curve.push_back(loss);
  }
  return curve;
}

inline std::vector<NamedTensor> ae_to_tensors(const AeParams& p) {
  std::vector<NamedTensor> out;
  NamedTensor meta;
  meta.name = "ae.layer_sizes";
  const auto sizes = p.cfg.layer_sizes();
  meta.dims = {static_cast<std::uint32_t>(sizes.size())};
  for (int s : sizes) meta.data.push_back(s);
  out.push_back(std::move(meta));
  NamedTensor enc;
  enc.name = "ae.encoder_layers";
  enc.dims = {1};
  enc.data = {static_cast<double>(p.encoder_layers())};
  out.push_back(std::move(enc));
  for (std::size_t l = 0; l < p.n_layers(); ++l) {
    NamedTensor w;
    w.name = "ae.W" + std::to_string(l);
    w.dims = {static_cast<std::uint32_t>(p.W[l].rows()), static_cast<std::uint32_t>(p.W[l].cols())};
    w.data = p.W[l].storage();
    out.push_back(std::move(w));
    NamedTensor bias;
    bias.name = "ae.b" + std::to_string(l);
    bias.dims = {static_cast<std::uint32_t>(p.b[l].size())};
    bias.data = p.b[l];
    out.push_back(std::move(bias));
  }
  return out;
}

inline AeParams ae_from_tensors(const std::vector<NamedTensor>& tensors) {
  const NamedTensor* meta = nullptr;
  for (const auto& t : tensors)
    if (t.name == "ae.layer_sizes") meta = &t;
  require(meta != nullptr, "ae_from_tensors: missing layer_sizes");
  std::vector<int> sizes;
  for (double v : meta->data) sizes.push_back(static_cast<int>(v));
  AeParams p;
  p.cfg.input = sizes.front();
  p.cfg.features = sizes[sizes.size() / 2];
  p.cfg.hidden.assign(sizes.begin() + 1, sizes.begin() + (sizes.size() / 2));
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::string wn = "ae.W" + std::to_string(l), bn = "ae.b" + std::to_string(l);
    const NamedTensor *wt = nullptr, *bt = nullptr;
    for (const auto& t : tensors) {
      if (t.name == wn) wt = &t;
      if (t.name == bn) bt = &t;
    }
    require(wt && bt, "ae_from_tensors: missing layer " + std::to_string(l));
    Matrix w(wt->dims[0], wt->dims[1]);
    w.storage() = wt->data;
    p.W.push_back(std::move(w));
    p.b.push_back(bt->data);
  }
  return p;
}

}  // namespace regain
