// Recurrent task learner. Three interchangeable cells (LSTM, GRU, MTRNN with
// leaky-integrator dynamics), sequence prediction of next joints + image
// features, BPTT with the attractor term pulling the final state back to the
// shared learned initial state, and a linear previous-trajectory head read
// from the middle context layer (backbone frozen in that phase).
//
// State vector layout:
//   LSTM:  [h, cell]          context layer = h
//   GRU:   [h]                context layer = h
//   MTRNN: [u_fast, u_slow]   (potentials) context layer = tanh(u_fast)
#pragma once

#include <thread>

#include "regain/autoencoder.hpp"
#include "regain/checkpoint.hpp"
#include "regain/lqr.hpp"
#include "regain/numerics.hpp"
#include "regain/optim.hpp"
#include "regain/rng.hpp"

namespace regain {

enum class CellKind { LSTM, GRU, MTRNN };

inline std::string cell_name(CellKind k) {
  switch (k) {
    case CellKind::LSTM: return "lstm";
    case CellKind::GRU: return "gru";
    case CellKind::MTRNN: return "mtrnn";
  }
  return "?";
}

inline CellKind cell_from_name(const std::string& s) {
  if (s == "lstm") return CellKind::LSTM;
  if (s == "gru") return CellKind::GRU;
  if (s == "mtrnn") return CellKind::MTRNN;
  throw std::invalid_argument("unknown cell kind: " + s);
}

struct RnnConfig {
  CellKind kind = CellKind::LSTM;
  int dim_m = 4;  // joint + gripper channels
  int dim_f = 8;  // image feature channels
  int hidden = 64;
  int mt_fast = 24, mt_slow = 8;
  double tau_fast = 2.0, tau_slow = 30.0;
  int prev_n = 10;

  int input() const { return dim_m + dim_f; }
  int output() const { return dim_m + dim_f; }
  int ctx_dim() const { return kind == CellKind::MTRNN ? mt_fast : hidden; }
  int state_dim() const {
    switch (kind) {
      case CellKind::LSTM: return 2 * hidden;
      case CellKind::GRU: return hidden;
      case CellKind::MTRNN: return mt_fast + mt_slow;
    }
    return 0;
  }
  void validate() const {
    require(dim_m >= 1 && dim_f >= 1, "rnn: channel dims must be positive");
    require(hidden >= 1 && mt_fast >= 1 && mt_slow >= 1, "rnn: hidden sizes must be >= 1");
    require(tau_fast >= 1.0 && tau_slow >= 1.0, "rnn: tau must be >= 1");
    require(prev_n >= 1, "rnn: previous-head depth must be >= 1");
  }
};

struct RnnParams {
  RnnConfig cfg;
  // gate blocks, LSTM order [i, f, g, o]; GRU order [z, r, n]
  std::vector<Matrix> Wx, Wh;
  std::vector<Vector> b;
  // MTRNN blocks
  Matrix Wfx, Wff, Wfs;
  Vector bf;
  Matrix Wsf, Wss;
  Vector bs;
  // shared output projection and learned initial state
  Matrix Wy;
  Vector by;
  Vector s0;
  // previous-trajectory head (phase 2)
  Matrix Wp;
  Vector bp;

  ParamViews backbone_views() {
    ParamViews v;
    const char* lstm_names[] = {"i", "f", "g", "o"};
    const char* gru_names[] = {"z", "r", "n"};
    for (std::size_t k = 0; k < Wx.size(); ++k) {
      const std::string g =
          cfg.kind == CellKind::LSTM ? lstm_names[k] : gru_names[k];
      v.push_back({"rnn.Wx_" + g, Wx[k].data(), Wx[k].size()});
      v.push_back({"rnn.Wh_" + g, Wh[k].data(), Wh[k].size()});
      v.push_back({"rnn.b_" + g, b[k].data(), b[k].size()});
    }
    if (cfg.kind == CellKind::MTRNN) {
      v.push_back({"rnn.Wfx", Wfx.data(), Wfx.size()});
      v.push_back({"rnn.Wff", Wff.data(), Wff.size()});
      v.push_back({"rnn.Wfs", Wfs.data(), Wfs.size()});
      v.push_back({"rnn.bf", bf.data(), bf.size()});
      v.push_back({"rnn.Wsf", Wsf.data(), Wsf.size()});
      v.push_back({"rnn.Wss", Wss.data(), Wss.size()});
      v.push_back({"rnn.bs", bs.data(), bs.size()});
    }
    v.push_back({"rnn.Wy", Wy.data(), Wy.size()});
    v.push_back({"rnn.by", by.data(), by.size()});
    v.push_back({"rnn.s0", s0.data(), s0.size()});
    return v;
  }

  ParamViews head_views() {
    return {{"rnn.Wp", Wp.data(), Wp.size()}, {"rnn.bp", bp.data(), bp.size()}};
  }
};

inline RnnParams make_rnn(const RnnConfig& cfg, SeededRng& rng) {
  cfg.validate();
  RnnParams p;
  p.cfg = cfg;
  const int I = cfg.input(), O = cfg.output();
  auto init = [&rng](Matrix& m, int fan_in) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-s, s);
  };
  if (cfg.kind == CellKind::LSTM || cfg.kind == CellKind::GRU) {
    const int H = cfg.hidden;
    const int gates = cfg.kind == CellKind::LSTM ? 4 : 3;
    for (int k = 0; k < gates; ++k) {
      Matrix wx(H, I), wh(H, H);
      init(wx, I);
      init(wh, H);
      p.Wx.push_back(std::move(wx));
      p.Wh.push_back(std::move(wh));
      p.b.emplace_back(H, 0.0);
    }
    if (cfg.kind == CellKind::LSTM)
      std::fill(p.b[1].begin(), p.b[1].end(), 1.0);  // forget gate bias
  } else {
    const int F = cfg.mt_fast, S = cfg.mt_slow;
    p.Wfx = Matrix(F, I);
    p.Wff = Matrix(F, F);
    p.Wfs = Matrix(F, S);
    p.bf.assign(F, 0.0);
    p.Wsf = Matrix(S, F);
    p.Wss = Matrix(S, S);
    p.bs.assign(S, 0.0);
    init(p.Wfx, I);
    init(p.Wff, F);
    init(p.Wfs, S);
    init(p.Wsf, F);
    init(p.Wss, S);
  }
  p.Wy = Matrix(O, cfg.ctx_dim());
  init(p.Wy, cfg.ctx_dim());
  p.by.assign(O, 0.0);
  p.s0.assign(cfg.state_dim(), 0.0);
  p.Wp = Matrix(static_cast<std::size_t>(cfg.prev_n) * cfg.dim_m, cfg.ctx_dim());
  init(p.Wp, cfg.ctx_dim());
  p.bp.assign(static_cast<std::size_t>(cfg.prev_n) * cfg.dim_m, 0.0);
  return p;
}

inline Vector initial_state(const RnnParams& p) { return p.s0; }

// context layer (what the previous head and the PCA export read)
inline Vector context_of(const RnnParams& p, const Vector& state) {
  const int C = p.cfg.ctx_dim();
  Vector ctx(state.begin(), state.begin() + C);
  if (p.cfg.kind == CellKind::MTRNN)
    for (auto& v : ctx) v = std::tanh(v);
  return ctx;
}

struct StepCache {
  Vector x;
  Vector s_prev;
  // LSTM: i,f,g,o,tanh_c ; GRU: z,r,n,rh ; MTRNN: cf_prev, cs_prev, cf, cs
  std::vector<Vector> aux;
  Vector ctx;  // context layer after the update
  Vector y;    // tanh output
};

// One recurrence step; fills `cache` when given. Input must be I-dimensional.
inline std::pair<Vector, Vector> cell_forward(const RnnParams& p, const Vector& state,
                                              std::span<const double> x,
                                              StepCache* cache = nullptr) {
  const RnnConfig& cfg = p.cfg;
  require(static_cast<int>(x.size()) == cfg.input(), "cell_forward: input dimension mismatch");
  require(static_cast<int>(state.size()) == cfg.state_dim(),
          "cell_forward: state dimension mismatch");
  Vector s_next(state.size());
  StepCache local;
  StepCache& c = cache ? *cache : local;
  c.x.assign(x.begin(), x.end());
  c.s_prev = state;

  if (cfg.kind == CellKind::LSTM) {
    const int H = cfg.hidden;
    std::span<const double> h_prev(state.data(), H);
    std::span<const double> c_prev(state.data() + H, H);
    c.aux.assign(5, Vector(H));
    for (int k = 0; k < 4; ++k) {
      Vector a = p.b[k];
      gemv(p.Wx[k], x, a, 1.0);
      gemv(p.Wh[k], h_prev, a, 1.0);
      for (int i = 0; i < H; ++i)
        c.aux[k][i] = (k == 2) ? std::tanh(a[i]) : sigmoid(a[i]);
    }
    const Vector &gi = c.aux[0], &gf = c.aux[1], &gg = c.aux[2], &go = c.aux[3];
    for (int i = 0; i < H; ++i) {
      const double cn = gf[i] * c_prev[i] + gi[i] * gg[i];
      s_next[H + i] = cn;
      c.aux[4][i] = std::tanh(cn);
      s_next[i] = go[i] * c.aux[4][i];
    }
  } else if (cfg.kind == CellKind::GRU) {
    const int H = cfg.hidden;
    std::span<const double> h_prev(state.data(), H);
    c.aux.assign(4, Vector(H));
    for (int k = 0; k < 2; ++k) {  // z, r
      Vector a = p.b[k];
      gemv(p.Wx[k], x, a, 1.0);
      gemv(p.Wh[k], h_prev, a, 1.0);
      for (int i = 0; i < H; ++i) c.aux[k][i] = sigmoid(a[i]);
    }
    for (int i = 0; i < H; ++i) c.aux[3][i] = c.aux[1][i] * h_prev[i];  // r*h
    Vector a = p.b[2];
    gemv(p.Wx[2], x, a, 1.0);
    gemv(p.Wh[2], c.aux[3], a, 1.0);
    for (int i = 0; i < H; ++i) c.aux[2][i] = std::tanh(a[i]);
    const Vector &z = c.aux[0], &n = c.aux[2];
    for (int i = 0; i < H; ++i) s_next[i] = (1.0 - z[i]) * h_prev[i] + z[i] * n[i];
  } else {  // MTRNN: leaky integration, per-group tau
    const int F = cfg.mt_fast, S = cfg.mt_slow;
    std::span<const double> uf_prev(state.data(), F);
    std::span<const double> us_prev(state.data() + F, S);
    c.aux.assign(4, Vector());
    c.aux[0].resize(F);  // cf_prev
    c.aux[1].resize(S);  // cs_prev
    for (int i = 0; i < F; ++i) c.aux[0][i] = std::tanh(uf_prev[i]);
    for (int i = 0; i < S; ++i) c.aux[1][i] = std::tanh(us_prev[i]);
    Vector pf = p.bf;
    gemv(p.Wfx, x, pf, 1.0);
    gemv(p.Wff, c.aux[0], pf, 1.0);
    gemv(p.Wfs, c.aux[1], pf, 1.0);
    Vector ps = p.bs;
    gemv(p.Wsf, c.aux[0], ps, 1.0);
    gemv(p.Wss, c.aux[1], ps, 1.0);
    const double kf = 1.0 / cfg.tau_fast, ks = 1.0 / cfg.tau_slow;
    c.aux[2].resize(F);
    c.aux[3].resize(S);
    for (int i = 0; i < F; ++i) {
      s_next[i] = (1.0 - kf) * uf_prev[i] + kf * pf[i];
      c.aux[2][i] = std::tanh(s_next[i]);
    }
    for (int i = 0; i < S; ++i) {
      s_next[F + i] = (1.0 - ks) * us_prev[i] + ks * ps[i];
      c.aux[3][i] = std::tanh(s_next[F + i]);
    }
  }

  // output projection from the context layer, through tanh
  c.ctx = (cfg.kind == CellKind::MTRNN)
              ? c.aux[2]
              : Vector(s_next.begin(), s_next.begin() + cfg.hidden);
  Vector y = p.by;
  gemv(p.Wy, c.ctx, y, 1.0);
  for (auto& v : y) v = std::tanh(v);
  c.y = y;
  return {std::move(s_next), std::move(y)};
}

struct ForwardTrace {
  Matrix inputs;   // S x I
  Matrix outputs;  // S x O, row t predicts step t+1
  Matrix context;  // S x ctx
  Matrix states;   // S x state_dim
  std::vector<StepCache> caches;
  Vector s_final;
};

// Teacher-forced: each row of `inputs` is fed as-is. Closed-loop: row 0 seeds
// the rollout and every later input is the previous prediction.
inline ForwardTrace sequence_forward(const RnnParams& p, const Matrix& inputs,
                                     bool teacher_forcing = true, bool with_caches = false) {
  require(inputs.rows() >= 1, "sequence_forward: empty sequence");
  require(static_cast<int>(inputs.cols()) == p.cfg.input(),
          "sequence_forward: input width mismatch");
  const std::size_t S = inputs.rows();
  ForwardTrace tr;
  tr.inputs = Matrix(S, p.cfg.input());
  tr.outputs = Matrix(S, p.cfg.output());
  tr.context = Matrix(S, p.cfg.ctx_dim());
  tr.states = Matrix(S, p.cfg.state_dim());
  if (with_caches) tr.caches.resize(S);
  Vector s = initial_state(p);
  Vector x(inputs.row_span(0).begin(), inputs.row_span(0).end());
  for (std::size_t t = 0; t < S; ++t) {
    if (teacher_forcing) x.assign(inputs.row_span(t).begin(), inputs.row_span(t).end());
    std::copy(x.begin(), x.end(), tr.inputs.row(t));
    auto [s_next, y] = cell_forward(p, s, x, with_caches ? &tr.caches[t] : nullptr);
    std::copy(y.begin(), y.end(), tr.outputs.row(t));
    const Vector ctx = context_of(p, s_next);
    std::copy(ctx.begin(), ctx.end(), tr.context.row(t));
    std::copy(s_next.begin(), s_next.end(), tr.states.row(t));
    s = std::move(s_next);
    if (!teacher_forcing) x = y;
  }
  tr.s_final = std::move(s);
  return tr;
}

// prediction + attractor loss, all squared terms summed over coordinates
inline double task_loss(const Matrix& outputs, const Matrix& targets, const Vector& s0,
                        const Vector& s_final) {
  require(outputs.rows() == targets.rows() && outputs.cols() == targets.cols(),
          "task_loss: shape mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const double e = outputs.data()[i] - targets.data()[i];
    loss += e * e;
  }
  loss += sq_dist(s0, s_final);
  return loss;
}

struct RnnGrads {
  std::vector<Matrix> Wx, Wh;
  std::vector<Vector> b;
  Matrix Wfx, Wff, Wfs;
  Vector bf;
  Matrix Wsf, Wss;
  Vector bs;
  Matrix Wy;
  Vector by;
  Vector s0;

  explicit RnnGrads(const RnnParams& p) {
    for (std::size_t k = 0; k < p.Wx.size(); ++k) {
      Wx.emplace_back(p.Wx[k].rows(), p.Wx[k].cols());
      Wh.emplace_back(p.Wh[k].rows(), p.Wh[k].cols());
      b.emplace_back(p.b[k].size(), 0.0);
    }
    if (p.cfg.kind == CellKind::MTRNN) {
      Wfx = Matrix(p.Wfx.rows(), p.Wfx.cols());
      Wff = Matrix(p.Wff.rows(), p.Wff.cols());
      Wfs = Matrix(p.Wfs.rows(), p.Wfs.cols());
      bf.assign(p.bf.size(), 0.0);
      Wsf = Matrix(p.Wsf.rows(), p.Wsf.cols());
      Wss = Matrix(p.Wss.rows(), p.Wss.cols());
      bs.assign(p.bs.size(), 0.0);
    }
    Wy = Matrix(p.Wy.rows(), p.Wy.cols());
    by.assign(p.by.size(), 0.0);
    s0.assign(p.s0.size(), 0.0);
  }

  ParamViews views(RnnParams& p) {
    ParamViews src = p.backbone_views();
    ParamViews v;
    std::vector<std::pair<double*, std::size_t>> blocks;
    for (std::size_t k = 0; k < Wx.size(); ++k) {
      blocks.push_back({Wx[k].data(), Wx[k].size()});
      blocks.push_back({Wh[k].data(), Wh[k].size()});
      blocks.push_back({b[k].data(), b[k].size()});
    }
    if (p.cfg.kind == CellKind::MTRNN) {
      blocks.push_back({Wfx.data(), Wfx.size()});
      blocks.push_back({Wff.data(), Wff.size()});
      blocks.push_back({Wfs.data(), Wfs.size()});
      blocks.push_back({bf.data(), bf.size()});
      blocks.push_back({Wsf.data(), Wsf.size()});
      blocks.push_back({Wss.data(), Wss.size()});
      blocks.push_back({bs.data(), bs.size()});
    }
    blocks.push_back({Wy.data(), Wy.size()});
    blocks.push_back({by.data(), by.size()});
    blocks.push_back({s0.data(), s0.size()});
    require(blocks.size() == src.size(), "RnnGrads: view bookkeeping mismatch");
    for (std::size_t i = 0; i < blocks.size(); ++i)
      v.push_back({src[i].name, blocks[i].first, blocks[i].second});
    return v;
  }

  void add(const RnnGrads& o) {
    auto addm = [](Matrix& a, const Matrix& b2) {
      for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b2.data()[i];
    };
    auto addv = [](Vector& a, const Vector& b2) {
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b2[i];
    };
    for (std::size_t k = 0; k < Wx.size(); ++k) {
      addm(Wx[k], o.Wx[k]);
      addm(Wh[k], o.Wh[k]);
      addv(b[k], o.b[k]);
    }
    if (!Wfx.empty()) {
      addm(Wfx, o.Wfx);
      addm(Wff, o.Wff);
      addm(Wfs, o.Wfs);
      addv(bf, o.bf);
      addm(Wsf, o.Wsf);
      addm(Wss, o.Wss);
      addv(bs, o.bs);
    }
    addm(Wy, o.Wy);
    addv(by, o.by);
    addv(s0, o.s0);
  }
};

// Full-sequence BPTT of task_loss. Accumulates into `g`, returns the loss.
inline double backward_task(const RnnParams& p, const ForwardTrace& tr, const Matrix& targets,
                            RnnGrads& g, bool attractor_term = true) {
  const RnnConfig& cfg = p.cfg;
  require(!tr.caches.empty(), "backward_task: trace was built without caches");
  const std::size_t S = tr.outputs.rows();
  const double loss = task_loss(tr.outputs, targets, p.s0, tr.s_final) -
                      (attractor_term ? 0.0 : sq_dist(p.s0, tr.s_final));

  Vector ds(cfg.state_dim(), 0.0);
  if (attractor_term)
    for (int i = 0; i < cfg.state_dim(); ++i) ds[i] = 2.0 * (tr.s_final[i] - p.s0[i]);

  const int H = cfg.hidden, F = cfg.mt_fast, Sl = cfg.mt_slow;
  const double kf = 1.0 / cfg.tau_fast, ks = 1.0 / cfg.tau_slow;

  for (std::size_t t = S; t-- > 0;) {
    const StepCache& c = tr.caches[t];
    // output layer
    Vector da_y(cfg.output());
    for (int i = 0; i < cfg.output(); ++i) {
      const double y = tr.outputs(t, i);
      const double dy = 2.0 * (y - targets(t, i));
      da_y[i] = dy * (1.0 - y * y);
    }
    ger(g.Wy, da_y, c.ctx);
    axpy(1.0, da_y, g.by);
    Vector dctx(cfg.ctx_dim(), 0.0);
    gemv_t(p.Wy, da_y, dctx);

    if (cfg.kind == CellKind::LSTM) {
      std::span<const double> c_prev(c.s_prev.data() + H, H);
      const Vector &gi = c.aux[0], &gf = c.aux[1], &gg = c.aux[2], &go = c.aux[3],
                   &tc = c.aux[4];
      Vector dh(H), dc(H);
      for (int i = 0; i < H; ++i) {
        dh[i] = ds[i] + dctx[i];
        dc[i] = ds[H + i] + dh[i] * go[i] * (1.0 - tc[i] * tc[i]);
      }
      Vector da_i(H), da_f(H), da_g(H), da_o(H);
      for (int i = 0; i < H; ++i) {
        da_o[i] = dh[i] * tc[i] * go[i] * (1.0 - go[i]);
        da_i[i] = dc[i] * gg[i] * gi[i] * (1.0 - gi[i]);
        da_g[i] = dc[i] * gi[i] * (1.0 - gg[i] * gg[i]);
        da_f[i] = dc[i] * c_prev[i] * gf[i] * (1.0 - gf[i]);
      }
      std::span<const double> h_prev(c.s_prev.data(), H);
      const Vector* das[4] = {&da_i, &da_f, &da_g, &da_o};
      Vector dh_prev(H, 0.0);
      for (int k = 0; k < 4; ++k) {
        ger(g.Wx[k], *das[k], c.x);
        ger(g.Wh[k], *das[k], h_prev);
        axpy(1.0, *das[k], g.b[k]);
        gemv_t(p.Wh[k], *das[k], dh_prev, 1.0);
      }
      for (int i = 0; i < H; ++i) {
        ds[i] = dh_prev[i];
        ds[H + i] = dc[i] * gf[i];
      }
    } else if (cfg.kind == CellKind::GRU) {
      const Vector &z = c.aux[0], &r = c.aux[1], &n = c.aux[2], &rh = c.aux[3];
      std::span<const double> h_prev(c.s_prev.data(), H);
      Vector dh(H);
      for (int i = 0; i < H; ++i) dh[i] = ds[i] + dctx[i];
      Vector da_z(H), da_r(H), da_n(H), dh_prev(H);
      for (int i = 0; i < H; ++i) {
        da_z[i] = dh[i] * (n[i] - h_prev[i]) * z[i] * (1.0 - z[i]);
        da_n[i] = dh[i] * z[i] * (1.0 - n[i] * n[i]);
        dh_prev[i] = dh[i] * (1.0 - z[i]);
      }
      Vector drh(H, 0.0);
      gemv_t(p.Wh[2], da_n, drh);
      for (int i = 0; i < H; ++i) {
        da_r[i] = drh[i] * h_prev[i] * r[i] * (1.0 - r[i]);
        dh_prev[i] += drh[i] * r[i];
      }
      ger(g.Wx[0], da_z, c.x);
      ger(g.Wx[1], da_r, c.x);
      ger(g.Wx[2], da_n, c.x);
      ger(g.Wh[0], da_z, h_prev);
      ger(g.Wh[1], da_r, h_prev);
      ger(g.Wh[2], da_n, rh);
      axpy(1.0, da_z, g.b[0]);
      axpy(1.0, da_r, g.b[1]);
      axpy(1.0, da_n, g.b[2]);
      gemv_t(p.Wh[0], da_z, dh_prev, 1.0);
      gemv_t(p.Wh[1], da_r, dh_prev, 1.0);
      ds = std::move(dh_prev);
    } else {  // MTRNN
      const Vector &cf_prev = c.aux[0], &cs_prev = c.aux[1], &cf = c.aux[2], &cs = c.aux[3];
      // du = (upstream through activations) * (1 - c^2) + leak-through from t+1
      Vector duf(F), dus(Sl);
      for (int i = 0; i < F; ++i) {
        const double dcf = dctx[i];  // ds already carries the leak + recurrent part
        duf[i] = ds[i] + dcf * (1.0 - cf[i] * cf[i]);
      }
      for (int i = 0; i < Sl; ++i) dus[i] = ds[F + i];
      // wait: ds here holds d/du for step t coming from step t+1 paths; the
      // activation path from the output layer applies only to the fast group.
      Vector sf(F), ss(Sl);
      for (int i = 0; i < F; ++i) sf[i] = duf[i] * kf;
      for (int i = 0; i < Sl; ++i) ss[i] = dus[i] * ks;
      ger(g.Wfx, sf, c.x);
      ger(g.Wff, sf, cf_prev);
      ger(g.Wfs, sf, cs_prev);
      axpy(1.0, sf, g.bf);
      ger(g.Wsf, ss, cf_prev);
      ger(g.Wss, ss, cs_prev);
      axpy(1.0, ss, g.bs);
      // propagate to the previous step: leak + activation consumption
      Vector dcf_prev(F, 0.0), dcs_prev(Sl, 0.0);
      gemv_t(p.Wff, sf, dcf_prev, 1.0);
      gemv_t(p.Wsf, ss, dcf_prev, 1.0);
      gemv_t(p.Wfs, sf, dcs_prev, 1.0);
      gemv_t(p.Wss, ss, dcs_prev, 1.0);
      Vector ds_prev(cfg.state_dim());
      for (int i = 0; i < F; ++i)
        ds_prev[i] = duf[i] * (1.0 - kf) + dcf_prev[i] * (1.0 - cf_prev[i] * cf_prev[i]);
      for (int i = 0; i < Sl; ++i)
        ds_prev[F + i] =
            dus[i] * (1.0 - ks) + dcs_prev[i] * (1.0 - cs_prev[i] * cs_prev[i]);
      ds = std::move(ds_prev);
    }
  }
  // gradient w.r.t. the learned initial state: recurrence flow + direct term
  axpy(1.0, ds, g.s0);
  if (attractor_term)
    for (int i = 0; i < cfg.state_dim(); ++i) g.s0[i] += 2.0 * (p.s0[i] - tr.s_final[i]);
  return loss;
}

// ---- previous-trajectory head ----

inline Vector head_forward(const RnnParams& p, std::span<const double> ctx) {
  Vector out = p.bp;
  gemv(p.Wp, ctx, out, 1.0);
  return out;
}

// N stacked joint vectors, lag 1 first (linear readout of the context layer)
inline Matrix predict_previous(const RnnParams& p, const Vector& state) {
  const Vector ctx = context_of(p, state);
  const Vector flat = head_forward(p, ctx);
  Matrix out(p.cfg.prev_n, p.cfg.dim_m);
  std::copy(flat.begin(), flat.end(), out.data());
  return out;
}

struct HeadGrads {
  Matrix Wp;
  Vector bp;
  explicit HeadGrads(const RnnParams& p) : Wp(p.Wp.rows(), p.Wp.cols()), bp(p.bp.size(), 0.0) {}
  void zero() {
    Wp.fill(0.0);
    bp.assign(bp.size(), 0.0);
  }
  ParamViews views() {
    return {{"rnn.Wp", Wp.data(), Wp.size()}, {"rnn.bp", bp.data(), bp.size()}};
  }
};

// L = sum_t (1/N) sum_{n<=t} ||pred(t,n) - m_{t-n}||^2, lags before the
// sequence start are masked out. Accumulates head gradients, returns the loss.
inline double head_loss_and_grads(const RnnParams& p, const Matrix& ctxs, const Matrix& m,
                                  HeadGrads* g) {
  const int N = p.cfg.prev_n, dm = p.cfg.dim_m;
  require(ctxs.rows() == m.rows(), "head_loss: trace/target length mismatch");
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(N);
  Vector dpred(static_cast<std::size_t>(N) * dm);
  for (std::size_t t = 0; t < ctxs.rows(); ++t) {
    const Vector pred = head_forward(p, ctxs.row_span(t));
    std::fill(dpred.begin(), dpred.end(), 0.0);
    bool any = false;
    for (int n = 1; n <= N; ++n) {
      if (static_cast<int>(t) - n < 0) break;
      any = true;
      for (int c2 = 0; c2 < dm; ++c2) {
        const double e = pred[(n - 1) * dm + c2] - m(t - n, c2);
        loss += inv_n * e * e;
        dpred[(n - 1) * dm + c2] = 2.0 * inv_n * e;
      }
    }
    if (any && g) {
      ger(g->Wp, dpred, ctxs.row_span(t));
      axpy(1.0, dpred, g->bp);
    }
  }
  return loss;
}

// mean-per-coordinate squared error at each lag, averaged over valid steps
inline Vector per_lag_loss(const RnnParams& p, const std::vector<Matrix>& ctxs,
                           const std::vector<Matrix>& ms) {
  const int N = p.cfg.prev_n, dm = p.cfg.dim_m;
  Vector loss(N, 0.0);
  std::vector<long> count(N, 0);
  for (std::size_t s = 0; s < ctxs.size(); ++s) {
    for (std::size_t t = 0; t < ctxs[s].rows(); ++t) {
      const Vector pred = head_forward(p, ctxs[s].row_span(t));
      for (int n = 1; n <= N; ++n) {
        if (static_cast<int>(t) - n < 0) break;
        double e2 = 0.0;
        for (int c2 = 0; c2 < dm; ++c2) {
          const double e = pred[(n - 1) * dm + c2] - ms[s](t - n, c2);
          e2 += e * e;
        }
        loss[n - 1] += e2 / dm;
        count[n - 1] += 1;
      }
    }
  }
  for (int n = 0; n < N; ++n)
    if (count[n] > 0) loss[n] /= static_cast<double>(count[n]);
  return loss;
}

// ---- training ----

struct RnnSeq {
  Matrix m_scaled;  // T x dim_m, [-1,1] units
  Matrix rasters;   // T x pixels
  int subtask = 1;
  int id = 0;
};

struct TaskTrainOpts {
  int epochs = 1000;
  int batch = 8;
  double lr = 0.001;
  double sigma = 0.01;   // joint-channel noise, scaled units
  double jitter = 0.10;  // raster intensity jitter
  int threads = 2;
};

// inputs x_t = [m_t ; f_t] for t = 0..T-2 and targets (m_{t+1} - dmL_{t+1},
// f_{t+1}): with the blend coefficient at zero during training the executed
// command is dmR + dmL, so the network learns to counter the LQR pull.
inline std::pair<Matrix, Matrix> build_training_pair(const RnnConfig& cfg, const Matrix& m,
                                                     const Matrix& f, const LqrPlant* lqr) {
  const std::size_t T = m.rows();
  require(T >= 2, "build_training_pair: sequence too short");
  const int dm = cfg.dim_m, df = cfg.dim_f;
  Matrix X(T - 1, dm + df), Y(T - 1, dm + df);
  for (std::size_t t = 0; t + 1 < T; ++t) {
    for (int c = 0; c < dm; ++c) X(t, c) = m(t, c);
    for (int c = 0; c < df; ++c) X(t, dm + c) = f(t, c);
    Vector dml(dm, 0.0);
    if (lqr) {
      // the plant acts on the joint channels only; gripper is untouched
      const std::size_t nj = lqr->target.size();
      Vector mj(m.row(t), m.row(t) + nj);
      const Vector u = lqr_command(*lqr, mj);
      for (std::size_t c = 0; c < nj; ++c) dml[c] = u[c];
    }
    for (int c = 0; c < dm; ++c) Y(t, c) = m(t + 1, c) - dml[c];
    for (int c = 0; c < df; ++c) Y(t, dm + c) = f(t + 1, c);
  }
  return {std::move(X), std::move(Y)};
}

inline Matrix encode_rows(const AeParams& ae, const Matrix& rasters) {
  Matrix f(rasters.rows(), ae.cfg.features);
  for (std::size_t t = 0; t < rasters.rows(); ++t) {
    const Vector ft = encode(ae, rasters.row_span(t));
    std::copy(ft.begin(), ft.end(), f.row(t));
  }
  return f;
}

// BPTT training over all subtask sequences with the LQR in the loop.
// Per-sequence augmentation is keyed by (epoch, sequence id) so results do not
// depend on the thread count-induced work order.
inline Vector train_task(RnnParams& p, const std::vector<RnnSeq>& seqs, const AeParams& ae,
                         const LqrPlant& lqr, const TaskTrainOpts& opts, SeededRng& rng) {
  require(!seqs.empty(), "train_task: no sequences");
  Vector curve;
  if (opts.epochs == 0) return curve;
  AdamState adam;
  adam.lr = opts.lr;
  const auto pviews = p.backbone_views();
  std::vector<std::size_t> order(seqs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch) {
      const std::size_t stop = std::min(order.size(), start + opts.batch);
      const int nthreads = std::max(1, std::min<int>(opts.threads, stop - start));
      std::vector<RnnGrads> locals;
      locals.reserve(nthreads);
      for (int k = 0; k < nthreads; ++k) locals.emplace_back(p);
      std::vector<double> losses(nthreads, 0.0);

      auto work = [&](int tid) {
        for (std::size_t k = start + tid; k < stop; k += nthreads) {
          const RnnSeq& seq = seqs[order[k]];
          SeededRng arng = rng.child(static_cast<std::uint64_t>(epoch) * 1000003ULL +
                                     static_cast<std::uint64_t>(seq.id));
          Matrix m = seq.m_scaled;
          Matrix o = seq.rasters;
          augment_scaled_matrices(m, o, opts.sigma, opts.jitter, arng);
          const Matrix f = encode_rows(ae, o);
          auto [X, Y] = build_training_pair(p.cfg, m, f, &lqr);
          const ForwardTrace tr = sequence_forward(p, X, true, true);
          losses[tid] += backward_task(p, tr, Y, locals[tid], true);
        }
      };
      if (nthreads == 1) {
        work(0);
      } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < nthreads; ++k) pool.emplace_back(work, k);
        for (auto& th : pool) th.join();
      }
      for (int k = 1; k < nthreads; ++k) locals[0].add(locals[k]);
      for (int k = 0; k < nthreads; ++k) epoch_loss += losses[k];
      RnnGrads& total = locals[0];
      adam_step(pviews, total.views(p), adam);
    }
    epoch_loss /= static_cast<double>(seqs.size());
    if (!std::isfinite(epoch_loss))
      throw std::runtime_error("train_task: loss diverged at epoch " + std::to_string(epoch));
    curve.push_back(epoch_loss);
  }
  return curve;
}

struct HeadTrainOpts {
  int epochs = 400;
  double lr = 0.001;
};

struct HeadTrainResult {
  Vector curve;
  Vector per_lag;  // mean-per-coordinate loss per lag after training
};

// Phase 2: context traces come from clean teacher-forced replays; only the
// head weights move. Backbone parameters are bit-identical afterwards.
inline HeadTrainResult train_previous_head(RnnParams& p, const std::vector<RnnSeq>& seqs,
                                           const AeParams& ae, const LqrPlant& lqr,
                                           const HeadTrainOpts& opts) {
  require(!seqs.empty(), "train_previous_head: no sequences");
  std::vector<Matrix> ctxs, ms;
  for (const auto& seq : seqs) {
    const Matrix f = encode_rows(ae, seq.rasters);
    auto [X, Y] = build_training_pair(p.cfg, seq.m_scaled, f, &lqr);
    const ForwardTrace tr = sequence_forward(p, X, true, false);
    ctxs.push_back(tr.context);
    // the head's target at trace step t is the executed m at the same step:
    // trace step t corresponds to trajectory time t (inputs m_0..m_{T-2})
    Matrix mcopy(seq.m_scaled.rows() - 1, p.cfg.dim_m);
    for (std::size_t t = 0; t + 1 < seq.m_scaled.rows(); ++t)
      for (int c = 0; c < p.cfg.dim_m; ++c) mcopy(t, c) = seq.m_scaled(t, c);
    ms.push_back(std::move(mcopy));
  }
  HeadTrainResult result;
  if (opts.epochs > 0) {
    AdamState adam;
    adam.lr = opts.lr;
    HeadGrads grads(p);
    const auto hviews = p.head_views();
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
      grads.zero();
      double loss = 0.0;
      for (std::size_t s = 0; s < ctxs.size(); ++s)
        loss += head_loss_and_grads(p, ctxs[s], ms[s], &grads);
      if (!std::isfinite(loss))
        throw std::runtime_error("train_previous_head: loss diverged at epoch " +
                                 std::to_string(epoch));
      adam_step(hviews, grads.views(), adam);
      result.curve.push_back(loss / static_cast<double>(ctxs.size()));
    }
  }
  result.per_lag = per_lag_loss(p, ctxs, ms);
  return result;
}

// ---- checkpoints ----

inline std::vector<NamedTensor> rnn_to_tensors(RnnParams& p) {
  std::vector<NamedTensor> out;
  NamedTensor meta;
  meta.name = "rnn.config";
  meta.dims = {9};
  meta.data = {static_cast<double>(static_cast<int>(p.cfg.kind)),
               static_cast<double>(p.cfg.dim_m),
               static_cast<double>(p.cfg.dim_f),
               static_cast<double>(p.cfg.hidden),
               static_cast<double>(p.cfg.mt_fast),
               static_cast<double>(p.cfg.mt_slow),
               p.cfg.tau_fast,
               p.cfg.tau_slow,
               static_cast<double>(p.cfg.prev_n)};
  out.push_back(std::move(meta));
  for (const auto& v : p.backbone_views()) {
    NamedTensor t;
    t.name = v.name;
    t.dims = {static_cast<std::uint32_t>(v.size)};
    t.data.assign(v.data, v.data + v.size);
    out.push_back(std::move(t));
  }
  for (const auto& v : p.head_views()) {
    NamedTensor t;
    t.name = v.name;
    t.dims = {static_cast<std::uint32_t>(v.size)};
    t.data.assign(v.data, v.data + v.size);
    out.push_back(std::move(t));
  }
  return out;
}

inline RnnParams rnn_from_tensors(const std::vector<NamedTensor>& tensors) {
  const NamedTensor* meta = nullptr;
  for (const auto& t : tensors)
    if (t.name == "rnn.config") meta = &t;
  require(meta != nullptr, "rnn_from_tensors: missing config tensor");
  RnnConfig cfg;
  cfg.kind = static_cast<CellKind>(static_cast<int>(meta->data[0]));
  cfg.dim_m = static_cast<int>(meta->data[1]);
  cfg.dim_f = static_cast<int>(meta->data[2]);
  cfg.hidden = static_cast<int>(meta->data[3]);
  cfg.mt_fast = static_cast<int>(meta->data[4]);
  cfg.mt_slow = static_cast<int>(meta->data[5]);
  cfg.tau_fast = meta->data[6];
  cfg.tau_slow = meta->data[7];
  cfg.prev_n = static_cast<int>(meta->data[8]);
  SeededRng dummy(0);
  RnnParams p = make_rnn(cfg, dummy);
  auto fill = [&tensors](const ParamView& v) {
    for (const auto& t : tensors)
      if (t.name == v.name) {
        require(t.data.size() == v.size, "rnn_from_tensors: size mismatch for " + t.name);
        std::copy(t.data.begin(), t.data.end(), v.data);
        return;
      }
    throw std::runtime_error("rnn_from_tensors: missing tensor " + v.name);
  };
  for (const auto& v : p.backbone_views()) fill(v);
  for (const auto& v : p.head_views()) fill(v);
  return p;
}

}  // namespace regain
