// Deterministic planar-arm world: kinematics, scripted pick-and-place
// demonstrations, synthetic raster observations, disturbance injection, and
// dataset construction with the two-subtask division.
#pragma once

#include <array>
#include <cmath>
#include <deque>
#include <filesystem>
#include <optional>
#include <sstream>

#include "regain/checkpoint.hpp"
#include "regain/numerics.hpp"
#include "regain/rng.hpp"

namespace regain {

struct ArmConfig {
  int joints = 3;
  Vector link_lengths = {0.9, 0.7, 0.5};
  Vector joint_min = {-0.3, -2.4, -2.2};
  Vector joint_max = {2.6, 0.6, 1.2};
  // effector workspace box (x min/max, y min/max)
  double ws_xmin = -0.8, ws_xmax = 2.0, ws_ymin = -0.2, ws_ymax = 1.8;
};

struct SceneConfig {
  ArmConfig arm;
  Vector home = {1.3, -1.1, -0.2};  // canonical initial posture, joints only
  double table_y = 0.15;
  std::array<double, 2> slot_x = {0.35, 0.75};
  double slot_y = 1.25;
  double grasp_radius = 0.10;
  double slot_radius = 0.12;
  double pregrasp_height = 0.12;
  double preplace_offset = 0.22;
  double per_step_bound = 1.0;  // max |joint delta| per step, radians
  int raster_h = 16, raster_w = 16;
  double cam_xmin = -0.7, cam_xmax = 1.9, cam_ymin = -0.5, cam_ymax = 1.7;
  double object_radius = 0.09;
  int subtask1_len = 40, subtask2_len = 48;

  int channels() const { return arm.joints + 1; }
};

struct Pose {
  double x = 0.0, y = 0.0, theta = 0.0;
};

inline void check_joint_limits(std::span<const double> q, const ArmConfig& cfg) {
  require(static_cast<int>(q.size()) == cfg.joints, "joint vector dimension mismatch");
  for (int i = 0; i < cfg.joints; ++i)
    if (q[i] < cfg.joint_min[i] - 1e-12 || q[i] > cfg.joint_max[i] + 1e-12)
      throw std::invalid_argument("joint " + std::to_string(i) + " out of limits");
}

// joint positions along the chain: base, joint1, ..., effector tip
inline std::vector<std::array<double, 2>> fk_points(std::span<const double> q,
                                                    const ArmConfig& cfg) {
  std::vector<std::array<double, 2>> pts;
  pts.push_back({0.0, 0.0});
  double a = 0.0, x = 0.0, y = 0.0;
  for (int i = 0; i < cfg.joints; ++i) {
    a += q[i];
    x += cfg.link_lengths[i] * std::cos(a);
    y += cfg.link_lengths[i] * std::sin(a);
    pts.push_back({x, y});
  }
  return pts;
}

inline Pose forward_kinematics(std::span<const double> q, const ArmConfig& cfg) {
  check_joint_limits(q, cfg);
  double a = 0.0, x = 0.0, y = 0.0;
  for (int i = 0; i < cfg.joints; ++i) {
    a += q[i];
    x += cfg.link_lengths[i] * std::cos(a);
    y += cfg.link_lengths[i] * std::sin(a);
  }
  return {x, y, a};
}

inline bool in_workspace(double x, double y, const ArmConfig& cfg) {
  return x >= cfg.ws_xmin && x <= cfg.ws_xmax && y >= cfg.ws_ymin && y <= cfg.ws_ymax;
}

// 3-link planar IK with a specified tip orientation. Tries the preferred elbow
// branch first (elbow arched up, q2 < 0), then the other.
inline std::optional<Vector> inverse_kinematics(double x, double y, double phi,
                                                const ArmConfig& cfg) {
  require(cfg.joints == 3, "inverse_kinematics: 3-link arm only");
  const double l1 = cfg.link_lengths[0], l2 = cfg.link_lengths[1], l3 = cfg.link_lengths[2];
  const double wx = x - l3 * std::cos(phi);
  const double wy = y - l3 * std::sin(phi);
  const double r2 = wx * wx + wy * wy;
  const double c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
  if (c2 < -1.0 || c2 > 1.0) return std::nullopt;
  const double s2m = std::sqrt(std::max(0.0, 1.0 - c2 * c2));
  for (double s2 : {-s2m, s2m}) {
    const double q2 = std::atan2(s2, c2);
    const double q1 = std::atan2(wy, wx) - std::atan2(l2 * s2, l1 + l2 * c2);
    const double q3 = phi - q1 - q2;
    Vector q = {q1, q2, q3};
    bool ok = true;
    for (int i = 0; i < 3; ++i)
      if (q[i] < cfg.joint_min[i] || q[i] > cfg.joint_max[i]) ok = false;
    if (ok) return q;
  }
  return std::nullopt;
}

struct WorldState {
  Vector joints;
  double gripper = -1.0;  // -1 open .. +1 closed
  double obj_x = 0.0, obj_y = 0.0;
  bool held = false;
  std::array<bool, 2> slot_occupied = {false, false};
  int placed_slot = -1;
  int t = 0;
};

struct DisturbanceEvent {
  enum class Kind { A, B };  // A: teleport to a random posture, B: freeze
  Kind kind = Kind::A;
  int onset = 0;
  int duration = 10;
  Vector target_posture;  // kind A only
};

// Uniform in joint limits, rejection-sampled so the effector stays inside the
// workspace box. Reproducible in the rng state.
inline Vector sample_disturbance_posture(const SceneConfig& scene, SeededRng& rng) {
  const ArmConfig& arm = scene.arm;
  for (int tries = 0; tries < 1000; ++tries) {
    Vector q(arm.joints);
    for (int i = 0; i < arm.joints; ++i) q[i] = rng.uniform(arm.joint_min[i], arm.joint_max[i]);
    const auto pts = fk_points(q, arm);
    bool ok = true;
    for (const auto& p : pts)
      if (!in_workspace(p[0], p[1], arm)) ok = false;
    if (ok) return q;
  }
  throw std::runtime_error("sample_disturbance_posture: rejection sampling failed");
}

namespace detail {

inline double coverage(double dist, double radius, double soft) {
  return clamp((radius + 0.5 * soft - dist) / soft, 0.0, 1.0);
}

inline double seg_dist(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double u = len2 > 0.0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
  u = clamp(u, 0.0, 1.0);
  const double qx = ax + u * dx, qy = ay + u * dy;
  return std::hypot(px - qx, py - qy);
}

}  // namespace detail

// Grayscale raster in [0,1]; row 0 is the top of the scene. Discs and arm
// segments are drawn with a smooth edge so sub-cell positions remain visible
// in the intensities. Identical state gives a bit-identical raster.
inline Vector render_observation(const WorldState& s, const SceneConfig& scene) {
  const int H = scene.raster_h, W = scene.raster_w;
  Vector img(static_cast<std::size_t>(H) * W, 0.0);
  const auto pts = fk_points(s.joints, scene.arm);
  const double soft = 0.06;
  const double link_val = 0.45, link_halfwidth = 0.05;
  const double obj_val = 1.0;
  const double grip_val = 0.8, grip_radius = 0.07;
  const double slot_val = 0.7, slot_draw_radius = 0.11;
  const double tip_x = pts.back()[0], tip_y = pts.back()[1];

  for (int i = 0; i < H; ++i) {
    const double cy = scene.cam_ymax - (i + 0.5) * (scene.cam_ymax - scene.cam_ymin) / H;
    for (int j = 0; j < W; ++j) {
      const double cx = scene.cam_xmin + (j + 0.5) * (scene.cam_xmax - scene.cam_xmin) / W;
      double v = 0.0;
      for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        const double d =
            detail::seg_dist(cx, cy, pts[k][0], pts[k][1], pts[k + 1][0], pts[k + 1][1]);
        v = std::max(v, link_val * detail::coverage(d, link_halfwidth, soft));
      }
      const double dobj = std::hypot(cx - s.obj_x, cy - s.obj_y);
      v = std::max(v, obj_val * detail::coverage(dobj, scene.object_radius, soft));
      if (s.gripper > 0.0) {
        const double dg = std::hypot(cx - tip_x, cy - tip_y);
        v = std::max(v, grip_val * detail::coverage(dg, grip_radius, soft));
      }
      for (int k = 0; k < 2; ++k) {
        if (!s.slot_occupied[k]) continue;
        const double ds = std::hypot(cx - scene.slot_x[k], cy - scene.slot_y);
        v = std::max(v, slot_val * detail::coverage(ds, slot_draw_radius, soft));
      }
      img[static_cast<std::size_t>(i) * W + j] = v;
    }
  }
  return img;
}

namespace detail {

// grasp on an upward zero crossing near the object, release on a downward one
inline void gripper_transition(WorldState& s, double prev_g, const SceneConfig& scene) {
  const auto pts = fk_points(s.joints, scene.arm);
  const double tx = pts.back()[0], ty = pts.back()[1];
  if (prev_g < 0.0 && s.gripper >= 0.0 && !s.held && s.placed_slot < 0) {
    if (std::hypot(tx - s.obj_x, ty - s.obj_y) <= scene.grasp_radius) {
      s.held = true;
      s.obj_x = tx;
      s.obj_y = ty;
    }
  } else if (prev_g >= 0.0 && s.gripper < 0.0 && s.held) {
    s.held = false;
    s.obj_x = tx;
    s.obj_y = ty;
    for (int k = 0; k < 2; ++k) {
      if (s.slot_occupied[k]) continue;
      if (std::hypot(tx - scene.slot_x[k], ty - scene.slot_y) <= scene.slot_radius) {
        s.slot_occupied[k] = true;
        s.placed_slot = k;
      }
    }
  }
}

}  // namespace detail

inline const DisturbanceEvent* active_disturbance(int t,
                                                  const std::vector<DisturbanceEvent>& evs) {
  for (const auto& e : evs)
    if (t >= e.onset && t < e.onset + e.duration) return &e;
  return nullptr;
}

// One world tick. dm is a raw joint+gripper delta (radians / gripper units).
inline WorldState step(const WorldState& state, std::span<const double> dm,
                       const std::vector<DisturbanceEvent>& events, const SceneConfig& scene) {
  const int D = scene.arm.joints;
  require(static_cast<int>(dm.size()) == D + 1, "step: command dimension mismatch");
  WorldState s = state;

  if (const DisturbanceEvent* ev = active_disturbance(state.t, events)) {
    if (ev->kind == DisturbanceEvent::Kind::A && state.t == ev->onset) {
      s.joints = ev->target_posture;
      check_joint_limits(s.joints, scene.arm);
      if (s.held) {
        const auto pts = fk_points(s.joints, scene.arm);
        s.obj_x = pts.back()[0];
        s.obj_y = pts.back()[1];
      }
    }
    // posture held for the rest of the window; commands are ignored
    s.t = state.t + 1;
    return s;
  }

  for (int i = 0; i < D + 1; ++i)
    if (std::fabs(dm[i]) > scene.per_step_bound + 1e-9)
      throw std::invalid_argument("step: command exceeds per-step bound");

  for (int i = 0; i < D; ++i)
    s.joints[i] = clamp(state.joints[i] + dm[i], scene.arm.joint_min[i], scene.arm.joint_max[i]);
  const double prev_g = state.gripper;
  s.gripper = clamp(state.gripper + dm[D], -1.0, 1.0);

  if (s.held) {
    const auto pts = fk_points(s.joints, scene.arm);
    s.obj_x = pts.back()[0];
    s.obj_y = pts.back()[1];
  }
  detail::gripper_transition(s, prev_g, scene);
  s.t = state.t + 1;
  return s;
}

struct TrajectoryData {
  int id = 0;
  int subtask = 1;      // 1 or 2
  double object_x = 0;  // pick position for the episode this pair came from
  int slot = 0;         // vacant slot index the pair places into
  int split = 0;        // 0 train, 1 validation
  Matrix m;             // T x (D+1), raw units
  Matrix o;             // T x (H*W)
};

namespace detail {

inline double min_jerk(double u) {
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

// piecewise min-jerk through waypoints; durations are interval counts
inline std::vector<Vector> sample_path(const std::vector<Vector>& waypoints,
                                       const std::vector<int>& durations) {
  require(waypoints.size() == durations.size() + 1, "sample_path: waypoint/duration mismatch");
  std::vector<Vector> out;
  out.push_back(waypoints[0]);
  for (std::size_t seg = 0; seg < durations.size(); ++seg) {
    const Vector& a = waypoints[seg];
    const Vector& b = waypoints[seg + 1];
    for (int k = 1; k <= durations[seg]; ++k) {
      const double s = min_jerk(static_cast<double>(k) / durations[seg]);
      Vector q(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) q[i] = a[i] + (b[i] - a[i]) * s;
      out.push_back(q);
    }
  }
  return out;
}

inline std::vector<int> scale_durations(const std::vector<int>& proto, int total_points) {
  int proto_sum = 0;
  for (int d : proto) proto_sum += d;
  const int want = total_points - 1;
  std::vector<int> out(proto.size());
  int acc = 0;
  for (std::size_t i = 0; i < proto.size(); ++i) {
    out[i] = std::max(1, static_cast<int>(std::lround(double(proto[i]) * want / proto_sum)));
    acc += out[i];
  }
  out.back() += want - acc;  // absorb rounding in the final (longest) segment
  require(out.back() >= 1, "scale_durations: sequence too short");
  return out;
}

inline Vector ik_or_throw(double x, double y, double phi, const ArmConfig& arm,
                          const std::string& what) {
  auto q = inverse_kinematics(x, y, phi, arm);
  if (!q) throw std::runtime_error("generate_demonstration: unreachable waypoint (" + what + ")");
  return *q;
}

// replay interpolated joints/gripper through the world to collect rasters
inline TrajectoryData roll_demo(const std::vector<Vector>& joints_path,
                                const Vector& gripper_path, WorldState init,
                                const SceneConfig& scene, int subtask) {
  const int D = scene.arm.joints;
  const int T = static_cast<int>(joints_path.size());
  TrajectoryData tr;
  tr.subtask = subtask;
  tr.m = Matrix(T, D + 1);
  tr.o = Matrix(T, static_cast<std::size_t>(scene.raster_h) * scene.raster_w);
  WorldState s = init;
  for (int t = 0; t < T; ++t) {
    const double prev_g = s.gripper;
    s.joints = joints_path[t];
    s.gripper = gripper_path[t];
    if (s.held) {
      const auto pts = fk_points(s.joints, scene.arm);
      s.obj_x = pts.back()[0];
      s.obj_y = pts.back()[1];
    }
    gripper_transition(s, prev_g, scene);
    s.t = t;
    for (int i = 0; i < D; ++i) tr.m(t, i) = s.joints[i];
    tr.m(t, D) = s.gripper;
    const Vector img = render_observation(s, scene);
    std::copy(img.begin(), img.end(), tr.o.row(t));
  }
  return tr;
}

}  // namespace detail

// Scripted stand-in for direct teaching: min-jerk joint interpolation through
// pick (subtask 1) and place (subtask 2) waypoints. Both subtasks start and
// end at the canonical initial posture.
inline std::pair<TrajectoryData, TrajectoryData> generate_demonstration(double object_x,
                                                                        int place_slot,
                                                                        const SceneConfig& scene) {
  require(place_slot == 0 || place_slot == 1, "generate_demonstration: bad slot index");
  const ArmConfig& arm = scene.arm;
  const double oy = scene.table_y;
  if (!in_workspace(object_x, oy, arm))
    throw std::invalid_argument("generate_demonstration: object outside workspace");

  const auto home_pts = fk_points(scene.home, arm);
  if (std::hypot(home_pts.back()[0] - object_x, home_pts.back()[1] - oy) < 0.05)
    throw std::invalid_argument("generate_demonstration: object at home effector, degenerate");

  const double down = -1.5707963267948966;
  const Vector q_pre = detail::ik_or_throw(object_x, oy + scene.pregrasp_height, down, arm,
                                           "pre-grasp");
  const Vector q_grasp = detail::ik_or_throw(object_x, oy, down, arm, "grasp");

  // subtask 1: home -> pre-grasp -> grasp -> close -> lift -> home
  std::vector<Vector> wp1 = {scene.home, q_pre, q_grasp, q_grasp, q_pre, scene.home};
  Vector g1 = {-1, -1, -1, 1, 1, 1};
  const auto d1 = detail::scale_durations({10, 6, 6, 6, 11}, scene.subtask1_len);

  const double sx = scene.slot_x[place_slot], sy = scene.slot_y;
  const Vector q_prep = detail::ik_or_throw(sx - scene.preplace_offset, sy, 0.0, arm,
                                            "pre-place");
  const Vector q_place = detail::ik_or_throw(sx, sy, 0.0, arm, "place");

  // subtask 2: home -> pre-place -> place -> open -> retreat -> home
  std::vector<Vector> wp2 = {scene.home, q_prep, q_place, q_place, q_prep, scene.home};
  Vector g2 = {1, 1, 1, -1, -1, -1};
  const auto d2 = detail::scale_durations({12, 7, 6, 7, 15}, scene.subtask2_len);

  auto joints1 = detail::sample_path(wp1, d1);
  auto grip1 = detail::sample_path({{g1[0]}, {g1[1]}, {g1[2]}, {g1[3]}, {g1[4]}, {g1[5]}}, d1);
  auto joints2 = detail::sample_path(wp2, d2);
  auto grip2 = detail::sample_path({{g2[0]}, {g2[1]}, {g2[2]}, {g2[3]}, {g2[4]}, {g2[5]}}, d2);
  Vector gv1(grip1.size()), gv2(grip2.size());
  for (std::size_t i = 0; i < grip1.size(); ++i) gv1[i] = grip1[i][0];
  for (std::size_t i = 0; i < grip2.size(); ++i) gv2[i] = grip2[i][0];

  WorldState init1;
  init1.joints = scene.home;
  init1.gripper = -1.0;
  init1.obj_x = object_x;
  init1.obj_y = oy;
  init1.slot_occupied[1 - place_slot] = true;

  TrajectoryData t1 = detail::roll_demo(joints1, gv1, init1, scene, 1);

  // subtask 2 starts where subtask 1 ended: home posture, object held
  WorldState init2;
  init2.joints = scene.home;
  init2.gripper = 1.0;
  init2.held = true;
  init2.obj_x = home_pts.back()[0];
  init2.obj_y = home_pts.back()[1];
  init2.slot_occupied[1 - place_slot] = true;

  TrajectoryData t2 = detail::roll_demo(joints2, gv2, init2, scene, 2);

  for (TrajectoryData* tr : {&t1, &t2}) {
    tr->object_x = object_x;
    tr->slot = place_slot;
  }
  return {std::move(t1), std::move(t2)};
}

// Per-channel [-1, 1] scaling fit on the training split only.
struct NormStats {
  Vector cmin, cmax;

  double scale_value(int ch, double v) const {
    return 2.0 * (v - cmin[ch]) / (cmax[ch] - cmin[ch]) - 1.0;
  }
  double unscale_value(int ch, double v) const {
    return cmin[ch] + (v + 1.0) * 0.5 * (cmax[ch] - cmin[ch]);
  }
  double scale_delta(int ch, double dv) const { return 2.0 * dv / (cmax[ch] - cmin[ch]); }
  double unscale_delta(int ch, double dv) const { return dv * 0.5 * (cmax[ch] - cmin[ch]); }

  Matrix scale_rows(const Matrix& m) const {
    Matrix out(m.rows(), m.cols());
    for (std::size_t t = 0; t < m.rows(); ++t)
      for (std::size_t c = 0; c < m.cols(); ++c) out(t, c) = scale_value(c, m(t, c));
    return out;
  }
  Vector scale_row(std::span<const double> row) const {
    Vector out(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) out[c] = scale_value(c, row[c]);
    return out;
  }
  Vector unscale_row(std::span<const double> row) const {
    Vector out(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) out[c] = unscale_value(c, row[c]);
    return out;
  }
};

struct GridSpec {
  int n_positions = 20;
  double x0 = 0.95;
  double dx = 0.02;
};

struct Dataset {
  std::vector<TrajectoryData> trajs;
  NormStats stats;
  GridSpec grid;
  int raster_h = 16, raster_w = 16;
  int channels = 4;

  std::vector<const TrajectoryData*> split(int which) const {
    std::vector<const TrajectoryData*> out;
    for (const auto& t : trajs)
      if (t.split == which) out.push_back(&t);
    return out;
  }
  std::vector<const TrajectoryData*> training() const { return split(0); }
  std::vector<const TrajectoryData*> validation() const { return split(1); }
};

// Positions on a uniform grid; alternating positions go to train/validation
// (the parity is picked by split_seed). Stats come from training data only.
inline Dataset build_dataset(const SceneConfig& scene, const GridSpec& grid,
                             std::uint64_t split_seed) {
  require(grid.n_positions >= 2, "build_dataset: grid must yield at least 2 positions");
  Dataset ds;
  ds.grid = grid;
  ds.raster_h = scene.raster_h;
  ds.raster_w = scene.raster_w;
  ds.channels = scene.channels();
  const int parity = static_cast<int>(split_seed & 1);
  int next_id = 0;
  for (int i = 0; i < grid.n_positions; ++i) {
    const double x = grid.x0 + i * grid.dx;
    if (!in_workspace(x, scene.table_y, scene.arm))
      throw std::invalid_argument("build_dataset: grid position outside workspace");
    const int split = (i % 2 == parity) ? 0 : 1;
    for (int slot = 0; slot < 2; ++slot) {
      auto [t1, t2] = generate_demonstration(x, slot, scene);
      t1.id = next_id++;
      t1.split = split;
      t2.id = next_id++;
      t2.split = split;
      ds.trajs.push_back(std::move(t1));
      ds.trajs.push_back(std::move(t2));
    }
  }
  const int C = ds.channels;
  ds.stats.cmin.assign(C, 1e300);
  ds.stats.cmax.assign(C, -1e300);
  for (const auto& tr : ds.trajs) {
    if (tr.split != 0) continue;
    for (std::size_t t = 0; t < tr.m.rows(); ++t)
      for (int c = 0; c < C; ++c) {
        ds.stats.cmin[c] = std::min(ds.stats.cmin[c], tr.m(t, c));
        ds.stats.cmax[c] = std::max(ds.stats.cmax[c], tr.m(t, c));
      }
  }
  for (int c = 0; c < C; ++c)
    require(ds.stats.cmax[c] - ds.stats.cmin[c] > 1e-9,
            "build_dataset: degenerate channel " + std::to_string(c));
  return ds;
}

// Gaussian noise on the joint channels (scaled units) and one global intensity
// jitter factor on the rasters; both clamped back to their valid ranges.
inline void augment_scaled(Matrix& m_scaled, Matrix& rasters, double sigma, double jitter,
                           SeededRng& rng) {
  if (sigma > 0.0) {
    for (std::size_t i = 0; i < m_scaled.size(); ++i)
      m_scaled.data()[i] = clamp(m_scaled.data()[i] + rng.normal(0.0, sigma), -1.0, 1.0);
  }
  if (jitter > 0.0) {
    const double f = 1.0 + rng.uniform(-jitter, jitter);
    for (std::size_t i = 0; i < rasters.size(); ++i)
      rasters.data()[i] = clamp(rasters.data()[i] * f, 0.0, 1.0);
  }
}

// --- dataset on disk: manifest + per-trajectory flat binary files ---

inline void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  std::ostringstream man;
  man << "# regain dataset manifest\n";
  man << "channels = " << ds.channels << "\n";
  man << "raster_h = " << ds.raster_h << "\n";
  man << "raster_w = " << ds.raster_w << "\n";
  man << "grid_n = " << ds.grid.n_positions << "\n";
  man << "grid_x0 = " << fmt_g17(ds.grid.x0) << "\n";
  man << "grid_dx = " << fmt_g17(ds.grid.dx) << "\n";
  man << "norm_min =";
  for (double v : ds.stats.cmin) man << " " << fmt_g17(v);
  man << "\nnorm_max =";
  for (double v : ds.stats.cmax) man << " " << fmt_g17(v);
  man << "\n";
  for (const auto& tr : ds.trajs) {
    man << "traj = " << tr.id << " " << tr.subtask << " " << fmt_g17(tr.object_x) << " "
        << tr.slot << " " << tr.m.rows() << " " << tr.split << "\n";
    save_f64_array(dir / ("traj_" + std::to_string(tr.id) + "_m.bin"), tr.m.storage());
    save_f64_array(dir / ("traj_" + std::to_string(tr.id) + "_o.bin"), tr.o.storage());
  }
  write_text(dir / "manifest.txt", man.str());
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  const std::string text = read_text(dir / "manifest.txt");
  Dataset ds;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key, eq;
    ls >> key >> eq;
    if (key == "channels") ls >> ds.channels;
    else if (key == "raster_h") ls >> ds.raster_h;
    else if (key == "raster_w") ls >> ds.raster_w;
    else if (key == "grid_n") ls >> ds.grid.n_positions;
    else if (key == "grid_x0") ls >> ds.grid.x0;
    else if (key == "grid_dx") ls >> ds.grid.dx;
    else if (key == "norm_min") {
      double v;
      while (ls >> v) ds.stats.cmin.push_back(v);
    } else if (key == "norm_max") {
      double v;
      while (ls >> v) ds.stats.cmax.push_back(v);
    } else if (key == "traj") {
      TrajectoryData tr;
      std::size_t len = 0;
      ls >> tr.id >> tr.subtask >> tr.object_x >> tr.slot >> len >> tr.split;
      tr.m = Matrix(len, ds.channels);
      tr.o = Matrix(len, static_cast<std::size_t>(ds.raster_h) * ds.raster_w);
      tr.m.storage() =
          load_f64_array(dir / ("traj_" + std::to_string(tr.id) + "_m.bin"), tr.m.size());
      tr.o.storage() =
          load_f64_array(dir / ("traj_" + std::to_string(tr.id) + "_o.bin"), tr.o.size());
      ds.trajs.push_back(std::move(tr));
    }
  }
  require(!ds.trajs.empty(), "load_dataset: no trajectories in manifest");
  return ds;
}

}  // namespace regain
