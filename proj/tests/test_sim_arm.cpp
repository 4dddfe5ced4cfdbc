#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <set>

#include "regain/rng.hpp"
#include "regain/sim_arm.hpp"

using namespace regain;

namespace {

// Independent FK oracle: chain of complex rotations.
Pose fk_complex_oracle(const Vector& q, const ArmConfig& cfg) {
  std::complex<double> pos(0.0, 0.0);
  double a = 0.0;
  for (int i = 0; i < cfg.joints; ++i) {
    a += q[i];
    pos += cfg.link_lengths[i] * std::polar(1.0, a);
  }
  return {pos.real(), pos.imag(), a};
}

}  // namespace

TEST(ForwardKinematics, StraightArm) {
  ArmConfig cfg;
  cfg.link_lengths = {1.0, 1.0, 1.0};
  cfg.joint_min = {-3.0, -3.0, -3.0};
  cfg.joint_max = {3.0, 3.0, 3.0};
  Pose p = forward_kinematics(Vector{0.0, 0.0, 0.0}, cfg);
  EXPECT_NEAR(p.x, 3.0, 1e-12);
  EXPECT_NEAR(p.y, 0.0, 1e-12);
  EXPECT_NEAR(p.theta, 0.0, 1e-12);
}

TEST(ForwardKinematics, QuarterTurnAtBase) {
  ArmConfig cfg;
  cfg.link_lengths = {1.0, 1.0, 1.0};
  cfg.joint_min = {-3.0, -3.0, -3.0};
  cfg.joint_max = {3.0, 3.0, 3.0};
  const double half_pi = 1.5707963267948966;
  Pose p = forward_kinematics(Vector{half_pi, 0.0, 0.0}, cfg);
  EXPECT_NEAR(p.x, 0.0, 1e-12);
  EXPECT_NEAR(p.y, 3.0, 1e-12);
  EXPECT_NEAR(p.theta, half_pi, 1e-12);
}

TEST(ForwardKinematics, MatchesComplexRotationOracle) {
  ArmConfig cfg;
  SeededRng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    Vector q(3);
    for (int i = 0; i < 3; ++i) q[i] = rng.uniform(cfg.joint_min[i], cfg.joint_max[i]);
    Pose a = forward_kinematics(q, cfg);
    Pose b = fk_complex_oracle(q, cfg);
    EXPECT_NEAR(a.x, b.x, 1e-10);
    EXPECT_NEAR(a.y, b.y, 1e-10);
    EXPECT_NEAR(a.theta, b.theta, 1e-10);
  }
}

TEST(ForwardKinematics, OutOfLimitThrows) {
  ArmConfig cfg;
  Vector q = {cfg.joint_max[0] + 0.1, 0.0, 0.0};
  EXPECT_THROW(forward_kinematics(q, cfg), std::invalid_argument);
}

TEST(InverseKinematics, RoundTripsThroughFk) {
  SceneConfig scene;
  SeededRng rng(5);
  int solved = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const double x = rng.uniform(0.2, 1.5);
    const double y = rng.uniform(0.1, 1.4);
    const double phi = rng.uniform(-1.6, 0.5);
    auto q = inverse_kinematics(x, y, phi, scene.arm);
    if (!q) continue;
    ++solved;
    Pose p = forward_kinematics(*q, scene.arm);
    EXPECT_NEAR(p.x, x, 1e-9);
    EXPECT_NEAR(p.y, y, 1e-9);
    EXPECT_NEAR(p.theta, phi, 1e-9);
  }
  EXPECT_GT(solved, 50);
}

TEST(Demonstration, LengthsMatchDeskDefaults) {
  // 161/192 average steps at full scale, 40/48 here (1/4 scale)
  SceneConfig scene;
  auto [t1, t2] = generate_demonstration(1.05, 0, scene);
  EXPECT_EQ(t1.m.rows(), 40u);
  EXPECT_EQ(t2.m.rows(), 48u);
  EXPECT_EQ(t1.subtask, 1);
  EXPECT_EQ(t2.subtask, 2);
}

TEST(Demonstration, ObjectAtHomeEffectorIsDegenerate) {
  SceneConfig scene;
  const auto pts = fk_points(scene.home, scene.arm);
  SceneConfig bad = scene;
  bad.table_y = pts.back()[1];
  EXPECT_THROW(generate_demonstration(pts.back()[0], 0, bad), std::invalid_argument);
}

TEST(Demonstration, UnreachableObjectThrows) {
  SceneConfig scene;
  EXPECT_THROW(generate_demonstration(1.95, 0, scene), std::runtime_error);
}

TEST(Demonstration, StartsAndEndsAtInitialPosture) {
  SceneConfig scene;
  SeededRng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const double x = rng.uniform(0.95, 1.33);
    const int slot = static_cast<int>(rng.index(2));
    auto [t1, t2] = generate_demonstration(x, slot, scene);
    for (const TrajectoryData* tr : {&t1, &t2}) {
      for (int j = 0; j < 3; ++j) {
        EXPECT_NEAR(tr->m(0, j), scene.home[j], 1e-9);
        EXPECT_NEAR(tr->m(tr->m.rows() - 1, j), scene.home[j], 1e-9);
      }
    }
  }
}

TEST(Demonstration, GraspAndReleaseEventsHappen) {
  SceneConfig scene;
  auto [t1, t2] = generate_demonstration(1.11, 1, scene);
  EXPECT_DOUBLE_EQ(t1.m(t1.m.rows() - 1, 3), 1.0);   // ends holding
  EXPECT_DOUBLE_EQ(t2.m(t2.m.rows() - 1, 3), -1.0);  // ends released
  for (const TrajectoryData* tr : {&t1, &t2})
    for (std::size_t t = 1; t < tr->m.rows(); ++t)
      for (int c = 0; c < 4; ++c)
        EXPECT_LE(std::fabs(tr->m(t, c) - tr->m(t - 1, c)), scene.per_step_bound);
}

TEST(Render, GoldenEmptyScene) {
  SceneConfig scene;
  WorldState ws;
  ws.joints = scene.home;
  ws.gripper = -1.0;
  ws.obj_x = -10.0;
  ws.obj_y = -10.0;
  const Vector img = render_observation(ws, scene);

  std::ifstream f(std::string(GOLDEN_DIR) + "/empty_scene.txt");
  ASSERT_TRUE(f.good()) << "golden fixture not found";
  std::string header;
  std::getline(f, header);
  for (std::size_t i = 0; i < img.size(); ++i) {
    double v;
    f >> v;
    EXPECT_EQ(img[i], v) << "pixel " << i;
  }
}

TEST(Render, DeterministicBitExact) {
  SceneConfig scene;
  WorldState ws;
  ws.joints = scene.home;
  ws.gripper = 0.5;
  ws.obj_x = 1.07;
  ws.obj_y = scene.table_y;
  ws.slot_occupied[0] = true;
  const Vector a = render_observation(ws, scene);
  const Vector b = render_observation(ws, scene);
  EXPECT_EQ(a, b);
}

TEST(Render, ObjectShiftByOneCellChangesPixels) {
  SceneConfig scene;
  WorldState a, b;
  a.joints = b.joints = scene.home;
  a.gripper = b.gripper = -1.0;
  a.obj_x = 1.05;
  a.obj_y = scene.table_y;
  const double cell = (scene.cam_xmax - scene.cam_xmin) / scene.raster_w;
  b.obj_x = 1.05 + cell;
  b.obj_y = scene.table_y;
  const Vector ia = render_observation(a, scene);
  const Vector ib = render_observation(b, scene);
  int diff = 0;
  for (std::size_t i = 0; i < ia.size(); ++i)
    if (ia[i] != ib[i]) ++diff;
  EXPECT_GT(diff, 0);
}

TEST(Render, HeldObjectCentersAtEffector) {
  SceneConfig scene;
  WorldState ws;
  ws.joints = scene.home;
  ws.gripper = 1.0;
  ws.held = true;
  const auto pts = fk_points(ws.joints, scene.arm);
  ws.obj_x = pts.back()[0];
  ws.obj_y = pts.back()[1];
  const Vector img = render_observation(ws, scene);
  std::size_t arg = 0;
  for (std::size_t i = 1; i < img.size(); ++i)
    if (img[i] > img[arg]) arg = i;
  const int row = static_cast<int>(arg) / scene.raster_w;
  const int col = static_cast<int>(arg) % scene.raster_w;
  const int exp_col = static_cast<int>((ws.obj_x - scene.cam_xmin) /
                                       (scene.cam_xmax - scene.cam_xmin) * scene.raster_w);
  const int exp_row = static_cast<int>((scene.cam_ymax - ws.obj_y) /
                                       (scene.cam_ymax - scene.cam_ymin) * scene.raster_h);
  EXPECT_NEAR(col, exp_col, 1);
  EXPECT_NEAR(row, exp_row, 1);
}

TEST(Step, FreezeHoldsEverythingButTime) {
  SceneConfig scene;
  WorldState ws;
  ws.joints = scene.home;
  ws.gripper = -1.0;
  ws.obj_x = 1.1;
  ws.obj_y = scene.table_y;
  ws.t = 5;
  DisturbanceEvent ev;
  ev.kind = DisturbanceEvent::Kind::B;
  ev.onset = 5;
  ev.duration = 10;
  Vector dm = {0.3, -0.2, 0.1, 0.5};
  WorldState next = step(ws, dm, {ev}, scene);
  EXPECT_EQ(next.joints, ws.joints);
  EXPECT_EQ(next.gripper, ws.gripper);
  EXPECT_EQ(next.t, 6);
}

TEST(Step, ZeroCommandOnlyAdvancesTime) {
  SceneConfig scene;
  WorldState ws;
  ws.joints = scene.home;
  ws.gripper = -0.4;
  ws.obj_x = 1.2;
  ws.obj_y = scene.table_y;
  Vector dm(4, 0.0);
  WorldState next = step(ws, dm, {}, scene);
  EXPECT_EQ(next.joints, ws.joints);
  EXPECT_EQ(next.gripper, ws.gripper);
  EXPECT_EQ(next.obj_x, ws.obj_x);
  EXPECT_EQ(next.t, ws.t + 1);
}

TEST(Step, TeleportIsSeedReproducible) {
  SceneConfig scene;
  auto draw = [&scene](std::uint64_t seed) {
    SeededRng rng(seed);
    return sample_disturbance_posture(scene, rng);
  };
  const Vector a = draw(99), b = draw(99), c = draw(100);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  check_joint_limits(a, scene.arm);

  WorldState ws;
  ws.joints = scene.home;
  ws.gripper = -1.0;
  ws.obj_x = 1.1;
  ws.obj_y = scene.table_y;
  ws.t = 3;
  DisturbanceEvent ev;
  ev.kind = DisturbanceEvent::Kind::A;
  ev.onset = 3;
  ev.target_posture = a;
  Vector dm(4, 0.0);
  WorldState next = step(ws, dm, {ev}, scene);
  EXPECT_EQ(next.joints, a);
  WorldState later = step(next, Vector{0.5, 0.5, 0.5, 0.0}, {ev}, scene);
  EXPECT_EQ(later.joints, a);  // held through the window, commands ignored
}

TEST(Step, CommandDimensionMismatchThrows) {
  SceneConfig scene;
  WorldState ws;
  ws.joints = scene.home;
  Vector dm(3, 0.0);
  EXPECT_THROW(step(ws, dm, {}, scene), std::invalid_argument);
}

TEST(Step, GraspRequiresProximityAndCrossing) {
  SceneConfig scene;
  WorldState ws;
  ws.joints = scene.home;
  ws.gripper = -0.05;
  ws.obj_x = 1.1;  // far from the home effector
  ws.obj_y = scene.table_y;
  WorldState next = step(ws, Vector{0, 0, 0, 0.2}, {}, scene);
  EXPECT_FALSE(next.held);  // crossed but not close

  const auto pts = fk_points(scene.home, scene.arm);
  ws.obj_x = pts.back()[0];
  ws.obj_y = pts.back()[1];
  ws.gripper = -0.05;
  next = step(ws, Vector{0, 0, 0, 0.2}, {}, scene);
  EXPECT_TRUE(next.held);

  next.gripper = 0.05;
  WorldState rel = step(next, Vector{0, 0, 0, -0.2}, {}, scene);
  EXPECT_FALSE(rel.held);
  EXPECT_EQ(rel.placed_slot, -1);  // dropped away from the slots
}

TEST(Step, JointsNeverLeaveLimits) {
  SceneConfig scene;
  SeededRng rng(31);
  WorldState ws;
  ws.joints = scene.home;
  ws.gripper = -1.0;
  ws.obj_x = 1.1;
  ws.obj_y = scene.table_y;
  for (int t = 0; t < 500; ++t) {
    Vector dm(4);
    for (auto& v : dm) v = rng.uniform(-scene.per_step_bound, scene.per_step_bound);
    ws = step(ws, dm, {}, scene);
    for (int i = 0; i < 3; ++i) {
      EXPECT_GE(ws.joints[i], scene.arm.joint_min[i]);
      EXPECT_LE(ws.joints[i], scene.arm.joint_max[i]);
    }
  }
}

TEST(Dataset, SplitCountsAndDeterminism) {
  SceneConfig scene;
  GridSpec grid;
  Dataset ds = build_dataset(scene, grid, 11);
  EXPECT_EQ(ds.trajs.size(), 80u);  // 20 positions x 2 slots x 2 subtasks
  EXPECT_EQ(ds.training().size(), 40u);
  EXPECT_EQ(ds.validation().size(), 40u);

  Dataset ds2 = build_dataset(scene, grid, 11);
  for (std::size_t i = 0; i < ds.trajs.size(); ++i) {
    EXPECT_EQ(ds.trajs[i].split, ds2.trajs[i].split);
    EXPECT_EQ(ds.trajs[i].m.storage(), ds2.trajs[i].m.storage());
    EXPECT_EQ(ds.trajs[i].o.storage(), ds2.trajs[i].o.storage());
  }

  std::set<double> train_x, val_x;
  for (const auto& tr : ds.trajs) (tr.split == 0 ? train_x : val_x).insert(tr.object_x);
  for (double x : train_x) EXPECT_EQ(val_x.count(x), 0u);
}

TEST(Dataset, GridOutsideWorkspaceThrows) {
  SceneConfig scene;
  GridSpec grid;
  grid.x0 = 2.4;
  EXPECT_THROW(build_dataset(scene, grid, 1), std::invalid_argument);
}

TEST(Dataset, NormalizationRoundTrip) {
  SceneConfig scene;
  GridSpec grid;
  grid.n_positions = 6;
  Dataset ds = build_dataset(scene, grid, 1);
  for (const auto* tr : ds.training()) {
    for (std::size_t t = 0; t < tr->m.rows(); ++t) {
      const Vector scaled = ds.stats.scale_row(tr->m.row_span(t));
      for (double v : scaled) {
        EXPECT_GE(v, -1.0 - 1e-12);
        EXPECT_LE(v, 1.0 + 1e-12);
      }
      const Vector back = ds.stats.unscale_row(scaled);
      for (std::size_t c = 0; c < back.size(); ++c) EXPECT_NEAR(back[c], tr->m(t, c), 1e-12);
    }
  }
}

TEST(Dataset, SaveLoadRoundTrip) {
  SceneConfig scene;
  GridSpec grid;
  grid.n_positions = 4;
  Dataset ds = build_dataset(scene, grid, 7);
  const auto dir = std::filesystem::temp_directory_path() / "regain_ds_test";
  std::filesystem::remove_all(dir);
  save_dataset(dir, ds);
  Dataset back = load_dataset(dir);
  ASSERT_EQ(back.trajs.size(), ds.trajs.size());
  for (std::size_t i = 0; i < ds.trajs.size(); ++i) {
    EXPECT_EQ(back.trajs[i].id, ds.trajs[i].id);
    EXPECT_EQ(back.trajs[i].subtask, ds.trajs[i].subtask);
    EXPECT_EQ(back.trajs[i].split, ds.trajs[i].split);
    EXPECT_EQ(back.trajs[i].m.storage(), ds.trajs[i].m.storage());
    EXPECT_EQ(back.trajs[i].o.storage(), ds.trajs[i].o.storage());
  }
  EXPECT_EQ(back.stats.cmin, ds.stats.cmin);
  EXPECT_EQ(back.stats.cmax, ds.stats.cmax);
  std::filesystem::remove_all(dir);
}

TEST(Augment, ZeroNoiseZeroJitterIsIdentity) {
  SceneConfig scene;
  auto [t1, t2] = generate_demonstration(1.05, 0, scene);
  Dataset ds = build_dataset(scene, GridSpec{4, 0.99, 0.04}, 1);
  Matrix m = ds.stats.scale_rows(t1.m);
  Matrix o = t1.o;
  const Matrix m0 = m, o0 = o;
  SeededRng rng(1);
  augment_scaled(m, o, 0.0, 0.0, rng);
  EXPECT_EQ(m.storage(), m0.storage());
  EXPECT_EQ(o.storage(), o0.storage());
}

TEST(Augment, NoiseSigmaMatchesConfigured) {
  const double sigma = 0.01;
  Matrix m(2500, 4, 0.0);
  Matrix o(1, 1, 0.5);
  SeededRng rng(8);
  augment_scaled(m, o, sigma, 0.0, rng);
  double ss = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) ss += m.data()[i] * m.data()[i];
  const double emp = std::sqrt(ss / static_cast<double>(m.size()));
  EXPECT_NEAR(emp, sigma, 0.05 * sigma);
}

TEST(Augment, StaysClamped) {
  Matrix m(100, 4, 0.999);
  Matrix o(100, 4, 0.98);
  SeededRng rng(9);
  augment_scaled(m, o, 0.05, 0.10, rng);
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_GE(m.data()[i], -1.0);
    EXPECT_LE(m.data()[i], 1.0);
  }
  for (std::size_t i = 0; i < o.size(); ++i) {
    EXPECT_GE(o.data()[i], 0.0);
    EXPECT_LE(o.data()[i], 1.0);
  }
}
