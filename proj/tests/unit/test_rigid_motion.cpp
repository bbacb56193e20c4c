#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "groundflow/error.hpp"
#include "groundflow/rigid_motion.hpp"

using namespace groundflow;

namespace
{
std::vector<Correspondence> make_pairs(
  const std::vector<Vec2> & p, double theta, Vec2 t, double noise = 0.0, std::uint64_t seed = 1)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, noise > 0 ? noise : 1.0);
  std::vector<Correspondence> out;
  for (const auto & pi : p) {
    Vec2 q = rotate(pi, theta) + t;
    if (noise > 0) {
      q.x += n(rng);
      q.y += n(rng);
    }
    out.push_back({pi, q});
  }
  return out;
}

std::vector<Vec2> random_points(std::size_t n, std::uint64_t seed, double extent = 100.0)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-extent, extent);
  std::vector<Vec2> p(n);
  for (auto & v : p) {
    v = {u(rng), u(rng)};
  }
  return p;
}

// Objective at the best translation for a fixed angle.
double objective_at(double theta, const std::vector<Correspondence> & pairs)
{
  Vec2 pm, qm;
  for (const auto & c : pairs) {
    pm = pm + c.p;
    qm = qm + c.q;
  }
  pm = pm * (1.0 / pairs.size());
  qm = qm * (1.0 / pairs.size());
  const Vec2 t = qm - rotate(pm, theta);
  double s = 0.0;
  for (const auto & c : pairs) {
    s += (rotate(c.p, theta) + t - c.q).squared_norm();
  }
  return s;
}

double grid_minimum(const std::vector<Correspondence> & pairs, double lo, double hi, double step, double * arg = nullptr)
{
  double best = std::numeric_limits<double>::infinity();
  for (double th = lo; th <= hi; th += step) {
    const double v = objective_at(th, pairs);
    if (v < best) {
      best = v;
      if (arg) {
        *arg = th;
      }
    }
  }
  return best;
}
}  // namespace

TEST(Svd2, MatchesGenericSolver)
{
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 1000; ++i) {
    const Mat2 m{u(rng), u(rng), u(rng), u(rng)};
    const auto s = svd2x2(m);
    Eigen::Matrix2d e;
    e << m.a, m.b, m.c, m.d;
    const Eigen::JacobiSVD<Eigen::Matrix2d> ref(e);
    EXPECT_NEAR(s.s1, ref.singularValues()(0), 1e-9);
    EXPECT_NEAR(s.s2, ref.singularValues()(1), 1e-9);
    const Mat2 back = s.u * Mat2{s.s1, 0, 0, s.s2} * s.v.transposed();
    EXPECT_NEAR(back.a, m.a, 1e-9);
    EXPECT_NEAR(back.b, m.b, 1e-9);
    EXPECT_NEAR(back.c, m.c, 1e-9);
    EXPECT_NEAR(back.d, m.d, 1e-9);
    EXPECT_NEAR(std::abs(s.u.det()), 1.0, 1e-12);
    EXPECT_NEAR(std::abs(s.v.det()), 1.0, 1e-12);
  }
}

TEST(EstimateRigid, Identity)
{
  const auto pairs = make_pairs(random_points(5, 1), 0.0, {0, 0});
  const auto m = estimate_rigid(pairs);
  EXPECT_NEAR(m.theta, 0.0, 1e-12);
  EXPECT_NEAR(m.t.x, 0.0, 1e-9);
  EXPECT_NEAR(m.t.y, 0.0, 1e-9);
  EXPECT_NEAR(m.mean_residual, 0.0, 1e-9);
  EXPECT_EQ(m.n_points, 5u);
}

TEST(EstimateRigid, PureTranslation)
{
  const auto m = estimate_rigid(make_pairs(random_points(8, 2), 0.0, {3, 4}));
  EXPECT_NEAR(m.theta, 0.0, 1e-12);
  EXPECT_NEAR(m.t.x, 3.0, 1e-9);
  EXPECT_NEAR(m.t.y, 4.0, 1e-9);
}

TEST(EstimateRigid, ThirtyDegrees)
{
  const auto m = estimate_rigid(make_pairs({{1, 0}, {0, 1}, {-1, 0}}, std::numbers::pi / 6, {0, 0}));
  EXPECT_NEAR(m.theta, std::numbers::pi / 6, 1e-9);
  EXPECT_NEAR(m.t.x, 0.0, 1e-9);
  EXPECT_NEAR(m.t.y, 0.0, 1e-9);
}

TEST(EstimateRigid, HalfTurnStaysInRange)
{
  const auto m = estimate_rigid(make_pairs(random_points(6, 4), std::numbers::pi, {1, 2}));
  EXPECT_NEAR(m.theta, std::numbers::pi, 1e-9);
  EXPECT_GT(m.theta, -std::numbers::pi);
}

TEST(EstimateRigid, NoisyPairsMatchBruteForce)
{
  const auto pairs = make_pairs(random_points(50, 5), 0.05, {2, -1}, 0.1, 6);
  const auto m = estimate_rigid(pairs);
  double arg = 0.0;
  const double best = grid_minimum(pairs, -0.2, 0.2, 1e-4, &arg);
  EXPECT_LE(rigid_objective(m, pairs), best + 1e-9);
  EXPECT_NEAR(m.theta, arg, 1e-4);
  EXPECT_NEAR(m.theta, 0.05, 5e-3);
}

TEST(EstimateRigid, InsufficientData)
{
  std::vector<Correspondence> one = {{{0, 0}, {1, 1}}};
  std::vector<Correspondence> same = {{{2, 2}, {1, 1}}, {{2, 2}, {3, 3}}, {{2, 2}, {0, 0}}};
  for (const auto * set : {&one, &same}) {
    try {
      estimate_rigid(*set);
      ADD_FAILURE();
    } catch (const Error & e) {
      EXPECT_EQ(e.kind(), ErrorKind::insufficient_data);
    }
  }
}

TEST(EstimateRigidProperty, OptimalOnGrid)
{
  std::mt19937_64 rng(8);
  for (int i = 0; i < 40; ++i) {
    const auto n = std::uniform_int_distribution<std::size_t>(2, 100)(rng);
    const double theta = std::uniform_real_distribution<double>(-3.1, 3.1)(rng);
    const auto pairs = make_pairs(random_points(n, 100 + i), theta, {5, -7}, 0.5, 200 + i);
    const auto m = estimate_rigid(pairs);
    EXPECT_LE(rigid_objective(m, pairs), grid_minimum(pairs, -std::numbers::pi, std::numbers::pi, 1e-3) + 1e-9);
  }
}

TEST(EstimateRigidProperty, ProperRotationOnReflection)
{
  // q is the mirror image of p; the best proper rotation is still returned
  std::vector<Correspondence> pairs;
  for (const auto & p : random_points(20, 9)) {
    pairs.push_back({p, {-p.x, p.y}});
  }
  const auto m = estimate_rigid(pairs);
  EXPECT_NEAR(m.rotation().det(), 1.0, 1e-12);
  EXPECT_LE(rigid_objective(m, pairs), grid_minimum(pairs, -std::numbers::pi, std::numbers::pi, 1e-3) + 1e-9);

  std::vector<Correspondence> collinear;
  for (int i = 0; i < 10; ++i) {
    collinear.push_back({{double(i), 0.0}, {double(-i), 0.5}});
  }
  const auto c = estimate_rigid(collinear);
  EXPECT_NEAR(c.rotation().det(), 1.0, 1e-12);
  EXPECT_LE(rigid_objective(c, collinear), grid_minimum(collinear, -std::numbers::pi, std::numbers::pi, 1e-3) + 1e-9);
}

TEST(EstimateRigidProperty, TranslationEquivariance)
{
  auto pairs = make_pairs(random_points(30, 10), 0.3, {1, 2}, 0.2, 11);
  const auto a = estimate_rigid(pairs);
  for (auto & c : pairs) {
    c.p = c.p + Vec2{40, -25};
    c.q = c.q + Vec2{40, -25};
  }
  const auto b = estimate_rigid(pairs);
  EXPECT_NEAR(a.theta, b.theta, 1e-12);
  // the fitted map is the same map expressed around a shifted origin
  const Vec2 expect = a.t + Vec2{40, -25} - rotate({40, -25}, a.theta);
  EXPECT_NEAR(b.t.x, expect.x, 1e-9);
  EXPECT_NEAR(b.t.y, expect.y, 1e-9);
  EXPECT_NEAR(a.mean_residual, b.mean_residual, 1e-9);
}

TEST(EstimateRigidProperty, PureTranslationEquivariance)
{
  auto pairs = make_pairs(random_points(30, 12), 0.0, {3, 1});
  const auto a = estimate_rigid(pairs);
  for (auto & c : pairs) {
    c.p = c.p + Vec2{7, 9};
    c.q = c.q + Vec2{7, 9};
  }
  const auto b = estimate_rigid(pairs);
  EXPECT_NEAR(a.theta, b.theta, 1e-12);
  EXPECT_NEAR(a.t.x, b.t.x, 1e-9);
  EXPECT_NEAR(a.t.y, b.t.y, 1e-9);
}

TEST(ReconstructFlow, Examples)
{
  RigidMotion2D m;
  m.t = {1, 1};
  const std::vector<Vec2> origin = {{0, 0}};
  EXPECT_EQ(reconstruct_flow(m, origin)[0], (Vec2{1, 1}));
  m = {};
  m.theta = std::numbers::pi / 2;
  const std::vector<Vec2> unit_x = {{1, 0}};
  const auto q = reconstruct_flow(m, unit_x)[0];
  EXPECT_NEAR(q.x, 0.0, 1e-15);
  EXPECT_NEAR(q.y, 1.0, 1e-15);
}

TEST(ReconstructFlowProperty, RoundTrip)
{
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> th(-3.1, 3.1), tr(-50, 50);
  for (int i = 0; i < 200; ++i) {
    RigidMotion2D m;
    m.theta = th(rng);
    m.t = {tr(rng), tr(rng)};
    const auto p = random_points(2 + i % 20, 300 + i);
    const auto q = reconstruct_flow(m, p);
    std::vector<Correspondence> pairs;
    for (std::size_t k = 0; k < p.size(); ++k) {
      pairs.push_back({p[k], q[k]});
    }
    const auto back = estimate_rigid(pairs);
    EXPECT_NEAR(back.theta, m.theta, 1e-9);
    EXPECT_NEAR(back.t.x, m.t.x, 1e-7);
    EXPECT_NEAR(back.t.y, m.t.y, 1e-7);
  }
}

TEST(Ransac, ConstructedOutliers)
{
  auto pairs = make_pairs(random_points(10, 14), 0.0, {2, 0});
  for (int i = 0; i < 2; ++i) {
    const Vec2 p{10.0 * i, 5.0};
    pairs.push_back({p, p + Vec2{50, 50}});
  }
  RansacParams params;
  const auto r = ransac_estimate(pairs, params, 99);
  EXPECT_EQ(r.n_inliers, 10u);
  EXPECT_NEAR(r.motion.t.x, 2.0, 1e-9);
  EXPECT_NEAR(r.motion.t.y, 0.0, 1e-9);
  EXPECT_NEAR(r.motion.theta, 0.0, 1e-12);
  EXPECT_EQ(r.inliers[10], 0);
  EXPECT_EQ(r.inliers[11], 0);
}

TEST(Ransac, OutlierFreeEqualsPlainFit)
{
  const auto pairs = make_pairs(random_points(25, 15), 0.1, {1, 3});
  const auto r = ransac_estimate(pairs, RansacParams{}, 5);
  const auto m = estimate_rigid(pairs);
  EXPECT_EQ(r.n_inliers, pairs.size());
  EXPECT_NEAR(r.motion.theta, m.theta, 1e-12);
  EXPECT_NEAR(r.motion.t.x, m.t.x, 1e-9);
  EXPECT_NEAR(r.motion.t.y, m.t.y, 1e-9);
}

TEST(Ransac, PublishedDefaults)
{
  const RansacParams p;
  EXPECT_EQ(p.iterations, 16);
  EXPECT_DOUBLE_EQ(p.inlier_threshold, 0.5);
}

TEST(Ransac, DisabledUsesEveryPair)
{
  auto pairs = make_pairs(random_points(10, 16), 0.0, {2, 0});
  pairs.push_back({{0, 0}, {60, 60}});
  RansacParams params;
  params.enabled = false;
  const auto r = ransac_estimate(pairs, params, 1);
  const auto m = estimate_rigid(pairs);
  EXPECT_EQ(r.n_inliers, pairs.size());
  EXPECT_EQ(r.motion.theta, m.theta);
  EXPECT_EQ(r.motion.t, m.t);
}

TEST(Ransac, DegenerateConsensus)
{
  // every pair moves differently: no two-point model explains 30 %
  std::vector<Correspondence> pairs;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-100, 100);
  for (int i = 0; i < 40; ++i) {
    pairs.push_back({{u(rng), u(rng)}, {u(rng), u(rng)}});
  }
  try {
    ransac_estimate(pairs, RansacParams{}, 3);
    ADD_FAILURE();
  } catch (const Error & e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_consensus);
  }
}

TEST(Ransac, CoincidentSamplesAreRedrawn)
{
  // two distinct points only; many draws coincide but a model is still found
  std::vector<Correspondence> pairs(20, Correspondence{{0, 0}, {1, 0}});
  pairs.push_back({{5, 0}, {6, 0}});
  const auto r = ransac_estimate(pairs, RansacParams{}, 4);
  EXPECT_EQ(r.n_inliers, pairs.size());
  EXPECT_NEAR(r.motion.t.x, 1.0, 1e-9);
}

TEST(Ransac, AllCoincidentIsInsufficient)
{
  std::vector<Correspondence> pairs(5, Correspondence{{1, 1}, {2, 2}});
  try {
    ransac_estimate(pairs, RansacParams{}, 4);
    ADD_FAILURE();
  } catch (const Error & e) {
    EXPECT_EQ(e.kind(), ErrorKind::insufficient_data);
  }
}

TEST(RansacProperty, DeterministicMask)
{
  auto pairs = make_pairs(random_points(60, 18), 0.02, {1, 1}, 0.3, 19);
  for (int i = 0; i < 20; ++i) {
    pairs[i].q = pairs[i].q + Vec2{30, -20};
  }
  const auto a = ransac_estimate(pairs, RansacParams{}, 1234);
  const auto b = ransac_estimate(pairs, RansacParams{}, 1234);
  EXPECT_EQ(a.inliers, b.inliers);
  EXPECT_EQ(a.motion.theta, b.motion.theta);
}

TEST(RansacProperty, DominatesPlainFitUnderGrossOutliers)
{
  std::mt19937_64 rng(20);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = random_points(100, 400 + trial);
    auto pairs = make_pairs(p, 0.01, {3, -2}, 0.05, 500 + trial);
    std::vector<std::uint8_t> truly_inlier(pairs.size(), 1);
    std::uniform_real_distribution<double> ang(0, 2 * std::numbers::pi);
    for (int i = 0; i < 35; ++i) {
      const double a = ang(rng);
      pairs[i].q = pairs[i].q + Vec2{std::cos(a), std::sin(a)} * 20.0;
      truly_inlier[i] = 0;
    }
    auto residual_over_inliers = [&](const RigidMotion2D & m) {
      double s = 0.0;
      int n = 0;
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (truly_inlier[i]) {
          s += (m.apply(pairs[i].p) - pairs[i].q).norm();
          ++n;
        }
      }
      return s / n;
    };
    const auto r = ransac_estimate(pairs, RansacParams{}, 600 + trial);
    EXPECT_LE(residual_over_inliers(r.motion), residual_over_inliers(estimate_rigid(pairs))) << trial;
  }
}

TEST(FrameSeed, DistinctAndStable)
{
  EXPECT_EQ(frame_seed(1, 5), frame_seed(1, 5));
  EXPECT_NE(frame_seed(1, 5), frame_seed(1, 6));
  EXPECT_NE(frame_seed(1, 5), frame_seed(2, 5));
}

TEST(ToCameraVelocity, PixelSpeedAnchor)
{
  const auto cam = CameraModel::from_focal(640, 480, 554.26, 0.6);
  RigidMotion2D m;
  m.t = {185, 0};
  const auto cv = to_camera_velocity(m, cam, 0.005);
  EXPECT_NEAR(cv.v_c.norm(), 40.05, 0.01);
  EXPECT_NEAR(cv.v_c.norm(), 185.0 * 0.6 / 554.26 / 0.005, 1e-9);
}

TEST(ToCameraVelocity, ZeroMotion)
{
  const auto cam = CameraModel::from_focal(64, 48, 100, 0.5);
  const auto cv = to_camera_velocity(RigidMotion2D{}, cam, 0.01);
  EXPECT_EQ(cv.v_c.x, 0.0);
  EXPECT_EQ(cv.v_c.y, 0.0);
  EXPECT_EQ(cv.omega, 0.0);
}

TEST(ToCameraVelocity, SpinningDiskAnchor)
{
  const auto cam = CameraModel::from_focal(346, 260, 300, 0.3);
  RigidMotion2D m;
  m.theta = 0.03766;
  const auto cv = to_camera_velocity(m, cam, 0.001);
  EXPECT_NEAR(cv.omega, 37.66, 1e-9);
  EXPECT_NEAR(cv.omega * 60.0 / (2.0 * std::numbers::pi), 359.6, 0.05);
}

TEST(ToCameraVelocity, RotationAboutPrincipalPointHasNoTranslation)
{
  const auto cam = CameraModel::from_focal(346, 260, 300, 0.3);
  RigidMotion2D m;
  m.theta = 0.2;
  const Vec2 c{cam.cx, cam.cy};
  m.t = c - rotate(c, m.theta);
  const auto cv = to_camera_velocity(m, cam, 0.01);
  EXPECT_NEAR(cv.v_c.norm(), 0.0, 1e-12);
  EXPECT_NEAR(cv.omega, 20.0, 1e-12);
}

TEST(ToCameraVelocity, ArcMotionRecoversSpeed)
{
  // the principal point sweeps an arc at constant speed a px/s while turning at w rad/s
  const auto cam = CameraModel::from_focal(200, 100, 250, 0.5);
  const double a = 3000.0, w = 8.0, dt = 0.02;
  const Vec2 c{cam.cx, cam.cy};
  const Vec2 chord{a / w * std::sin(w * dt), a / w * (1.0 - std::cos(w * dt))};
  RigidMotion2D m;
  m.theta = w * dt;
  m.t = c + chord - rotate(c, m.theta);
  const auto cv = to_camera_velocity(m, cam, dt);
  EXPECT_NEAR(cv.v_c.x, a * cam.height_z / cam.f_px, 1e-9);
  EXPECT_NEAR(cv.v_c.y, 0.0, 1e-9);
}

TEST(ToCameraVelocity, AxisMapping)
{
  const auto cam = CameraModel::from_focal(64, 48, 100, 1.0);
  RigidMotion2D m;
  m.t = {10, 20};
  const auto mapping = AxisMapping::parse("-y", "+x");
  const auto cv = to_camera_velocity(m, cam, 1.0, mapping);
  EXPECT_NEAR(cv.v_c.x, 0.2, 1e-12);
  EXPECT_NEAR(cv.v_c.y, -0.1, 1e-12);
  EXPECT_EQ(mapping.image_x_str(), "-y");
  EXPECT_EQ(mapping.image_y_str(), "+x");
  EXPECT_THROW(AxisMapping::parse("+x", "-x"), Error);
  EXPECT_THROW(AxisMapping::parse("x", "+y"), Error);
  EXPECT_THROW(to_camera_velocity(m, cam, 0.0), Error);
}
