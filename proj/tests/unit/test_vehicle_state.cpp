#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "groundflow/error.hpp"
#include "groundflow/vehicle_state.hpp"

using namespace groundflow;

namespace
{
CameraVelocity cam_velocity(double vx, double vy, double w, double t = 0.0)
{
  CameraVelocity cv;
  cv.v_c = {vx, vy};
  cv.omega = w;
  cv.t_mid = t;
  return cv;
}

Extrinsics ca(double x, double y)
{
  Extrinsics e;
  e.ca = {x, y};
  return e;
}

std::filesystem::path temp_file(const std::string & name)
{
  return std::filesystem::temp_directory_path() /
         (name + "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
}
}  // namespace

TEST(TransformToAxle, ZeroYawRateIsIdentity)
{
  const auto v = transform_to_axle(cam_velocity(1.25, -0.5, 0.0), ca(0.3, 0.2));
  EXPECT_EQ(v.v_lon, 1.25);
  EXPECT_EQ(v.v_lat, -0.5);
  EXPECT_EQ(v.omega_source, OmegaSource::flow);
  EXPECT_TRUE(v.valid);
}

TEST(TransformToAxle, CrossProduct)
{
  const auto v = transform_to_axle(cam_velocity(1.0, 0.0, 1.0), ca(0.3, 0.0));
  EXPECT_DOUBLE_EQ(v.v_lon, 1.0);
  EXPECT_DOUBLE_EQ(v.v_lat, 0.3);
  EXPECT_EQ(v.omega, 1.0);
}

TEST(TransformToAxleProperty, LongitudinalIndependentOfYawWhenCaIsLongitudinal)
{
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-20, 20);
  for (int i = 0; i < 1000; ++i) {
    const auto cv = cam_velocity(u(rng), u(rng), u(rng));
    const auto e = ca(u(rng) / 4, 0.0);
    const auto a = transform_to_axle(cv, e);
    auto other = cv;
    other.omega = u(rng);
    EXPECT_EQ(transform_to_axle(other, e).v_lon, a.v_lon);
    EXPECT_EQ(a.v_lon, cv.v_c.x);
  }
}

TEST(TransformToAxleProperty, AffineInYawRate)
{
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 1000; ++i) {
    const auto e = ca(u(rng), u(rng));
    const auto cv = cam_velocity(u(rng), u(rng), 0.0);
    const auto base = transform_to_axle(cv, e);
    const double w = u(rng);
    auto turned = cv;
    turned.omega = w;
    const auto v = transform_to_axle(turned, e);
    if (w != 0.0) {
      EXPECT_NEAR(v.v_lon - base.v_lon, -e.ca.y * w, 1e-12);
      EXPECT_NEAR(v.v_lat - base.v_lat, e.ca.x * w, 1e-12);
    }
  }
}

TEST(TransformToAxleProperty, ZeroLeverArmIsIdentity)
{
  const auto v = transform_to_axle(cam_velocity(3.0, -1.0, 7.0), ca(0.0, 0.0));
  EXPECT_EQ(v.v_lon, 3.0);
  EXPECT_EQ(v.v_lat, -1.0);
}

TEST(Extrinsics, SanityBound)
{
  EXPECT_NO_THROW(ca(0.3, -0.1).validate());
  EXPECT_THROW(ca(10.0, 0.0).validate(), Error);
  EXPECT_THROW(ca(std::nan(""), 0.0).validate(), Error);
}

TEST(ImuIndex, MidpointInterpolation)
{
  std::vector<ImuSample> s = {{0, 1.0}, {10000, 2.0}};
  ImuIndex imu(s);
  EXPECT_NEAR(*imu.yaw_rate_at(0.005, 0.066), 1.5, 1e-12);
  EXPECT_EQ(*imu.yaw_rate_at(0.0, 0.066), 1.0);
  EXPECT_EQ(*imu.yaw_rate_at(0.010, 0.066), 2.0);
}

TEST(ImuIndex, HoldsAndGoesStale)
{
  std::vector<ImuSample> s = {{0, 1.0}, {10000, 2.0}};
  ImuIndex imu(s);
  EXPECT_EQ(*imu.yaw_rate_at(0.05, 0.066), 2.0);
  EXPECT_FALSE(imu.yaw_rate_at(0.2, 0.066).has_value());
  EXPECT_FALSE(imu.yaw_rate_at(-0.1, 0.066).has_value());
  ImuIndex empty;
  EXPECT_FALSE(empty.yaw_rate_at(0.0, 1.0).has_value());
}

TEST(ImuIndex, RejectsBackwardsTime)
{
  ImuIndex imu;
  imu.append({100, 0.0});
  try {
    imu.append({50, 0.0});
    ADD_FAILURE();
  } catch (const Error & e) {
    EXPECT_EQ(e.kind(), ErrorKind::ordering);
  }
}

TEST(ImuIndex, ConcurrentAppendAndLookup)
{
  ImuIndex imu;
  constexpr int kSamples = 20000;
  std::atomic<bool> done{false};
  std::atomic<int> bad{0};
  std::vector<std::thread> readers;
  for (int r = 0; r < 3; ++r) {
    readers.emplace_back([&] {
      while (!done.load()) {
        const std::size_t n = imu.size();
        if (n < 2) {
          continue;
        }
        // yaw rate equals t in ms, so any visible pair must interpolate exactly
        const auto last = imu.at(n - 1);
        if (last.yaw_rate != static_cast<double>(last.t) / 1000.0) {
          ++bad;
        }
        const double t = 1e-6 * static_cast<double>(last.t) * 0.5;
        const auto w = imu.yaw_rate_at(t, 1.0);
        if (!w || std::abs(*w - t * 1000.0) > 1e-9) {
          ++bad;
        }
      }
    });
  }
  for (int i = 0; i < kSamples; ++i) {
    imu.append({static_cast<Timestamp>(i) * 1000, static_cast<double>(i)});
  }
  done = true;
  for (auto & t : readers) {
    t.join();
  }
  EXPECT_EQ(bad.load(), 0);
  EXPECT_EQ(imu.size(), static_cast<std::size_t>(kSamples));
}

TEST(SubstituteImuYaw, ConstantImuEqualsFlowYaw)
{
  std::vector<ImuSample> s = {{0, 0.7}, {100000, 0.7}};
  ImuIndex imu(s);
  const auto cv = cam_velocity(1.5, 0.1, 0.7, 0.05);
  const auto a = transform_to_axle(cv, ca(0.2, -0.05));
  const auto b = substitute_imu_yaw(cv, imu, ca(0.2, -0.05), 0.066);
  EXPECT_EQ(a.v_lon, b.v_lon);
  EXPECT_EQ(a.v_lat, b.v_lat);
  EXPECT_EQ(a.omega, b.omega);
  EXPECT_EQ(b.omega_source, OmegaSource::imu);
}

TEST(SubstituteImuYaw, InterpolatedYawEntersLeverArm)
{
  std::vector<ImuSample> s = {{0, 1.0}, {10000, 2.0}};
  ImuIndex imu(s);
  const auto v = substitute_imu_yaw(cam_velocity(1.0, 0.0, 9.0, 0.005), imu, ca(0.3, 0.0), 0.066);
  EXPECT_NEAR(v.omega, 1.5, 1e-12);
  EXPECT_NEAR(v.v_lat, 0.45, 1e-12);
}

TEST(SubstituteImuYaw, StaleMarksInvalid)
{
  std::vector<ImuSample> s = {{0, 1.0}};
  ImuIndex imu(s);
  const auto v = substitute_imu_yaw(cam_velocity(1.0, 0.0, 0.0, 1.0), imu, ca(0.3, 0.0), 0.066);
  EXPECT_FALSE(v.valid);
  EXPECT_EQ(v.status, FrameStatus::stale_imu);
}

TEST(ImuCsv, RoundTrip)
{
  const auto path = temp_file("imu.csv");
  std::vector<ImuSample> s = {{0, 0.125}, {1000, -0.5}, {2000, 1e-7}};
  {
    std::ofstream out(path);
    write_imu_csv(out, s);
  }
  const auto back = read_imu_csv(path);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].t, s[i].t);
    EXPECT_EQ(back[i].yaw_rate, s[i].yaw_rate);
  }
  std::ofstream(path) << "t_us,yaw_rate_rad_s\n10,0\n5,0\n";
  EXPECT_THROW(read_imu_csv(path), Error);
  std::filesystem::remove(path);
}

TEST(VelocityCsv, HeaderAndInvalidRows)
{
  VelocityEstimate ok;
  ok.t_mid = 0.033;
  ok.v_lon = 1.5;
  ok.v_lat = -0.25;
  ok.omega = 0.5;
  ok.quality.n_inliers = 120;
  ok.quality.inlier_fraction = 0.75;
  VelocityEstimate bad;
  bad.t_mid = 0.066;
  bad.valid = false;
  bad.status = FrameStatus::textureless;
  std::ostringstream out;
  std::vector<VelocityEstimate> rows = {ok, bad};
  write_velocity_csv(out, rows);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t_s,v_lon,v_lat,omega,omega_source,n_inliers,inlier_fraction,valid");
  std::getline(in, line);
  EXPECT_EQ(line, "0.033000,1.5,-0.25,0.5,flow,120,0.75,1");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 21), "0.066000,nan,nan,nan,");
  EXPECT_EQ(line.back(), '0');

  const auto path = temp_file("vel.csv");
  std::ofstream(path) << out.str();
  const auto back = read_velocity_csv(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].v_lon, 1.5);
  EXPECT_EQ(back[0].quality.n_inliers, 120u);
  EXPECT_FALSE(back[1].valid);
  std::filesystem::remove(path);
}
