#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <sstream>

#include "groundflow/dense_flow.hpp"
#include "groundflow/error.hpp"
#include "groundflow/synth.hpp"

using namespace groundflow;

namespace
{
ImageF noise_image(int w, int h, int shift_x = 0, int shift_y = 0, std::uint64_t seed = 7)
{
  Texture tex({TextureKind::noise, seed, 4.0});
  ImageF img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img(x, y) = 255.f * tex.lattice(x - shift_x, y - shift_y);
    }
  }
  return img;
}

// Direct weighted least squares of a full quadratic on the (2n+1)^2 patch.
Eigen::Matrix<double, 6, 1> quadratic_fit(const ImageF & img, int px, int py, int n, double sigma)
{
  const int side = 2 * n + 1;
  Eigen::MatrixXd a(side * side, 6);
  Eigen::VectorXd b(side * side);
  int r = 0;
  for (int dy = -n; dy <= n; ++dy) {
    for (int dx = -n; dx <= n; ++dx) {
      const double w = std::sqrt(std::exp(-0.5 * (dx * dx + dy * dy) / (sigma * sigma)));
      a.row(r) << w, w * dx, w * dy, w * dx * dx, w * dy * dy, w * dx * dy;
      const int x = std::clamp(px + dx, 0, img.width() - 1);
      const int y = std::clamp(py + dy, 0, img.height() - 1);
      b(r) = w * img(x, y);
      ++r;
    }
  }
  return a.colPivHouseholderQr().solve(b);
}

double mean_abs(const FlowField & f)
{
  double s = 0.0;
  int n = 0;
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x) {
      if (f.valid(x, y)) {
        s += std::hypot(f.u(x, y), f.v(x, y));
        ++n;
      }
    }
  }
  return n ? s / n : 0.0;
}

FlowField uniform_field(int w, int h, float u, float v)
{
  FlowField f;
  f.u = ImageF(w, h);
  f.v = ImageF(w, h);
  f.valid = Grid<std::uint8_t>(w, h);
  f.u.fill(u);
  f.v.fill(v);
  f.valid.fill(1);
  f.dt = 0.01;
  return f;
}
}  // namespace

TEST(PolynomialExpansion, ConstantImage)
{
  ImageF img(20, 16);
  img.fill(42.f);
  const auto c = polynomial_expansion(img, 5, 1.1);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 20; ++x) {
      EXPECT_NEAR(c(x, y).c, 42.f, 1e-3);
      EXPECT_NEAR(c(x, y).bx, 0.f, 1e-4);
      EXPECT_NEAR(c(x, y).by, 0.f, 1e-4);
      EXPECT_NEAR(c(x, y).a_xx, 0.f, 1e-4);
      EXPECT_NEAR(c(x, y).a_xy, 0.f, 1e-4);
      EXPECT_NEAR(c(x, y).a_yy, 0.f, 1e-4);
    }
  }
}

TEST(PolynomialExpansion, LinearRampMatchesDirectFit)
{
  ImageF img(32, 32);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      img(x, y) = 3.f * x;
    }
  }
  const auto c = polynomial_expansion(img, 5, 1.1);
  for (auto [x, y] : {std::pair{10, 10}, {12, 20}, {16, 16}, {20, 8}, {22, 22}}) {
    const auto ref = quadratic_fit(img, x, y, 5, 1.1);
    EXPECT_NEAR(c(x, y).bx, ref(1), 1e-3);
    EXPECT_NEAR(c(x, y).bx, 3.0, 1e-3);
    EXPECT_NEAR(c(x, y).by, 0.0, 1e-4);
    EXPECT_NEAR(c(x, y).a_xx, 0.0, 1e-4);
    EXPECT_NEAR(c(x, y).a_yy, 0.0, 1e-4);
    EXPECT_NEAR(c(x, y).a_xy, 0.0, 1e-4);
  }
}

TEST(PolynomialExpansion, PureQuadratic)
{
  ImageF img(32, 32);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      img(x, y) = static_cast<float>((x - 16) * (x - 16));
    }
  }
  const auto c = polynomial_expansion(img, 5, 1.1);
  for (auto [x, y] : {std::pair{10, 10}, {14, 20}, {16, 16}, {20, 12}, {21, 18}}) {
    const auto ref = quadratic_fit(img, x, y, 5, 1.1);
    EXPECT_GT(c(x, y).a_xx, 0.f);
    EXPECT_NEAR(c(x, y).a_xx, ref(3), 1e-3);
    EXPECT_NEAR(c(x, y).a_xy, 0.0, 1e-4);
    EXPECT_NEAR(c(x, y).a_yy, 0.0, 1e-4);
  }
}

TEST(PolynomialExpansion, TexturedImageMatchesDirectFit)
{
  const auto img = noise_image(40, 30);
  const auto c = polynomial_expansion(img, 5, 1.1);
  for (auto [x, y] : {std::pair{0, 0}, {7, 9}, {20, 15}, {33, 22}, {39, 29}}) {
    const auto ref = quadratic_fit(img, x, y, 5, 1.1);
    const double scale = 1e-4 * (1.0 + ref.cwiseAbs().maxCoeff());
    EXPECT_NEAR(c(x, y).c, ref(0), 5 * scale) << x << "," << y;
    EXPECT_NEAR(c(x, y).bx, ref(1), scale);
    EXPECT_NEAR(c(x, y).by, ref(2), scale);
    EXPECT_NEAR(c(x, y).a_xx, ref(3), scale);
    EXPECT_NEAR(c(x, y).a_yy, ref(4), scale);
    EXPECT_NEAR(2.0 * c(x, y).a_xy, ref(5), scale);
  }
}

TEST(ComputeFlow, IdenticalFramesGiveZeroFlow)
{
  const auto img = noise_image(96, 80);
  const auto f = compute_flow(img, img, FlowParams{}, 0.033);
  EXPECT_GT(f.valid_count(), 0u);
  EXPECT_LT(mean_abs(f), 0.05);
}

TEST(ComputeFlow, IntegerShifts)
{
  const int w = 128, h = 96, margin = 16;
  const auto prev = noise_image(w, h);
  for (int s : {1, 2, 3, 5}) {
    const auto next = noise_image(w, h, s, 0);
    const auto f = compute_flow(prev, next, FlowParams{}, 0.033);
    double eu = 0.0, ev = 0.0;
    int n = 0;
    for (int y = margin; y < h - margin; ++y) {
      for (int x = margin; x < w - margin; ++x) {
        if (f.valid(x, y)) {
          eu += f.u(x, y) - s;
          ev += f.v(x, y);
          ++n;
        }
      }
    }
    ASSERT_GT(n, (w - 2 * margin) * (h - 2 * margin) / 2);
    EXPECT_LT(std::abs(eu / n), 0.2) << "shift " << s;
    EXPECT_LT(std::abs(ev / n), 0.2) << "shift " << s;
  }
}

TEST(ComputeFlow, VerticalShift)
{
  const auto prev = noise_image(96, 96);
  const auto next = noise_image(96, 96, 0, -3);
  const auto f = compute_flow(prev, next, FlowParams{}, 0.033);
  EXPECT_NEAR(f.v(48, 48), -3.0, 0.2);
  EXPECT_NEAR(f.u(48, 48), 0.0, 0.2);
}

TEST(ComputeFlow, SmallRotation)
{
  const int w = 128, h = 128;
  const double theta = 0.02, cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  Texture tex({TextureKind::noise, 11, 4.0});
  ImageF prev(w, h), next(w, h);
  const double c = std::cos(theta), s = std::sin(theta);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      prev(x, y) = 255.f * tex.sample(x, y);
      const double dx = x - cx, dy = y - cy;
      next(x, y) = 255.f * tex.sample(cx + c * dx + s * dy, cy - s * dx + c * dy);
    }
  }
  const auto f = compute_flow(prev, next, FlowParams{}, 0.001);
  double epe = 0.0;
  int n = 0;
  for (int y = 16; y < h - 16; ++y) {
    for (int x = 16; x < w - 16; ++x) {
      if (!f.valid(x, y)) {
        continue;
      }
      const double dx = x - cx, dy = y - cy;
      const double tu = c * dx - s * dy - dx;
      const double tv = s * dx + c * dy - dy;
      epe += std::hypot(f.u(x, y) - tu, f.v(x, y) - tv);
      ++n;
    }
  }
  ASSERT_GT(n, 0);
  EXPECT_LT(epe / n, 0.3);
}

TEST(ComputeFlow, UniformFramesHaveNoValidPixels)
{
  ImageF a(64, 48), b(64, 48);
  a.fill(0.f);
  b.fill(0.f);
  EXPECT_EQ(compute_flow(a, b, FlowParams{}, 0.01).valid_count(), 0u);
  a.fill(100.f);
  b.fill(100.f);
  EXPECT_EQ(compute_flow(a, b, FlowParams{}, 0.01).valid_count(), 0u);
}

TEST(ComputeFlow, Image8Overload)
{
  Image8 a(64, 48), b(64, 48);
  const auto img = noise_image(64, 48);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 64; ++x) {
      a(x, y) = static_cast<std::uint8_t>(img(x, y));
      b(x, y) = a(x, y);
    }
  }
  EXPECT_EQ(compute_flow(a, b, FlowParams{}, 0.01), compute_flow(to_float(a), to_float(b), FlowParams{}, 0.01));
}

TEST(ComputeFlow, Deterministic)
{
  const auto a = noise_image(80, 60);
  const auto b = noise_image(80, 60, 2, 1);
  EXPECT_EQ(compute_flow(a, b, FlowParams{}, 0.01), compute_flow(a, b, FlowParams{}, 0.01));
}

TEST(ComputeFlow, ContractErrors)
{
  ImageF a(10, 10), b(11, 10);
  EXPECT_THROW(compute_flow(a, b, FlowParams{}, 0.01), Error);
  EXPECT_THROW(compute_flow(a, a, FlowParams{}, 0.0), Error);
  FlowParams bad;
  bad.window_size = 4;
  EXPECT_THROW(compute_flow(a, a, bad, 0.01), Error);
  bad = FlowParams{};
  bad.pyramid_scale = 1.0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(ComputeFlow, ValidVectorsAreFinite)
{
  const auto a = noise_image(64, 64);
  const auto b = noise_image(64, 64, 4, -2);
  const auto f = compute_flow(a, b, FlowParams{}, 0.01);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      if (f.valid(x, y)) {
        EXPECT_TRUE(std::isfinite(f.u(x, y)) && std::isfinite(f.v(x, y)));
      }
    }
  }
}

TEST(SubsampleFlow, StrideTwoOnFourByFour)
{
  const auto pairs = subsample_flow(uniform_field(4, 4, 1.f, 0.f), 2);
  ASSERT_EQ(pairs.size(), 4u);
  for (const auto & p : pairs) {
    EXPECT_EQ(p.q.x - p.p.x, 1.0);
    EXPECT_EQ(p.q.y - p.p.y, 0.0);
  }
}

TEST(SubsampleFlow, MaskedPointDropped)
{
  auto f = uniform_field(4, 4, 1.f, 0.f);
  f.valid(2, 2) = 0;
  const auto pairs = subsample_flow(f, 2);
  EXPECT_EQ(pairs.size(), 3u);
  for (const auto & p : pairs) {
    EXPECT_FALSE(p.p.x == 2.0 && p.p.y == 2.0);
  }
}

TEST(SubsampleFlow, StrideOneCardinality)
{
  EXPECT_EQ(subsample_flow(uniform_field(7, 5, 0.f, 0.f), 1).size(), 35u);
  EXPECT_THROW(subsample_flow(uniform_field(7, 5, 0.f, 0.f), 0), Error);
}

TEST(FlowDump, CsvAndSvg)
{
  auto f = uniform_field(3, 2, 0.5f, -1.f);
  f.valid(1, 0) = 0;
  std::ostringstream csv;
  write_flow_csv(csv, f);
  EXPECT_EQ(csv.str().substr(0, 11), "x,y,u,v,val");
  EXPECT_NE(csv.str().find("1,0,0.5,-1,0\n"), std::string::npos);
  std::ostringstream svg;
  write_flow_svg(svg, f, Image8(3, 2), 1);
  EXPECT_NE(svg.str().find("<svg"), std::string::npos);
  EXPECT_NE(svg.str().find("</svg>"), std::string::npos);
}
