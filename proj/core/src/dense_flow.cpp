#include "groundflow/dense_flow.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>

#include <fmt/core.h>

#include "groundflow/error.hpp"
#include "groundflow/svg.hpp"

namespace groundflow
{
namespace
{
constexpr double kMinRcond = 1e-6;
// Largest eigenvalue below which the normal matrix counts as zero (no texture).
constexpr double kMinEigen = 1e-9;

int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

std::vector<double> gaussian_kernel(int radius, double sigma)
{
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto & v : k) {
    v /= sum;
  }
  return k;
}

/// Separable Gaussian blur with replicated borders.
ImageF gaussian_blur(const ImageF & src, double sigma)
{
  if (sigma <= 0.0) {
    return src;
  }
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  const auto k = gaussian_kernel(radius, sigma);
  const int w = src.width();
  const int h = src.height();
  ImageF tmp(w, h);
  for (int y = 0; y < h; ++y) {
    float * out = tmp.row(y);
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * src(x, clamp_index(y + i, h));
      }
      out[x] = static_cast<float>(acc);
    }
  }
  ImageF dst(w, h);
  for (int y = 0; y < h; ++y) {
    const float * in = tmp.row(y);
    float * out = dst.row(y);
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * in[clamp_index(x + i, w)];
      }
      out[x] = static_cast<float>(acc);
    }
  }
  return dst;
}

/// Bilinear resize with pixel-centre alignment.
ImageF resize_bilinear(const ImageF & src, int w, int h)
{
  ImageF dst(w, h);
  const double sx = static_cast<double>(src.width()) / w;
  const double sy = static_cast<double>(src.height()) / h;
  for (int y = 0; y < h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
    const int y0 = std::min(static_cast<int>(fy), src.height() - 1);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double ay = fy - y0;
    for (int x = 0; x < w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
      const int x0 = std::min(static_cast<int>(fx), src.width() - 1);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double ax = fx - x0;
      const double top = (1 - ax) * src(x0, y0) + ax * src(x1, y0);
      const double bottom = (1 - ax) * src(x0, y1) + ax * src(x1, y1);
      dst(x, y) = static_cast<float>((1 - ay) * top + ay * bottom);
    }
  }
  return dst;
}

// Per-pixel normal equations G d = h of the displacement solve, G symmetric.
struct Normal
{
  float g11, g12, g22, h1, h2;
};


/// Builds the per-pixel normal equations for the displacement given the current flow.
Grid<Normal> update_matrices(
  const Grid<PolyCoeffs> & r1, const Grid<PolyCoeffs> & r2, const ImageF & u, const ImageF & v)
{
  const int w = r1.width();
  const int h = r1.height();
  Grid<Normal> m(w, h, Normal{0, 0, 0, 0, 0});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = u(x, y);
      const double dy = v(x, y);
      const double fx = x + dx;
      const double fy = y + dy;
      if (!(fx >= 0.0 && fx <= w - 1.0 && fy >= 0.0 && fy <= h - 1.0)) {
        continue;  // correspondence left the frame: no constraint
      }
      const int x0 = std::min(static_cast<int>(fx), w - 2 < 0 ? 0 : w - 2);
      const int y0 = std::min(static_cast<int>(fy), h - 2 < 0 ? 0 : h - 2);
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const double ax = fx - x0;
      const double ay = fy - y0;
      const double w00 = (1 - ax) * (1 - ay);
      const double w10 = ax * (1 - ay);
      const double w01 = (1 - ax) * ay;
      const double w11 = ax * ay;
      const PolyCoeffs & p00 = r2(x0, y0);
      const PolyCoeffs & p10 = r2(x1, y0);
      const PolyCoeffs & p01 = r2(x0, y1);
      const PolyCoeffs & p11 = r2(x1, y1);
      auto lerp = [&](float PolyCoeffs::*f) {
        return w00 * p00.*f + w10 * p10.*f + w01 * p01.*f + w11 * p11.*f;
      };
      const PolyCoeffs & q = r1(x, y);
      const double a11 = 0.5 * (q.a_xx + lerp(&PolyCoeffs::a_xx));
      const double a12 = 0.5 * (q.a_xy + lerp(&PolyCoeffs::a_xy));
      const double a22 = 0.5 * (q.a_yy + lerp(&PolyCoeffs::a_yy));
      const double db1 = -0.5 * (lerp(&PolyCoeffs::bx) - q.bx) + a11 * dx + a12 * dy;
      const double db2 = -0.5 * (lerp(&PolyCoeffs::by) - q.by) + a12 * dx + a22 * dy;
      Normal & n = m(x, y);
      n.g11 = static_cast<float>(a11 * a11 + a12 * a12);
      n.g12 = static_cast<float>(a12 * (a11 + a22));
      n.g22 = static_cast<float>(a12 * a12 + a22 * a22);
      n.h1 = static_cast<float>(a11 * db1 + a12 * db2);
      n.h2 = static_cast<float>(a12 * db1 + a22 * db2);
    }
  }
  return m;
}

Grid<Normal> blur_normals(const Grid<Normal> & src, int window_size)
{
  const int radius = window_size / 2;
  const auto k = gaussian_kernel(radius, 0.3 * radius);
  const int w = src.width();
  const int h = src.height();
  Grid<Normal> tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc[5] = {0, 0, 0, 0, 0};
      for (int i = -radius; i <= radius; ++i) {
        const Normal & n = src(x, clamp_index(y + i, h));
        const double kw = k[i + radius];
        acc[0] += kw * n.g11;
        acc[1] += kw * n.g12;
        acc[2] += kw * n.g22;
        acc[3] += kw * n.h1;
        acc[4] += kw * n.h2;
      }
      tmp(x, y) = {
        static_cast<float>(acc[0]), static_cast<float>(acc[1]), static_cast<float>(acc[2]),
        static_cast<float>(acc[3]), static_cast<float>(acc[4])};
    }
  }
  Grid<Normal> dst(w, h);
  for (int y = 0; y < h; ++y) {
    const Normal * in = tmp.row(y);
    for (int x = 0; x < w; ++x) {
      double acc[5] = {0, 0, 0, 0, 0};
      for (int i = -radius; i <= radius; ++i) {
        const Normal & n = in[clamp_index(x + i, w)];
        const double kw = k[i + radius];
        acc[0] += kw * n.g11;
        acc[1] += kw * n.g12;
        acc[2] += kw * n.g22;
        acc[3] += kw * n.h1;
        acc[4] += kw * n.h2;
      }
      dst(x, y) = {
        static_cast<float>(acc[0]), static_cast<float>(acc[1]), static_cast<float>(acc[2]),
        static_cast<float>(acc[3]), static_cast<float>(acc[4])};
    }
  }
  return dst;
}

/// Solves every pixel's 2x2 system; near-singular pixels keep their flow and are marked invalid.
void solve_displacement(const Grid<Normal> & m, ImageF & u, ImageF & v, Grid<std::uint8_t> & valid)
{
  const int w = m.width();
  const int h = m.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Normal & n = m(x, y);
      const double g11 = n.g11;
      const double g12 = n.g12;
      const double g22 = n.g22;
      const double half_trace = 0.5 * (g11 + g22);
      const double disc = std::hypot(0.5 * (g11 - g22), g12);
      const double lmax = half_trace + disc;
      const double lmin = half_trace - disc;
      if (!(lmax > kMinEigen) || lmin < kMinRcond * lmax) {
        valid(x, y) = 0;
        continue;
      }
      const double det = g11 * g22 - g12 * g12;
      const double du = (g22 * n.h1 - g12 * n.h2) / det;
      const double dv = (g11 * n.h2 - g12 * n.h1) / det;
      if (!std::isfinite(du) || !std::isfinite(dv)) {
        valid(x, y) = 0;
        continue;
      }
      u(x, y) = static_cast<float>(du);
      v(x, y) = static_cast<float>(dv);
      valid(x, y) = 1;
    }
  }
}

}  // namespace

void FlowParams::validate() const
{
  if (pyramid_levels < 1) {
    throw Error(ErrorKind::config, "flow pyramid needs at least one level");
  }
  if (!(pyramid_scale > 0.0 && pyramid_scale < 1.0)) {
    throw Error(ErrorKind::config, fmt::format("pyramid scale must lie in (0, 1), got {}", pyramid_scale));
  }
  if (window_size < 3 || window_size % 2 == 0) {
    throw Error(ErrorKind::config, fmt::format("flow window must be odd and >= 3, got {}", window_size));
  }
  if (iterations < 1) {
    throw Error(ErrorKind::config, "flow needs at least one iteration per level");
  }
  if (poly_n < 1 || !(poly_sigma > 0.0)) {
    throw Error(ErrorKind::config, "polynomial expansion needs poly_n >= 1 and poly_sigma > 0");
  }
}

Grid<PolyCoeffs> polynomial_expansion(const ImageF & image, int poly_n, double poly_sigma)
{
  const int w = image.width();
  const int h = image.height();
  const int n = poly_n;
  const auto g = gaussian_kernel(n, poly_sigma);

  // 1D applicability moments
  double a0 = 0.0, a2 = 0.0, a4 = 0.0;
  for (int k = -n; k <= n; ++k) {
    const double gk = g[k + n];
    a0 += gk;
    a2 += gk * k * k;
    a4 += gk * k * k * k * k;
  }
  // Inverse of the even-basis Gram block for (1, x^2, y^2); the odd basis
  // functions are mutually orthogonal under a symmetric applicability.
  const double m[3][3] = {
    {a0 * a0, a2 * a0, a2 * a0}, {a2 * a0, a4 * a0, a2 * a2}, {a2 * a0, a2 * a2, a4 * a0}};
  double inv[3][3];
  {
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  }
  const double inv_b = 1.0 / (a2 * a0);
  const double inv_xy = 1.0 / (a2 * a2);

  // Vertical pass: moments 1, y, y^2 of each column neighbourhood. Samples at
  // +k and -k are paired so that odd moments of symmetric data cancel exactly.
  struct Col
  {
    double s0, s1, s2;
  };
  Grid<Col> cols(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double f0 = image(x, y);
      double s0 = g[n] * f0;
      double s1 = 0.0;
      double s2 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double fp = image(x, clamp_index(y + k, h));
        const double fm = image(x, clamp_index(y - k, h));
        const double gk = g[n + k];
        s0 += gk * (fp + fm);
        s1 += gk * k * (fp - fm);
        s2 += gk * k * k * (fp + fm);
      }
      cols(x, y) = {s0, s1, s2};
    }
  }

  Grid<PolyCoeffs> out(w, h);
  for (int y = 0; y < h; ++y) {
    const Col * row = cols.row(y);
    for (int x = 0; x < w; ++x) {
      const Col & c0 = row[x];
      double m00 = g[n] * c0.s0;
      double m01 = g[n] * c0.s1;
      double m02 = g[n] * c0.s2;
      double m10 = 0.0, m20 = 0.0, m11 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const Col & cp = row[clamp_index(x + k, w)];
        const Col & cm = row[clamp_index(x - k, w)];
        const double gk = g[n + k];
        m00 += gk * (cp.s0 + cm.s0);
        m01 += gk * (cp.s1 + cm.s1);
        m02 += gk * (cp.s2 + cm.s2);
        m10 += gk * k * (cp.s0 - cm.s0);
        m20 += gk * k * k * (cp.s0 + cm.s0);
        m11 += gk * k * (cp.s1 - cm.s1);
      }
      PolyCoeffs & p = out(x, y);
      p.c = static_cast<float>(inv[0][0] * m00 + inv[0][1] * m20 + inv[0][2] * m02);
      p.a_xx = static_cast<float>(inv[1][0] * m00 + inv[1][1] * m20 + inv[1][2] * m02);
      p.a_yy = static_cast<float>(inv[2][0] * m00 + inv[2][1] * m20 + inv[2][2] * m02);
      p.bx = static_cast<float>(m10 * inv_b);
      p.by = static_cast<float>(m01 * inv_b);
      p.a_xy = static_cast<float>(0.5 * m11 * inv_xy);
    }
  }
  return out;
}

std::size_t FlowField::valid_count() const
{
  std::size_t n = 0;
  for (auto v : valid.values()) {
    n += v != 0;
  }
  return n;
}

ImageF to_float(const Image8 & image)
{
  ImageF out(image.width(), image.height());
  auto src = image.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = static_cast<float>(src[i]);
  }
  return out;
}

FlowField compute_flow(const Image8 & prev, const Image8 & next, const FlowParams & params, double dt)
{
  return compute_flow(to_float(prev), to_float(next), params, dt);
}

FlowField compute_flow(const ImageF & prev, const ImageF & next, const FlowParams & params, double dt)
{
  params.validate();
  if (!prev.same_shape(next)) {
    throw Error(
      ErrorKind::contract, fmt::format(
                             "flow frames differ in size: {}x{} vs {}x{}", prev.width(), prev.height(),
                             next.width(), next.height()));
  }
  if (prev.empty()) {
    throw Error(ErrorKind::contract, "flow frames are empty");
  }
  if (!(dt > 0.0)) {
    throw Error(ErrorKind::contract, "flow time step must be positive");
  }
  const int w = prev.width();
  const int h = prev.height();
  const int min_size = 2 * params.poly_n + 1;

  // Drop pyramid levels that would shrink below the expansion neighbourhood.
  int levels = 1;
  for (int k = 1; k < params.pyramid_levels; ++k) {
    const double s = std::pow(params.pyramid_scale, k);
    if (std::lround(w * s) < min_size || std::lround(h * s) < min_size) {
      break;
    }
    levels = k + 1;
  }

  FlowField field;
  field.dt = dt;
  ImageF u, v;
  Grid<std::uint8_t> valid;
  for (int k = levels - 1; k >= 0; --k) {
    const double s = std::pow(params.pyramid_scale, k);
    const int lw = k == 0 ? w : static_cast<int>(std::lround(w * s));
    const int lh = k == 0 ? h : static_cast<int>(std::lround(h * s));
    ImageF i1, i2;
    if (k == 0) {
      i1 = prev;
      i2 = next;
    } else {
      const double sigma = (1.0 / s - 1.0) * 0.5;
      i1 = resize_bilinear(gaussian_blur(prev, sigma), lw, lh);
      i2 = resize_bilinear(gaussian_blur(next, sigma), lw, lh);
    }
    if (u.empty()) {
      u = ImageF(lw, lh, 0.f);
      v = ImageF(lw, lh, 0.f);
    } else {
      const float fx = static_cast<float>(lw) / u.width();
      const float fy = static_cast<float>(lh) / u.height();
      u = resize_bilinear(u, lw, lh);
      v = resize_bilinear(v, lw, lh);
      for (auto & e : u.values()) {
        e *= fx;
      }
      for (auto & e : v.values()) {
        e *= fy;
      }
    }
    valid = Grid<std::uint8_t>(lw, lh, 0);
    const auto r1 = polynomial_expansion(i1, params.poly_n, params.poly_sigma);
    const auto r2 = polynomial_expansion(i2, params.poly_n, params.poly_sigma);
    for (int it = 0; it < params.iterations; ++it) {
      const auto normals = blur_normals(update_matrices(r1, r2, u, v), params.window_size);
      solve_displacement(normals, u, v, valid);
    }
  }

  // A displacement that leaves the frame has no counterpart in the later image.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!valid(x, y)) {
        continue;
      }
      const double qx = x + u(x, y);
      const double qy = y + v(x, y);
      if (!(qx >= 0.0 && qx <= w - 1.0 && qy >= 0.0 && qy <= h - 1.0)) {
        valid(x, y) = 0;
      }
    }
  }
  field.u = std::move(u);
  field.v = std::move(v);
  field.valid = std::move(valid);
  return field;
}

std::vector<Correspondence> subsample_flow(const FlowField & field, int stride)
{
  if (stride < 1) {
    throw Error(ErrorKind::contract, fmt::format("subsample stride must be >= 1, got {}", stride));
  }
  std::vector<Correspondence> pairs;
  for (int y = 0; y < field.height(); y += stride) {
    for (int x = 0; x < field.width(); x += stride) {
      if (!field.valid(x, y)) {
        continue;
      }
      const Vec2 p{static_cast<double>(x), static_cast<double>(y)};
      pairs.push_back({p, p + Vec2{field.u(x, y), field.v(x, y)}});
    }
  }
  return pairs;
}

void write_flow_csv(std::ostream & out, const FlowField & field)
{
  out << "x,y,u,v,valid\n";
  for (int y = 0; y < field.height(); ++y) {
    for (int x = 0; x < field.width(); ++x) {
      out << fmt::format(
        "{},{},{:.6g},{:.6g},{}\n", x, y, field.u(x, y), field.v(x, y), int{field.valid(x, y)});
    }
  }
}

void write_flow_svg(std::ostream & out, const FlowField & field, const Image8 & background, int stride)
{
  constexpr double kScale = 4.0;  // SVG units per pixel
  const int w = field.width();
  const int h = field.height();
  svg::Document doc(w * kScale, h * kScale);
  doc.rect(0, 0, w * kScale, h * kScale, "#000000");
  if (background.same_shape(field.u)) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int g = background(x, y);
        if (g == 0) {
          continue;
        }
        doc.rect(x * kScale, y * kScale, kScale, kScale, fmt::format("#{0:02x}{0:02x}{0:02x}", g));
      }
    }
  }
  stride = std::max(stride, 1);
  for (int y = 0; y < h; y += stride) {
    for (int x = 0; x < w; x += stride) {
      if (!field.valid(x, y)) {
        continue;
      }
      const double x0 = (x + 0.5) * kScale;
      const double y0 = (y + 0.5) * kScale;
      const double x1 = x0 + field.u(x, y) * kScale;
      const double y1 = y0 + field.v(x, y) * kScale;
      doc.line(x0, y0, x1, y1, "#ff8c00", 1.0);
      doc.rect(x1 - 1, y1 - 1, 2, 2, "#ff8c00");
    }
  }
  out << doc.str();
}

}  // namespace groundflow
