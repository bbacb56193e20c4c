#ifndef GROUNDFLOW_DENSE_FLOW_HPP
#define GROUNDFLOW_DENSE_FLOW_HPP

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "groundflow/geometry.hpp"
#include "groundflow/grid.hpp"

namespace groundflow
{
/// Knobs of the polynomial-expansion flow estimator.
struct FlowParams
{
  int pyramid_levels = 3;
  double pyramid_scale = 0.5;
  int window_size = 15;   // odd, Gaussian-weighted averaging window
  int iterations = 3;     // displacement refinements per level
  int poly_n = 5;         // expansion neighbourhood radius, pixels
  double poly_sigma = 1.1;

  void validate() const;
};

/// Local quadratic model f(x) ~ x^T A x + b^T x + c around one pixel, with
/// A = [[a_xx, a_xy], [a_xy, a_yy]].
struct PolyCoeffs
{
  float c = 0.f;
  float bx = 0.f;
  float by = 0.f;
  float a_xx = 0.f;
  float a_xy = 0.f;
  float a_yy = 0.f;
};

/// Weighted least-squares quadratic fit at every pixel, using a separable
/// Gaussian applicability of std `poly_sigma` over [-poly_n, poly_n]^2.
/// Samples outside the image replicate the nearest border pixel.
Grid<PolyCoeffs> polynomial_expansion(const ImageF & image, int poly_n, double poly_sigma);

struct FlowField
{
  ImageF u;                    // x displacement, pixels
  ImageF v;                    // y displacement, pixels
  Grid<std::uint8_t> valid;
  double dt = 0.0;             // seconds between the source frames

  int width() const { return u.width(); }
  int height() const { return u.height(); }
  std::size_t valid_count() const;
  friend bool operator==(const FlowField &, const FlowField &) = default;
};

/// Dense coarse-to-fine flow from `prev` to `next`.
///
/// A pixel is marked invalid when its averaged normal matrix is near-singular
/// (reciprocal condition below 1e-6), so a textureless input gives an all-invalid
/// field rather than an error. Throws ErrorKind::contract on size mismatch.
FlowField compute_flow(const ImageF & prev, const ImageF & next, const FlowParams & params, double dt);
FlowField compute_flow(const Image8 & prev, const Image8 & next, const FlowParams & params, double dt);

ImageF to_float(const Image8 & image);

/// Point correspondence taken from a flow field: p in the earlier frame, q in the later.
struct Correspondence
{
  Vec2 p;
  Vec2 q;
};

/// (p, p + flow(p)) for every valid pixel whose coordinates are multiples of
/// `stride`. Pixel centres are at integer coordinates.
std::vector<Correspondence> subsample_flow(const FlowField & field, int stride);

/// One row per pixel: `x,y,u,v,valid`.
void write_flow_csv(std::ostream & out, const FlowField & field);

/// Quiver plot of the field at `stride`, drawn over `background`.
void write_flow_svg(std::ostream & out, const FlowField & field, const Image8 & background, int stride);

}  // namespace groundflow

#endif  // GROUNDFLOW_DENSE_FLOW_HPP
