#include "groundflow/plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include <fmt/core.h>

#include "groundflow/error.hpp"
#include "groundflow/evaluation.hpp"
#include "groundflow/svg.hpp"

namespace groundflow
{
namespace
{
constexpr double kWidth = 720;
constexpr double kHeight = 360;
constexpr double kLeft = 70;
constexpr double kRight = 20;
constexpr double kTop = 30;
constexpr double kBottom = 45;

struct Range
{
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v)
  {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  void finish()
  {
    if (!(lo <= hi)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-9) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

class Axes
{
public:
  Axes(Range x, Range y) : x_(x), y_(y) {}
  double px(double x) const { return kLeft + (x - x_.lo) / (x_.hi - x_.lo) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y_.lo) / (y_.hi - y_.lo) * (kHeight - kTop - kBottom); }

  void draw(svg::Document & doc, const std::string & title, const std::string & xlabel, const std::string & ylabel) const
  {
    doc.rect(0, 0, kWidth, kHeight, "white");
    doc.line(kLeft, kHeight - kBottom, kWidth - kRight, kHeight - kBottom, "black");
    doc.line(kLeft, kTop, kLeft, kHeight - kBottom, "black");
    for (int i = 0; i <= 4; ++i) {
      const double fx = x_.lo + (x_.hi - x_.lo) * i / 4.0;
      const double fy = y_.lo + (y_.hi - y_.lo) * i / 4.0;
      doc.line(px(fx), kHeight - kBottom, px(fx), kHeight - kBottom + 4, "black");
      doc.text(px(fx), kHeight - kBottom + 16, fmt::format("{:.3g}", fx), 10, "middle");
      doc.line(kLeft - 4, py(fy), kLeft, py(fy), "black");
      doc.text(kLeft - 6, py(fy) + 3, fmt::format("{:.3g}", fy), 10, "end");
    }
    doc.text(kWidth / 2, 18, title, 13, "middle");
    doc.text(kWidth / 2, kHeight - 8, xlabel, 11, "middle");
    doc.raw(fmt::format(
      R"svg(<text x="14" y="{}" font-size="11" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>)svg",
      svg::num(kHeight / 2), svg::num(kHeight / 2), svg::escape(ylabel)));
  }

private:
  Range x_;
  Range y_;
};

struct Channel
{
  const char * name;
  const char * unit;
  double VelocityEstimate::*field;
  std::vector<double> PairedErrors::*errors;
};

constexpr Channel kChannels[] = {
  {"v_lon", "m/s", &VelocityEstimate::v_lon, &PairedErrors::v_lon},
  {"v_lat", "m/s", &VelocityEstimate::v_lat, &PairedErrors::v_lat},
  {"omega", "rad/s", &VelocityEstimate::omega, &PairedErrors::omega},
};

void write_file(const std::filesystem::path & path, const std::string & content)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorKind::malformed_input, fmt::format("cannot write '{}'", path.string()));
  }
  out << content;
}

std::string timeseries(
  const Channel & ch, std::span<const VelocityEstimate> est, std::span<const VelocityEstimate> truth)
{
  Range xr, yr;
  std::size_t n_valid = 0;
  for (const auto & g : truth) {
    xr.add(g.t_mid);
    yr.add(g.*ch.field);
  }
  for (const auto & e : est) {
    if (e.valid) {
      ++n_valid;
      xr.add(e.t_mid);
      yr.add(e.*ch.field);
    }
  }
  xr.finish();
  const double pad = 0.05 * (yr.hi - yr.lo);
  yr.lo -= pad;
  yr.hi += pad;
  yr.finish();
  Axes ax(xr, yr);
  svg::Document doc(kWidth, kHeight);
  ax.draw(doc, fmt::format("{} estimate vs ground truth", ch.name), "t [s]", fmt::format("{} [{}]", ch.name, ch.unit));

  std::string pts;
  for (const auto & g : truth) {
    pts += fmt::format("{},{} ", svg::num(ax.px(g.t_mid)), svg::num(ax.py(g.*ch.field)));
  }
  doc.polyline(pts, "#888888", 1.5);
  // estimates as a polyline broken at invalid frames
  pts.clear();
  auto flush = [&] {
    if (!pts.empty()) {
      doc.polyline(pts, "#1f77b4", 1.2);
      pts.clear();
    }
  };
  for (const auto & e : est) {
    if (!e.valid) {
      flush();
      continue;
    }
    pts += fmt::format("{},{} ", svg::num(ax.px(e.t_mid)), svg::num(ax.py(e.*ch.field)));
  }
  flush();
  doc.line(kWidth - 200, kTop + 6, kWidth - 180, kTop + 6, "#888888", 1.5);
  doc.text(kWidth - 175, kTop + 10, "ground truth", 10);
  doc.line(kWidth - 110, kTop + 6, kWidth - 90, kTop + 6, "#1f77b4", 1.2);
  doc.text(kWidth - 85, kTop + 10, "estimate", 10);
  if (n_valid == 0) {
    doc.text(kWidth / 2, kHeight / 2, "warning: no valid estimates", 14, "middle");
  }
  return doc.str();
}

std::string residuals(const Channel & ch, const std::vector<double> & errors)
{
  constexpr int kBins = 21;
  double reach = 0.0;
  for (double e : errors) {
    reach = std::max(reach, std::abs(e));
  }
  if (reach == 0.0) {
    reach = 1e-3;
  }
  std::vector<std::size_t> counts(kBins, 0);
  for (double e : errors) {
    const auto b = static_cast<int>(std::floor((e + reach) / (2 * reach) * kBins));
    ++counts[static_cast<std::size_t>(std::clamp(b, 0, kBins - 1))];
  }
  Range xr{-reach, reach};
  Range yr{0.0, static_cast<double>(std::max<std::size_t>(1, *std::max_element(counts.begin(), counts.end())))};
  Axes ax(xr, yr);
  svg::Document doc(kWidth, kHeight);
  ax.draw(doc, fmt::format("{} residuals (estimate - truth)", ch.name), fmt::format("error [{}]", ch.unit), "count");
  const double bw = 2 * reach / kBins;
  for (int b = 0; b < kBins; ++b) {
    if (counts[b] == 0) {
      continue;
    }
    const double x0 = ax.px(-reach + b * bw);
    const double x1 = ax.px(-reach + (b + 1) * bw);
    const double y = ax.py(static_cast<double>(counts[b]));
    doc.rect(x0, y, x1 - x0, kHeight - kBottom - y, "#1f77b4", R"(stroke="white")");
  }
  if (errors.empty()) {
    doc.text(kWidth / 2, kHeight / 2, "warning: no paired estimates", 14, "middle");
  }
  return doc.str();
}

}  // namespace

std::vector<std::filesystem::path> emit_plots(
  std::span<const VelocityEstimate> estimates, std::span<const VelocityEstimate> truth, double tolerance,
  const std::filesystem::path & out_dir)
{
  std::filesystem::create_directories(out_dir);
  const auto paired = pair_with_truth(estimates, truth, tolerance);
  std::vector<std::filesystem::path> written;
  for (const auto & ch : kChannels) {
    const auto p = out_dir / fmt::format("{}_timeseries.svg", ch.name);
    write_file(p, timeseries(ch, estimates, truth));
    written.push_back(p);
  }
  for (const auto & ch : kChannels) {
    const auto p = out_dir / fmt::format("{}_residuals.svg", ch.name);
    write_file(p, residuals(ch, paired.*ch.errors));
    written.push_back(p);
  }
  return written;
}

std::vector<BlurBudgetRow> blur_budget_table(
  std::span<const double> speeds, std::span<const double> budgets, const CameraModel & cam)
{
  std::vector<BlurBudgetRow> rows;
  for (double b : budgets) {
    for (double v : speeds) {
      const auto t = max_exposure_for_blur(b, v, cam);
      rows.push_back({v, b, t.value_or(std::numeric_limits<double>::infinity())});
    }
  }
  return rows;
}

void write_blur_budget_csv(std::ostream & out, std::span<const BlurBudgetRow> rows)
{
  out << "speed_m_s,budget,max_exposure_us\n";
  for (const auto & r : rows) {
    if (std::isfinite(r.max_exposure)) {
      out << fmt::format("{:.6g},{:.6g},{:.6f}\n", r.speed, r.budget, r.max_exposure * 1e6);
    } else {
      out << fmt::format("{:.6g},{:.6g},inf\n", r.speed, r.budget);
    }
  }
}

void write_blur_budget_svg(std::ostream & out, std::span<const BlurBudgetRow> rows)
{
  // exposure on a log10 axis, one curve per budget
  Range xr, yr;
  std::vector<double> budgets;
  for (const auto & r : rows) {
    if (std::isfinite(r.max_exposure) && r.max_exposure > 0) {
      xr.add(r.speed);
      yr.add(std::log10(r.max_exposure * 1e6));
    }
    if (std::find(budgets.begin(), budgets.end(), r.budget) == budgets.end()) {
      budgets.push_back(r.budget);
    }
  }
  xr.finish();
  yr.lo = std::floor(yr.lo);
  yr.hi = std::ceil(yr.hi);
  yr.finish();
  Axes ax(xr, yr);
  svg::Document doc(kWidth, kHeight);
  ax.draw(doc, "maximum exposure for a motion-blur budget", "speed [m/s]", "log10 exposure [us]");
  static constexpr const char * kColours[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    std::string pts;
    for (const auto & r : rows) {
      if (r.budget == budgets[i] && std::isfinite(r.max_exposure) && r.max_exposure > 0) {
        pts += fmt::format("{},{} ", svg::num(ax.px(r.speed)), svg::num(ax.py(std::log10(r.max_exposure * 1e6))));
      }
    }
    const char * colour = kColours[i % std::size(kColours)];
    doc.polyline(pts, colour, 1.5);
    const double ly = kTop + 10 + 14 * static_cast<double>(i);
    doc.line(kWidth - 130, ly - 4, kWidth - 110, ly - 4, colour, 1.5);
    doc.text(kWidth - 105, ly, fmt::format("{:g} % blur", budgets[i] * 100), 10);
  }
  out << doc.str();
}

}  // namespace groundflow
