#include "groundflow/svg.hpp"

#include <fmt/core.h>

namespace groundflow::svg
{
std::string num(double v)
{
  if (v == 0.0) {
    return "0";  // avoids "-0"
  }
  return fmt::format("{:.2f}", v);
}

std::string escape(std::string_view text)
{
  std::string out;
  out.reserve(text.size());
  for (char ch : text) {
    switch (ch) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += ch;
    }
  }
  return out;
}

Document::Document(double width, double height) : width_(width), height_(height) {}

void Document::rect(double x, double y, double w, double h, std::string_view fill, std::string_view extra)
{
  body_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\""
        << num(h) << "\" fill=\"" << fill << '"';
  if (!extra.empty()) {
    body_ << ' ' << extra;
  }
  body_ << "/>\n";
}

void Document::line(double x1, double y1, double x2, double y2, std::string_view stroke, double width)
{
  body_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\""
        << num(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\"/>\n";
}

void Document::polyline(std::string_view points, std::string_view stroke, double width)
{
  body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width)
        << "\" points=\"" << points << "\"/>\n";
}

void Document::text(double x, double y, std::string_view content, double size, std::string_view anchor)
{
  body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-family=\"sans-serif\" font-size=\""
        << num(size) << "\" text-anchor=\"" << anchor << "\">" << escape(content) << "</text>\n";
}

void Document::raw(std::string_view element) { body_ << element << '\n'; }

std::string Document::str() const
{
  return fmt::format(
    "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
    "{2}</svg>\n",
    num(width_), num(height_), body_.str());
}

}  // namespace groundflow::svg
