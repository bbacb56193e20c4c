#ifndef GROUNDFLOW_SVG_HPP
#define GROUNDFLOW_SVG_HPP

#include <sstream>
#include <string>
#include <string_view>

namespace groundflow::svg
{
/// Minimal SVG document builder with fixed number formatting.
class Document
{
public:
  Document(double width, double height);

  void rect(double x, double y, double w, double h, std::string_view fill, std::string_view extra = {});
  void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width = 1.0);
  void polyline(std::string_view points, std::string_view stroke, double width = 1.0);
  void text(double x, double y, std::string_view content, double size = 12, std::string_view anchor = "start");
  void raw(std::string_view element);

  std::string str() const;

private:
  double width_;
  double height_;
  std::ostringstream body_;
};

std::string escape(std::string_view text);
std::string num(double v);

}  // namespace groundflow::svg

#endif  // GROUNDFLOW_SVG_HPP
