#ifndef PROCRL_SVG_HPP_
#define PROCRL_SVG_HPP_

#include <string>
#include <vector>

namespace procrl {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool bars = false;  // draw y as bars at each x instead of lines
};

// Standalone SVG line (or bar) chart. Output depends only on the inputs.
std::string render_svg(const PlotSpec& spec, const std::vector<Series>& series);

}  // namespace procrl

#endif  // PROCRL_SVG_HPP_
