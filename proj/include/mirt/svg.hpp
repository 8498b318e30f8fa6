#pragma once

// Static SVG heatmap of a loading matrix: diverging palette anchored at
// zero (blue negative, white zero, red positive).

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "mirt/common.hpp"

namespace mirt {

namespace detail {
inline std::string heat_color(double v, double scale) {
  const double t = scale > 0.0 ? std::min(std::abs(v) / scale, 1.0) : 0.0;
  const int fade = static_cast<int>(std::lround(255.0 * (1.0 - t)));
  int r = 255, g = fade, b = fade;
  if (v < 0.0) {
    r = fade;
    g = fade;
    b = 255;
  }
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}
}  // namespace detail

inline std::string loading_heatmap_svg(const Matrix& loading, const std::string& title = "") {
  const int rows = static_cast<int>(loading.rows());
  const int cols = static_cast<int>(loading.cols());
  const int cell_w = 18;
  const int cell_h = std::max(2, std::min(18, 720 / std::max(1, rows)));
  const int margin = title.empty() ? 4 : 24;
  const int width = cols * cell_w + 8;
  const int height = rows * cell_h + margin + 4;
  const double scale = loading.cwiseAbs().maxCoeff();

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\">\n";
  if (!title.empty())
    svg += "<text x=\"4\" y=\"16\" font-family=\"sans-serif\" font-size=\"13\">" + title +
           "</text>\n";
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      svg += "<rect x=\"" + std::to_string(4 + c * cell_w) + "\" y=\"" +
             std::to_string(margin + r * cell_h) + "\" width=\"" + std::to_string(cell_w) +
             "\" height=\"" + std::to_string(cell_h) + "\" fill=\"" +
             detail::heat_color(loading(r, c), scale) + "\"/>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

inline void write_loading_heatmap(const std::string& path, const Matrix& loading,
                                  const std::string& title = "") {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << loading_heatmap_svg(loading, title);
}

}  // namespace mirt
