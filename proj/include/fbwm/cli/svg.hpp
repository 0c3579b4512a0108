#pragma once

#include <string>
#include <vector>

namespace fbwm::cli {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> y_err;  // optional symmetric error band
};

struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    std::vector<Series> series;
};

// Standalone SVG document. Non-finite points, and non-positive points on log
// axes, are skipped.
std::string render_svg(const LinePlot& plot);

}  // namespace fbwm::cli
