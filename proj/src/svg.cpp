#include "fbwm/cli/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fbwm/cli/csv.hpp"

namespace fbwm::cli {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string fixed(double v)
{
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    os << v;
    return os.str();
}

struct Axis {
    bool log = false;
    double lo = 0, hi = 1;

    double transform(double v) const { return log ? std::log10(v) : v; }
    bool usable(double v) const { return std::isfinite(v) && (!log || v > 0); }
    double frac(double v) const { return hi > lo ? (transform(v) - lo) / (hi - lo) : 0.5; }
};

}  // namespace

std::string render_svg(const LinePlot& plot)
{
    Axis ax{plot.log_x}, ay{plot.log_y};
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto& s : plot.series) {
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!ax.usable(s.x[i]) || !ay.usable(s.y[i])) continue;
            xmin = std::min(xmin, ax.transform(s.x[i]));
            xmax = std::max(xmax, ax.transform(s.x[i]));
            const double e = i < s.y_err.size() && std::isfinite(s.y_err[i]) ? s.y_err[i] : 0.0;
            const double lo = ay.log ? s.y[i] : s.y[i] - e;
            ymin = std::min(ymin, ay.transform(lo));
            ymax = std::max(ymax, ay.transform(s.y[i] + e));
        }
    }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    ax.lo = xmin, ax.hi = xmax, ay.lo = ymin, ay.hi = ymax;
    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + ax.frac(x) * pw; };
    auto py = [&](double y) { return kTop + (1.0 - ay.frac(y)) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << kLeft << "\" y=\"24\" font-size=\"14\">" << escape(plot.title) << "</text>\n";
    os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    auto tick = [](double t, bool log) { return format_number(log ? std::pow(10.0, t) : t); };
    for (int k = 0; k <= 4; ++k) {
        const double tx = xmin + (xmax - xmin) * k / 4.0, ty = ymin + (ymax - ymin) * k / 4.0;
        const double x = kLeft + pw * k / 4.0, y = kTop + ph * (1.0 - k / 4.0);
        os << "<text x=\"" << fixed(x) << "\" y=\"" << fixed(kTop + ph + 16) << "\" text-anchor=\"middle\">"
           << tick(tx, ax.log).substr(0, 8) << "</text>\n";
        os << "<text x=\"" << fixed(kLeft - 6) << "\" y=\"" << fixed(y + 4) << "\" text-anchor=\"end\">"
           << tick(ty, ay.log).substr(0, 8) << "</text>\n";
    }
    os << "<text x=\"" << fixed(kLeft + pw / 2) << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">"
       << escape(plot.x_label) << (ax.log ? " (log)" : "") << "</text>\n";
    os << "<text transform=\"translate(16," << fixed(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
       << escape(plot.y_label) << (ay.log ? " (log)" : "") << "</text>\n";

    for (std::size_t k = 0; k < plot.series.size(); ++k) {
        const Series& s = plot.series[k];
        const char* color = kColors[k % std::size(kColors)];
        std::string line, band_hi, band_lo;
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!ax.usable(s.x[i]) || !ay.usable(s.y[i])) continue;
            line += (line.empty() ? "" : " ") + fixed(px(s.x[i])) + "," + fixed(py(s.y[i]));
            if (i < s.y_err.size() && std::isfinite(s.y_err[i]) && !ay.log) {
                band_hi += fixed(px(s.x[i])) + "," + fixed(py(s.y[i] + s.y_err[i])) + " ";
                band_lo = fixed(px(s.x[i])) + "," + fixed(py(s.y[i] - s.y_err[i])) + " " + band_lo;
            }
        }
        if (!band_hi.empty()) {
            os << "<polygon points=\"" << band_hi << band_lo << "\" fill=\"" << color
               << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
        }
        os << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
        const double ly = kTop + 14 + 18 * static_cast<double>(k);
        os << "<line x1=\"" << fixed(kLeft + pw + 10) << "\" y1=\"" << fixed(ly) << "\" x2=\"" << fixed(kLeft + pw + 30)
           << "\" y2=\"" << fixed(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << fixed(kLeft + pw + 34) << "\" y=\"" << fixed(ly + 4) << "\">" << escape(s.name)
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace fbwm::cli
