#include "sdh/svg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace sdh::svg {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 55.0;

std::string fmt(double v) {
    std::ostringstream out;
    out << std::setprecision(6) << v;
    return out.str();
}

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series,
                       double reference_line, bool with_reference) {
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    for (const auto& s : series) {
        for (double x : s.x) {
            x_lo = std::min(x_lo, x);
            x_hi = std::max(x_hi, x);
        }
        for (double y : s.y) {
            y_lo = std::min(y_lo, y);
            y_hi = std::max(y_hi, y);
        }
    }
    if (!std::isfinite(x_lo)) {
        x_lo = 0.0;
        x_hi = 1.0;
        y_lo = 0.0;
        y_hi = 1.0;
    }
    if (with_reference) {
        y_lo = std::min(y_lo, reference_line);
        y_hi = std::max(y_hi, reference_line);
    }
    if (x_hi == x_lo) x_hi = x_lo + 1.0;
    if (y_hi == y_lo) y_hi = y_lo + 1.0;
    const double pad = 0.05 * (y_hi - y_lo);
    y_lo -= pad;
    y_hi += pad;

    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const double plot_h = kHeight - kMarginTop - kMarginBottom;
    auto px = [&](double x) { return kMarginLeft + (x - x_lo) / (x_hi - x_lo) * plot_w; };
    auto py = [&](double y) { return kMarginTop + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h; };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"16\" "
           "font-family=\"sans-serif\">"
        << title << "</text>\n";

    // axes
    out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\"" << kMarginLeft
        << "\" y2=\"" << kMarginTop + plot_h << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\""
        << kMarginLeft + plot_w << "\" y2=\"" << kMarginTop + plot_h << "\" stroke=\"black\"/>\n";

    const int ticks = 5;
    for (int i = 0; i <= ticks; ++i) {
        const double tx = x_lo + (x_hi - x_lo) * i / ticks;
        const double ty = y_lo + (y_hi - y_lo) * i / ticks;
        out << "<text x=\"" << px(tx) << "\" y=\"" << kMarginTop + plot_h + 18
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(tx)
            << "</text>\n";
        out << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << py(ty) + 4
            << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(ty)
            << "</text>\n";
        out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << py(ty) << "\" x2=\""
            << kMarginLeft + plot_w << "\" y2=\"" << py(ty)
            << "\" stroke=\"#eeeeee\" stroke-width=\"1\"/>\n";
    }
    out << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << x_label
        << "</text>\n";
    out << "<text x=\"18\" y=\"" << kMarginTop + plot_h / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" transform=\"rotate(-90 "
        << 18 << " " << kMarginTop + plot_h / 2 << ")\">" << y_label << "</text>\n";

    if (with_reference) {
        out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << py(reference_line) << "\" x2=\""
            << kMarginLeft + plot_w << "\" y2=\"" << py(reference_line)
            << "\" stroke=\"#cc3333\" stroke-dasharray=\"6 4\"/>\n";
    }

    double legend_y = kMarginTop + 6;
    for (const auto& s : series) {
        if (s.x.empty()) continue;
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"" << s.width
            << "\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) out << px(s.x[i]) << "," << py(s.y[i]) << " ";
        out << "\"/>\n";
        if (!s.label.empty()) {
            out << "<line x1=\"" << kMarginLeft + plot_w - 130 << "\" y1=\"" << legend_y << "\" x2=\""
                << kMarginLeft + plot_w - 110 << "\" y2=\"" << legend_y << "\" stroke=\"" << s.color
                << "\" stroke-width=\"" << s.width << "\"/>\n";
            out << "<text x=\"" << kMarginLeft + plot_w - 104 << "\" y=\"" << legend_y + 4
                << "\" font-size=\"11\" font-family=\"sans-serif\">" << s.label << "</text>\n";
            legend_y += 16;
        }
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace sdh::svg
