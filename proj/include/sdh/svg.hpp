#pragma once

#include <string>
#include <vector>

namespace sdh::svg {

struct Series {
    std::string label;
    std::string color = "#888888";
    double width = 1.0;
    std::vector<double> x;
    std::vector<double> y;
};

/// Minimal static line chart with axes, tick labels and an optional
/// horizontal reference line.
std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series,
                       double reference_line = 0.0, bool with_reference = false);

}  // namespace sdh::svg
