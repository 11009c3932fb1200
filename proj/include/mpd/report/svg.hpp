#pragma once

#include <span>
#include <string>
#include <vector>

namespace mpd::report {

struct Series {
    std::string name;
    std::vector<double> values;  // y at x = 0, 1, ...
    std::string color;
};

// Static line chart, one <polyline> per series, with axes, ticks and a
// legend. `note` (if any) is printed under the title.
std::string line_plot_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                          std::span<const Series> series, const std::string& note = {});

std::string xml_escape(std::string_view text);

} // namespace mpd::report
