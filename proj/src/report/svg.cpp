#include "mpd/report/svg.hpp"

#include <algorithm>
#include <cmath>

#include "mpd/util/csv.hpp"

namespace mpd::report {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 160, kTop = 60, kBottom = 60;

std::string num(double v) {
    // Two decimals keeps the file small and stable.
    return util::format_number(std::round(v * 100.0) / 100.0);
}

} // namespace

std::string xml_escape(std::string_view text) {
    std::string out;
    for (char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string line_plot_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                          std::span<const Series> series, const std::string& note) {
    std::size_t points = 1;
    double y_max = 0.0;
    for (const auto& s : series) {
        points = std::max(points, s.values.size());
        for (double v : s.values)
            if (std::isfinite(v)) y_max = std::max(y_max, v);
    }
    if (y_max <= 0.0) y_max = 1.0;
    const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
    auto px = [&](std::size_t i) { return kLeft + (points > 1 ? plot_w * static_cast<double>(i) / static_cast<double>(points - 1) : plot_w / 2); };
    auto py = [&](double v) { return kTop + plot_h * (1.0 - v / y_max); };

    std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
           "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + num(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + xml_escape(title) +
           "</text>\n";
    if (!note.empty())
        svg += "<text x=\"" + num(kWidth / 2) + "\" y=\"42\" text-anchor=\"middle\" fill=\"#666\">" + xml_escape(note) +
               "</text>\n";

    // Axes and ticks.
    svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop + plot_h) + "\" x2=\"" + num(kLeft + plot_w) + "\" y2=\"" +
           num(kTop + plot_h) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
           num(kTop + plot_h) + "\" stroke=\"black\"/>\n";
    for (std::size_t i = 0; i < points; ++i)
        svg += "<text x=\"" + num(px(i)) + "\" y=\"" + num(kTop + plot_h + 16) + "\" text-anchor=\"middle\">" +
               std::to_string(i) + "</text>\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = y_max * t / 4.0;
        svg += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(v) + 4) + "\" text-anchor=\"end\">" +
               util::format_number(std::round(v * 1000.0) / 1000.0) + "</text>\n";
    }
    svg += "<text x=\"" + num(kLeft + plot_w / 2) + "\" y=\"" + num(kHeight - 16) + "\" text-anchor=\"middle\">" +
           xml_escape(x_label) + "</text>\n";
    svg += "<text x=\"18\" y=\"" + num(kTop + plot_h / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
           num(kTop + plot_h / 2) + ")\">" + xml_escape(y_label) + "</text>\n";

    double legend_y = kTop + 10;
    for (const auto& s : series) {
        svg += "<polyline fill=\"none\" stroke=\"" + xml_escape(s.color) + "\" stroke-width=\"2\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            if (!std::isfinite(s.values[i])) continue;
            if (!first) svg += ' ';
            svg += num(px(i)) + "," + num(py(s.values[i]));
            first = false;
        }
        svg += "\"/>\n";
        const double lx = kLeft + plot_w + 16;
        svg += "<line x1=\"" + num(lx) + "\" y1=\"" + num(legend_y) + "\" x2=\"" + num(lx + 20) + "\" y2=\"" +
               num(legend_y) + "\" stroke=\"" + xml_escape(s.color) + "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + num(lx + 26) + "\" y=\"" + num(legend_y + 4) + "\">" + xml_escape(s.name) + "</text>\n";
        legend_y += 18;
    }
    svg += "</svg>\n";
    return svg;
}

} // namespace mpd::report
