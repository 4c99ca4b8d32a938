#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "scorebreak/breakdown.hpp"
#include "scorebreak/detail/format.hpp"

// Grouped-bar figure for one breakdown: per system, a solid bar of the true
// score next to a stacked bar of the estimated score whose segments are the
// per-factor contributions. Pure string assembly; byte-identical for
// identical inputs, so report files can be diffed in tests. Every bar and
// segment carries its exact value in a data-seconds attribute; the pixel
// geometry is rounded but the data channel is not.

namespace scorebreak {

struct SvgOptions {
    double width = 960.0;
    double height = 480.0;
};

namespace detail {

inline const char* regressor_color(const std::string& name) {
    static const std::map<std::string, const char*> colors = {
        {"loop31", "#9e9e9e"}, {"C_Ia", "#1f77b4"}, {"C_Im", "#aec7e8"},
        {"C_Iam", "#ff7f0e"},  {"C_Id", "#ffbb78"}, {"C_Is", "#2ca02c"},
        {"C_Isl", "#98df8a"},  {"C_Fa", "#d62728"}, {"C_Fm", "#ff9896"},
        {"C_Fd", "#9467bd"},   {"C_Fs", "#c5b0d5"}, {"C_Fsl", "#8c564b"},
        {"intercept", "#e377c2"},
    };
    auto it = colors.find(name);
    return it != colors.end() ? it->second : "#555555";
}

inline std::string svg_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
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

}  // namespace detail

inline std::string render_svg(const BreakdownModel& model, const ContributionTable& table,
                              const SvgOptions& opt = {}) {
    using detail::svg_coord;
    using detail::xml_escape;

    const double margin_left = 70.0, margin_right = 215.0;
    const double margin_top = 45.0, margin_bottom = 80.0;
    const double plot_w = opt.width - margin_left - margin_right;
    const double plot_h = opt.height - margin_top - margin_bottom;
    const double base_y = margin_top + plot_h;

    double max_score = 0.0;
    for (const SystemContributions& sc : table.systems)
        max_score = std::max({max_score, sc.true_score, sc.fitted_score});
    if (max_score <= 0.0) max_score = 1.0;
    const double scale = plot_h / max_score;

    const std::size_t n = table.systems.size();
    const double group_w = n > 0 ? plot_w / static_cast<double>(n) : plot_w;
    const double bar_w = group_w * 0.32;

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg_coord(opt.width)
        << "\" height=\"" << svg_coord(opt.height) << "\" viewBox=\"0 0 "
        << svg_coord(opt.width) << " " << svg_coord(opt.height) << "\">\n";
    out << "<!-- breakdown-svg schema 1 -->\n";
    out << "<style>text{font-family:sans-serif;fill:#222;}</style>\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    out << "<text x=\"" << svg_coord(margin_left) << "\" y=\"24\" font-size=\"15\">"
        << xml_escape(model.target) << ": true vs estimated score</text>\n";

    // Horizontal gridlines with tick labels in seconds.
    for (int t = 0; t <= 4; ++t) {
        double frac = static_cast<double>(t) / 4.0;
        double y = base_y - frac * plot_h;
        out << "<line x1=\"" << svg_coord(margin_left) << "\" y1=\"" << svg_coord(y)
            << "\" x2=\"" << svg_coord(margin_left + plot_w) << "\" y2=\"" << svg_coord(y)
            << "\" stroke=\"#dddddd\"/>\n";
        char label[32];
        std::snprintf(label, sizeof label, "%.3g", frac * max_score);
        out << "<text x=\"" << svg_coord(margin_left - 8) << "\" y=\"" << svg_coord(y + 4)
            << "\" font-size=\"11\" text-anchor=\"end\">" << label << "</text>\n";
    }
    out << "<text x=\"16\" y=\"" << svg_coord(margin_top + plot_h / 2)
        << "\" font-size=\"12\" transform=\"rotate(-90 16 " << svg_coord(margin_top + plot_h / 2)
        << ")\" text-anchor=\"middle\">seconds</text>\n";

    for (std::size_t i = 0; i < n; ++i) {
        const SystemContributions& sc = table.systems[i];
        const double gx = margin_left + static_cast<double>(i) * group_w;
        const double true_x = gx + group_w * 0.14;
        const double est_x = gx + group_w * 0.54;

        double th = sc.true_score * scale;
        out << "<rect x=\"" << svg_coord(true_x) << "\" y=\"" << svg_coord(base_y - th)
            << "\" width=\"" << svg_coord(bar_w) << "\" height=\"" << svg_coord(th)
            << "\" fill=\"#212121\" data-kind=\"true\" data-system=\""
            << xml_escape(sc.system_id) << "\" data-seconds=\""
            << detail::format_double(sc.true_score) << "\"/>\n";

        double stack = 0.0;
        for (const ContributionEntry& e : sc.entries) {
            if (e.seconds <= 0.0) continue;  // zero segments add no geometry
            double y0 = base_y - stack * scale;
            double h = e.seconds * scale;
            out << "<rect x=\"" << svg_coord(est_x) << "\" y=\"" << svg_coord(y0 - h)
                << "\" width=\"" << svg_coord(bar_w) << "\" height=\"" << svg_coord(h)
                << "\" fill=\"" << detail::regressor_color(e.name)
                << "\" data-kind=\"segment\" data-system=\"" << xml_escape(sc.system_id)
                << "\" data-regressor=\"" << xml_escape(e.name) << "\" data-seconds=\""
                << detail::format_double(e.seconds) << "\"/>\n";
            stack += e.seconds;
        }

        double lx = gx + group_w * 0.5;
        out << "<text x=\"" << svg_coord(lx) << "\" y=\"" << svg_coord(base_y + 16)
            << "\" font-size=\"11\" text-anchor=\"end\" transform=\"rotate(-30 "
            << svg_coord(lx) << " " << svg_coord(base_y + 16) << ")\">"
            << xml_escape(sc.system_id) << "</text>\n";
    }

    // Legend: true-score swatch first, then one entry per regressor.
    double lx = margin_left + plot_w + 18.0;
    double ly = margin_top;
    out << "<rect x=\"" << svg_coord(lx) << "\" y=\"" << svg_coord(ly)
        << "\" width=\"12\" height=\"12\" fill=\"#212121\"/>\n";
    out << "<text x=\"" << svg_coord(lx + 18) << "\" y=\"" << svg_coord(ly + 10)
        << "\" font-size=\"11\">true score</text>\n";
    ly += 18.0;
    for (const std::string& name : model.coefficient_names) {
        out << "<rect x=\"" << svg_coord(lx) << "\" y=\"" << svg_coord(ly)
            << "\" width=\"12\" height=\"12\" fill=\"" << detail::regressor_color(name)
            << "\"/>\n";
        std::string label = name == "loop31" ? "loop31 (overhead)" : name;
        out << "<text x=\"" << svg_coord(lx + 18) << "\" y=\"" << svg_coord(ly + 10)
            << "\" font-size=\"11\">" << xml_escape(label) << "</text>\n";
        ly += 18.0;
    }

    out << "</svg>\n";
    return out.str();
}

}  // namespace scorebreak
