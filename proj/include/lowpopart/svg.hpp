#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lowpopart/errors.hpp"
#include "lowpopart/io.hpp"

namespace lowpopart::harness {

/// One plotted series: x values with mean and standard deviation.
struct PlotSeries {
    std::string label;
    std::vector<double> x, mean, std;
};

namespace detail {

inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace detail

/// Parses an aggregate CSV (columns x, series, mean, std with any header
/// names) into ordered series.
inline std::vector<PlotSeries> load_aggregate_csv(const std::string& path) {
    const auto lines = io::read_lines(path);
    if (lines.size() < 2) throw contract_error("plot: aggregate CSV has no data rows: " + path);
    std::vector<PlotSeries> series;
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = io::split_csv_line(lines[i]);
        if (cells.size() != 4) throw contract_error("plot: aggregate CSV rows need 4 columns");
        const std::string& name = cells[1];
        if (!index.count(name)) {
            index[name] = series.size();
            series.push_back(PlotSeries{name, {}, {}, {}});
        }
        PlotSeries& s = series[index[name]];
        s.x.push_back(io::parse_double(cells[0], "plot x"));
        s.mean.push_back(io::parse_double(cells[2], "plot mean"));
        s.std.push_back(io::parse_double(cells[3], "plot std"));
    }
    return series;
}

/// Renders a line chart with +-1 std shaded bands, one series per method.
/// Output is deterministic: fixed layout, fixed palette, fixed number
/// formatting, no timestamps.
inline std::string render_plot(const std::vector<PlotSeries>& series, const std::string& title,
                               const std::string& x_label, const std::string& y_label) {
    if (series.empty()) throw contract_error("plot: no series to draw");
    constexpr double width = 800, height = 520;
    constexpr double ml = 70, mr = 20, mt = 40, mb = 50;
    const double px = width - ml - mr, py = height - mt - mb;

    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    for (const PlotSeries& s : series) {
        if (s.x.empty()) throw contract_error("plot: empty series '" + s.label + "'");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x_lo = std::min(x_lo, s.x[i]);
            x_hi = std::max(x_hi, s.x[i]);
            y_lo = std::min(y_lo, s.mean[i] - s.std[i]);
            y_hi = std::max(y_hi, s.mean[i] + s.std[i]);
        }
    }
    if (x_hi == x_lo) x_hi = x_lo + 1.0;
    if (y_hi == y_lo) y_hi = y_lo + 1.0;
    const double pad = 0.05 * (y_hi - y_lo);
    y_lo -= pad;
    y_hi += pad;

    const auto sx = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * px; };
    const auto sy = [&](double y) { return mt + py - (y - y_lo) / (y_hi - y_lo) * py; };

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
           "font-family=\"sans-serif\">" << title << "</text>\n";

    // axes with 5 ticks per side
    out << "<line x1=\"" << ml << "\" y1=\"" << mt + py << "\" x2=\"" << ml + px << "\" y2=\""
        << mt + py << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + py
        << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 5; ++k) {
        const double xv = x_lo + (x_hi - x_lo) * k / 5.0;
        const double yv = y_lo + (y_hi - y_lo) * k / 5.0;
        out << "<text x=\"" << detail::svg_num(sx(xv)) << "\" y=\"" << mt + py + 18
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
            << detail::svg_num(xv) << "</text>\n";
        out << "<text x=\"" << ml - 6 << "\" y=\"" << detail::svg_num(sy(yv) + 4)
            << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
            << detail::svg_num(yv) << "</text>\n";
    }
    out << "<text x=\"" << ml + px / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << x_label
        << "</text>\n";
    out << "<text x=\"16\" y=\"" << mt + py / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
           "transform=\"rotate(-90 16 " << mt + py / 2 << ")\">" << y_label << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const PlotSeries& s = series[si];
        const char* color = palette[si % (sizeof(palette) / sizeof(palette[0]))];

        out << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            out << detail::svg_num(sx(s.x[i])) << "," << detail::svg_num(sy(s.mean[i] + s.std[i])) << " ";
        for (std::size_t i = s.x.size(); i-- > 0;)
            out << detail::svg_num(sx(s.x[i])) << "," << detail::svg_num(sy(s.mean[i] - s.std[i])) << " ";
        out << "\"/>\n";

        out << "<path fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" d=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            out << (i == 0 ? "M" : "L") << detail::svg_num(sx(s.x[i])) << " "
                << detail::svg_num(sy(s.mean[i]));
        out << "\"/>\n";

        const double ly = mt + 16 + 18 * static_cast<double>(si);
        out << "<line x1=\"" << ml + px - 150 << "\" y1=\"" << ly << "\" x2=\"" << ml + px - 126
            << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << ml + px - 120 << "\" y=\"" << ly + 4
            << "\" font-size=\"12\" font-family=\"sans-serif\">" << s.label << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

inline void emit_plot(const std::string& aggregate_csv, const std::string& svg_path,
                      const std::string& style) {
    const auto series = load_aggregate_csv(aggregate_csv);
    const bool bandit = style == "bandit";
    const std::string svg =
        render_plot(series, bandit ? "Cumulative regret" : "Nuclear-norm recovery error",
                    bandit ? "t" : "n0", bandit ? "cumulative regret" : "nuclear error");
    io::write_file(svg_path, svg);
}

}  // namespace lowpopart::harness
