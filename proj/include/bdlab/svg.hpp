#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "bdlab/errors.hpp"

namespace bdlab {

// Minimal hand-emitted SVG line charts: polylines plus axis ticks, no external
// references, byte-stable output for identical inputs.

struct Series {
    std::string label;
    std::string color;
    std::vector<std::pair<double, double>> points;
};

namespace detail {

inline std::string svg_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string tick_label(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

}  // namespace detail

inline std::string render_line_chart(const std::string& title, const std::string& x_label,
                                     const std::string& y_label,
                                     const std::vector<Series>& series, int width = 760,
                                     int height = 420) {
    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
    bool first = true;
    for (const Series& s : series) {
        for (const auto& [x, y] : s.points) {
            if (first) {
                xmin = xmax = x;
                ymin = ymax = y;
                first = false;
            } else {
                xmin = std::min(xmin, x);
                xmax = std::max(xmax, x);
                ymin = std::min(ymin, y);
                ymax = std::max(ymax, y);
            }
        }
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) {
        ymax += 0.5;
        ymin -= 0.5;
    }
    // pad the y range slightly so lines do not sit on the frame
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    const double ml = 64, mr = 16, mt = 40, mb = 48;
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return mt + (ymax - y) / (ymax - ymin) * ph; };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) +
           " " + std::to_string(height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + detail::svg_num(ml) + "\" y=\"22\" font-family=\"sans-serif\" "
           "font-size=\"14\" fill=\"black\">" + title + "</text>\n";

    // frame
    out += "<rect x=\"" + detail::svg_num(ml) + "\" y=\"" + detail::svg_num(mt) + "\" width=\"" +
           detail::svg_num(pw) + "\" height=\"" + detail::svg_num(ph) +
           "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";

    // ticks
    const int n_ticks = 5;
    for (int i = 0; i <= n_ticks; ++i) {
        const double fx = xmin + (xmax - xmin) * i / n_ticks;
        const double px = sx(fx);
        out += "<line x1=\"" + detail::svg_num(px) + "\" y1=\"" + detail::svg_num(mt + ph) +
               "\" x2=\"" + detail::svg_num(px) + "\" y2=\"" + detail::svg_num(mt + ph + 5) +
               "\" stroke=\"black\"/>\n";
        out += "<text x=\"" + detail::svg_num(px) + "\" y=\"" + detail::svg_num(mt + ph + 18) +
               "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"black\" "
               "text-anchor=\"middle\">" + detail::tick_label(fx) + "</text>\n";
        const double fy = ymin + (ymax - ymin) * i / n_ticks;
        const double py = sy(fy);
        out += "<line x1=\"" + detail::svg_num(ml - 5) + "\" y1=\"" + detail::svg_num(py) +
               "\" x2=\"" + detail::svg_num(ml) + "\" y2=\"" + detail::svg_num(py) +
               "\" stroke=\"black\"/>\n";
        out += "<text x=\"" + detail::svg_num(ml - 8) + "\" y=\"" + detail::svg_num(py + 4) +
               "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"black\" "
               "text-anchor=\"end\">" + detail::tick_label(fy) + "</text>\n";
    }

    out += "<text x=\"" + detail::svg_num(ml + pw / 2) + "\" y=\"" +
           detail::svg_num(static_cast<double>(height) - 10) +
           "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"black\" "
           "text-anchor=\"middle\">" + x_label + "</text>\n";
    out += "<text x=\"14\" y=\"" + detail::svg_num(mt + ph / 2) +
           "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"black\" "
           "text-anchor=\"middle\" transform=\"rotate(-90 14 " + detail::svg_num(mt + ph / 2) +
           ")\">" + y_label + "</text>\n";

    for (const Series& s : series) {
        if (s.points.empty()) continue;
        out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.2\" points=\"";
        for (const auto& [x, y] : s.points) {
            out += detail::svg_num(sx(x));
            out += ',';
            out += detail::svg_num(sy(y));
            out += ' ';
        }
        if (out.back() == ' ') out.pop_back();
        out += "\"/>\n";
    }

    // legend
    double ly = mt + 14;
    for (const Series& s : series) {
        out += "<line x1=\"" + detail::svg_num(ml + pw - 120) + "\" y1=\"" +
               detail::svg_num(ly - 4) + "\" x2=\"" + detail::svg_num(ml + pw - 100) +
               "\" y2=\"" + detail::svg_num(ly - 4) + "\" stroke=\"" + s.color +
               "\" stroke-width=\"2\"/>\n";
        out += "<text x=\"" + detail::svg_num(ml + pw - 94) + "\" y=\"" + detail::svg_num(ly) +
               "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">" + s.label +
               "</text>\n";
        ly += 16;
    }

    out += "</svg>\n";
    return out;
}

inline void write_svg(const std::string& content, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << content;
    if (!out) throw IoError("failed while writing " + path);
}

}  // namespace bdlab
