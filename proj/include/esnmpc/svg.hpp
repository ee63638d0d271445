#pragma once

// Minimal static SVG line charts: stacked panels sharing an x axis.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "esnmpc/error.hpp"

namespace esnmpc::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
    bool dashed = false;
};

struct Panel {
    std::string y_label;
    std::vector<Series> series;
};

struct Figure {
    std::string title;
    std::string x_label;
    std::vector<Panel> panels;
    int width = 800;
    int panel_height = 260;
};

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buf;
}

inline std::string escape(const std::string& s) {
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

/// Tick positions at a 1-2-5 step covering [lo, hi].
inline std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
    const double span = hi - lo;
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (step >= raw) break;
    }
    std::vector<double> ticks;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) ticks.push_back(t);
    return ticks;
}

struct Range {
    double lo = 0.0;
    double hi = 1.0;
};

inline Range padded(double lo, double hi) {
    if (!(hi > lo)) {
        const double pad = std::max(1.0, std::abs(lo) * 0.1);
        return {lo - pad, hi + pad};
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

}  // namespace detail

inline std::string render(const Figure& fig) {
    constexpr double left = 80, right = 170, top = 50, gap = 40, bottom = 50;
    const double plot_w = fig.width - left - right;
    const double ph = fig.panel_height;
    const double height = top + fig.panels.size() * (ph + gap) - gap + bottom;

    double xmin = INFINITY, xmax = -INFINITY;
    for (const auto& p : fig.panels)
        for (const auto& s : p.series)
            for (double v : s.x)
                if (std::isfinite(v)) xmin = std::min(xmin, v), xmax = std::max(xmax, v);
    if (!std::isfinite(xmin)) xmin = 0.0, xmax = 1.0;
    const detail::Range xr = xmax > xmin ? detail::Range{xmin, xmax} : detail::padded(xmin, xmax);

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fig.width << "\" height=\"" << detail::num(height)
      << "\" viewBox=\"0 0 " << fig.width << ' ' << detail::num(height) << "\" font-family=\"sans-serif\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << detail::num(left + plot_w / 2) << "\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">"
      << detail::escape(fig.title) << "</text>\n";

    for (std::size_t pi = 0; pi < fig.panels.size(); ++pi) {
        const auto& panel = fig.panels[pi];
        const double y0 = top + pi * (ph + gap);

        double ymin = INFINITY, ymax = -INFINITY;
        for (const auto& s : panel.series)
            for (double v : s.y)
                if (std::isfinite(v)) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
        if (!std::isfinite(ymin)) ymin = 0.0, ymax = 1.0;
        const detail::Range yr = detail::padded(ymin, ymax);

        auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
        auto py = [&](double y) { return y0 + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

        o << "<rect x=\"" << detail::num(left) << "\" y=\"" << detail::num(y0) << "\" width=\"" << detail::num(plot_w)
          << "\" height=\"" << detail::num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
        for (double t : detail::nice_ticks(yr.lo, yr.hi)) {
            o << "<line x1=\"" << detail::num(left) << "\" x2=\"" << detail::num(left + plot_w) << "\" y1=\""
              << detail::num(py(t)) << "\" y2=\"" << detail::num(py(t)) << "\" stroke=\"#dddddd\"/>\n";
            o << "<text x=\"" << detail::num(left - 6) << "\" y=\"" << detail::num(py(t) + 4)
              << "\" text-anchor=\"end\" font-size=\"11\">" << detail::tick_label(t) << "</text>\n";
        }
        for (double t : detail::nice_ticks(xr.lo, xr.hi)) {
            o << "<line x1=\"" << detail::num(px(t)) << "\" x2=\"" << detail::num(px(t)) << "\" y1=\""
              << detail::num(y0 + ph) << "\" y2=\"" << detail::num(y0 + ph + 5) << "\" stroke=\"black\"/>\n";
            o << "<text x=\"" << detail::num(px(t)) << "\" y=\"" << detail::num(y0 + ph + 18)
              << "\" text-anchor=\"middle\" font-size=\"11\">" << detail::tick_label(t) << "</text>\n";
        }
        o << "<text transform=\"translate(" << detail::num(left - 50) << ',' << detail::num(y0 + ph / 2)
          << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"13\">" << detail::escape(panel.y_label)
          << "</text>\n";

        for (std::size_t si = 0; si < panel.series.size(); ++si) {
            const auto& s = panel.series[si];
            o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.8\"";
            if (s.dashed) o << " stroke-dasharray=\"6,4\"";
            o << " points=\"";
            const std::size_t n = std::min(s.x.size(), s.y.size());
            for (std::size_t i = 0; i < n; ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
                o << detail::num(px(s.x[i])) << ',' << detail::num(py(s.y[i])) << ' ';
            }
            o << "\"/>\n";
            const double ly = y0 + 16 + 18 * si;
            const double lx = left + plot_w + 12;
            o << "<line x1=\"" << detail::num(lx) << "\" x2=\"" << detail::num(lx + 24) << "\" y1=\""
              << detail::num(ly) << "\" y2=\"" << detail::num(ly) << "\" stroke=\"" << s.color
              << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
            o << "<text x=\"" << detail::num(lx + 30) << "\" y=\"" << detail::num(ly + 4) << "\" font-size=\"11\">"
              << detail::escape(s.label) << "</text>\n";
        }
    }
    const double axis_y = top + fig.panels.size() * (ph + gap) - gap + 38;
    o << "<text x=\"" << detail::num(left + plot_w / 2) << "\" y=\"" << detail::num(axis_y)
      << "\" text-anchor=\"middle\" font-size=\"13\">" << detail::escape(fig.x_label) << "</text>\n";
    o << "</svg>\n";
    return o.str();
}

inline void save(const Figure& fig, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << render(fig);
    if (!out) throw Error("failed writing " + path);
}

}  // namespace esnmpc::svg
