#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "clop/errors.hpp"
#include "clop/io.hpp"

// Deterministic SVG rendering for the three CSV artifacts the simulator and
// trainer emit. No timestamps, no randomness: identical input bytes give
// identical output bytes.

namespace clop::svg {

namespace detail {

constexpr double kWidth = 800.0, kHeight = 480.0;
constexpr double kLeft = 64.0, kRight = 24.0, kTop = 36.0, kBottom = 44.0;

inline const char* palette(std::size_t i) {
    static const char* colors[10] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                     "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return colors[i % 10];
}

inline std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

struct Range {
    double lo = 0.0, hi = 1.0;
    void widen(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    static Range of(const std::vector<double>& vs) {
        Range r{vs.front(), vs.front()};
        for (double v : vs) r.widen(v);
        if (r.hi == r.lo) {
            r.lo -= 1.0;
            r.hi += 1.0;
        }
        return r;
    }
    double x_to_px(double v) const {
        return kLeft + (v - lo) / (hi - lo) * (kWidth - kLeft - kRight);
    }
    double y_to_px(double v) const {
        return kHeight - kBottom - (v - lo) / (hi - lo) * (kHeight - kTop - kBottom);
    }
};

inline void open_svg(std::string& s, const std::string& title) {
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"480\" "
         "viewBox=\"0 0 800 480\">\n";
    s += "<rect width=\"800\" height=\"480\" fill=\"#ffffff\"/>\n";
    s += "<text x=\"" + px(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" "
         "font-family=\"monospace\" font-size=\"14\">" + title + "</text>\n";
}

inline void axes(std::string& s, const Range& xr, const Range& yr) {
    s += "<rect x=\"" + px(kLeft) + "\" y=\"" + px(kTop) + "\" width=\"" +
         px(kWidth - kLeft - kRight) + "\" height=\"" + px(kHeight - kTop - kBottom) +
         "\" fill=\"none\" stroke=\"#000000\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        double fx = xr.lo + (xr.hi - xr.lo) * t / 4.0;
        double fy = yr.lo + (yr.hi - yr.lo) * t / 4.0;
        s += "<text x=\"" + px(xr.x_to_px(fx)) + "\" y=\"" + px(kHeight - kBottom + 16.0) +
             "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"10\">" +
             tick_label(fx) + "</text>\n";
        s += "<text x=\"" + px(kLeft - 6.0) + "\" y=\"" + px(yr.y_to_px(fy) + 3.0) +
             "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"10\">" +
             tick_label(fy) + "</text>\n";
    }
}

inline void polyline(std::string& s, const std::vector<double>& xs, const std::vector<double>& ys,
                     const Range& xr, const Range& yr, const char* color) {
    s += "<polyline fill=\"none\" stroke=\"";
    s += color;
    s += "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i != 0) s += ' ';
        s += px(xr.x_to_px(xs[i])) + "," + px(yr.y_to_px(ys[i]));
    }
    s += "\"/>\n";
}

inline void legend_entry(std::string& s, std::size_t slot, const std::string& label,
                         const char* color) {
    double y = kTop + 14.0 + 14.0 * static_cast<double>(slot);
    s += "<rect x=\"" + px(kWidth - kRight - 150.0) + "\" y=\"" + px(y - 8.0) +
         "\" width=\"10\" height=\"10\" fill=\"";
    s += color;
    s += "\"/>\n<text x=\"" + px(kWidth - kRight - 136.0) + "\" y=\"" + px(y + 1.0) +
         "\" font-family=\"monospace\" font-size=\"10\">" + label + "</text>\n";
}

inline void require_header(const io::CsvTable& t, const std::vector<std::string>& expect,
                           const std::string& kind) {
    if (t.header != expect) {
        std::string want;
        for (std::size_t i = 0; i < expect.size(); ++i)
            want += (i == 0 ? "" : ",") + expect[i];
        std::string got;
        for (std::size_t i = 0; i < t.header.size(); ++i)
            got += (i == 0 ? "" : ",") + t.header[i];
        throw UsageError("plot kind '" + kind + "' expects header '" + want + "', got '" + got +
                         "'");
    }
    if (t.rows.empty()) throw UsageError("plot kind '" + kind + "': no data rows");
}

} // namespace detail

// One polyline of singular values per recorded step.
inline std::string render_spectrum(const io::CsvTable& t) {
    detail::require_header(t, {"step", "index", "singular_value"}, "spectrum");
    std::vector<double> steps;
    std::map<double, std::pair<std::vector<double>, std::vector<double>>> by_step;
    detail::Range xr{t.rows.front()[1], t.rows.front()[1]};
    detail::Range yr{0.0, t.rows.front()[2]};
    for (const auto& r : t.rows) {
        if (by_step.find(r[0]) == by_step.end()) steps.push_back(r[0]);
        auto& dst = by_step[r[0]];
        dst.first.push_back(r[1]);
        dst.second.push_back(r[2]);
        xr.widen(r[1]);
        yr.widen(r[2]);
    }
    if (xr.hi == xr.lo) xr.hi += 1.0;
    if (yr.hi == yr.lo) yr.hi += 1.0;
    std::string s;
    detail::open_svg(s, "singular value spectrum");
    detail::axes(s, xr, yr);
    std::sort(steps.begin(), steps.end());
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& sv = by_step[steps[i]];
        detail::polyline(s, sv.first, sv.second, xr, yr, detail::palette(i));
    }
    detail::legend_entry(s, 0, "step " + detail::tick_label(steps.front()), detail::palette(0));
    if (steps.size() > 1)
        detail::legend_entry(s, 1, "step " + detail::tick_label(steps.back()),
                             detail::palette(steps.size() - 1));
    s += "</svg>\n";
    return s;
}

// Every column but `step`, min-max scaled into the frame, one color each.
inline std::string render_trajectory(const io::CsvTable& t) {
    detail::require_header(
        t, {"step", "loss", "mean_norm", "min_raw_norm", "max_raw_norm", "effective_rank"},
        "trajectory");
    std::vector<double> xs;
    for (const auto& r : t.rows) xs.push_back(r[0]);
    detail::Range xr = detail::Range::of(xs);
    detail::Range unit{0.0, 1.0};
    std::string s;
    detail::open_svg(s, "training trajectory (per-series min-max scale)");
    detail::axes(s, xr, unit);
    for (std::size_t c = 1; c < t.header.size(); ++c) {
        std::vector<double> raw;
        for (const auto& r : t.rows) raw.push_back(r[c]);
        detail::Range vr = detail::Range::of(raw);
        std::vector<double> ys;
        for (double v : raw) ys.push_back((v - vr.lo) / (vr.hi - vr.lo));
        detail::polyline(s, xs, ys, xr, unit, detail::palette(c - 1));
        detail::legend_entry(s, c - 1,
                             t.header[c] + " [" + detail::tick_label(vr.lo) + ".." +
                                 detail::tick_label(vr.hi) + "]",
                             detail::palette(c - 1));
    }
    s += "</svg>\n";
    return s;
}

// Scatter of the last recorded step's 2d projection.
inline std::string render_pca(const io::CsvTable& t) {
    detail::require_header(t, {"step", "point_id", "pc1", "pc2"}, "pca");
    double last = t.rows.front()[0];
    for (const auto& r : t.rows) last = std::max(last, r[0]);
    std::vector<double> xs, ys;
    for (const auto& r : t.rows) {
        if (r[0] != last) continue;
        xs.push_back(r[2]);
        ys.push_back(r[3]);
    }
    detail::Range xr = detail::Range::of(xs);
    detail::Range yr = detail::Range::of(ys);
    std::string s;
    detail::open_svg(s, "pca projection, step " + detail::tick_label(last));
    detail::axes(s, xr, yr);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        s += "<circle cx=\"" + detail::px(xr.x_to_px(xs[i])) + "\" cy=\"" +
             detail::px(yr.y_to_px(ys[i])) + "\" r=\"3\" fill=\"" + detail::palette(0) +
             "\" fill-opacity=\"0.7\"/>\n";
    }
    s += "</svg>\n";
    return s;
}

inline std::string render_chart(const io::CsvTable& t, const std::string& kind) {
    if (kind == "spectrum") return render_spectrum(t);
    if (kind == "trajectory") return render_trajectory(t);
    if (kind == "pca") return render_pca(t);
    throw UsageError("unknown plot kind: " + kind + " (expected spectrum|trajectory|pca)");
}

} // namespace clop::svg
