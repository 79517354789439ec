#pragma once

// Minimal log-log SVG line plots. Each series and each threshold is one
// <polyline>; panels are laid out side by side.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"

namespace clockstab::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct Panel {
    std::string title;
    std::string x_label = "N";
    std::string y_label;
    std::vector<Series> series;
    std::optional<double> threshold;
    std::string threshold_label;
};

namespace detail {

inline std::string escape(const std::string& s)
{
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

inline std::string fmt(const char* f, double v)
{
    char b[64];
    std::snprintf(b, sizeof b, f, v);
    return b;
}

inline const char* palette(std::size_t i)
{
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
    return colors[i % 7];
}

} // namespace detail

inline std::string render(const std::vector<Panel>& panels)
{
    using detail::fmt;
    if (panels.empty())
        throw ArgumentError("nothing to plot");
    const double pw = 520, ph = 400, ml = 80, mr = 20, mt = 40, mb = 60;
    const double width = pw * static_cast<double>(panels.size());

    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", width) + "\" height=\"" +
                    fmt("%.0f", ph) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (std::size_t pi = 0; pi < panels.size(); ++pi) {
        const Panel& p = panels[pi];
        double x0 = std::numeric_limits<double>::infinity(), x1 = 0, y0 = x0, y1 = 0;
        bool any = false;
        for (const auto& se : p.series)
            for (std::size_t i = 0; i < std::min(se.x.size(), se.y.size()); ++i)
                if (se.x[i] > 0 && se.y[i] > 0) {
                    x0 = std::min(x0, se.x[i]);
                    x1 = std::max(x1, se.x[i]);
                    y0 = std::min(y0, se.y[i]);
                    y1 = std::max(y1, se.y[i]);
                    any = true;
                }
        if (!any)
            throw ArgumentError("panel '" + p.title + "' has no positive data");
        if (p.threshold && *p.threshold > 0) {
            y0 = std::min(y0, *p.threshold);
            y1 = std::max(y1, *p.threshold);
        }
        // whole decades
        const double lx0 = std::floor(std::log10(x0)), lx1 = std::max(lx0 + 1, std::ceil(std::log10(x1)));
        const double ly0 = std::floor(std::log10(y0)), ly1 = std::max(ly0 + 1, std::ceil(std::log10(y1)));
        const double ox = pw * static_cast<double>(pi);
        const double left = ox + ml, right = ox + pw - mr, top = mt, bottom = ph - mb;
        auto px = [&](double x) { return left + (std::log10(x) - lx0) / (lx1 - lx0) * (right - left); };
        auto py = [&](double y) { return bottom - (std::log10(y) - ly0) / (ly1 - ly0) * (bottom - top); };

        s += "<g class=\"panel\">\n";
        s += "<text x=\"" + fmt("%.1f", (left + right) / 2) + "\" y=\"20\" text-anchor=\"middle\">" +
             detail::escape(p.title) + "</text>\n";
        s += "<rect class=\"frame\" x=\"" + fmt("%.1f", left) + "\" y=\"" + fmt("%.1f", top) + "\" width=\"" +
             fmt("%.1f", right - left) + "\" height=\"" + fmt("%.1f", bottom - top) +
             "\" fill=\"none\" stroke=\"black\"/>\n";
        for (double d = lx0; d <= lx1; d += 1) {
            const double x = left + (d - lx0) / (lx1 - lx0) * (right - left);
            s += "<line class=\"grid\" x1=\"" + fmt("%.1f", x) + "\" y1=\"" + fmt("%.1f", top) + "\" x2=\"" +
                 fmt("%.1f", x) + "\" y2=\"" + fmt("%.1f", bottom) + "\" stroke=\"#ddd\"/>\n";
            s += "<text x=\"" + fmt("%.1f", x) + "\" y=\"" + fmt("%.1f", bottom + 16) +
                 "\" text-anchor=\"middle\">1e" + fmt("%.0f", d) + "</text>\n";
        }
        for (double d = ly0; d <= ly1; d += 1) {
            const double y = bottom - (d - ly0) / (ly1 - ly0) * (bottom - top);
            s += "<line class=\"grid\" x1=\"" + fmt("%.1f", left) + "\" y1=\"" + fmt("%.1f", y) + "\" x2=\"" +
                 fmt("%.1f", right) + "\" y2=\"" + fmt("%.1f", y) + "\" stroke=\"#ddd\"/>\n";
            s += "<text x=\"" + fmt("%.1f", left - 6) + "\" y=\"" + fmt("%.1f", y + 4) +
                 "\" text-anchor=\"end\">1e" + fmt("%.0f", d) + "</text>\n";
        }
        s += "<text x=\"" + fmt("%.1f", (left + right) / 2) + "\" y=\"" + fmt("%.1f", ph - 20) +
             "\" text-anchor=\"middle\">" + detail::escape(p.x_label) + "</text>\n";
        s += "<text transform=\"translate(" + fmt("%.1f", ox + 16) + "," + fmt("%.1f", (top + bottom) / 2) +
             ") rotate(-90)\" text-anchor=\"middle\">" + detail::escape(p.y_label) + "</text>\n";

        for (std::size_t si = 0; si < p.series.size(); ++si) {
            const Series& se = p.series[si];
            std::string pts;
            for (std::size_t i = 0; i < std::min(se.x.size(), se.y.size()); ++i)
                if (se.x[i] > 0 && se.y[i] > 0)
                    pts += fmt("%.2f", px(se.x[i])) + "," + fmt("%.2f", py(se.y[i])) + " ";
            s += "<polyline class=\"series\" fill=\"none\" stroke-width=\"1.5\" stroke=\"" +
                 std::string(detail::palette(si)) + "\" points=\"" + pts + "\"><title>" +
                 detail::escape(se.label) + "</title></polyline>\n";
            s += "<text x=\"" + fmt("%.1f", right - 8) + "\" y=\"" + fmt("%.1f", top + 16 + 14.0 * si) +
                 "\" text-anchor=\"end\" fill=\"" + detail::palette(si) + "\">" + detail::escape(se.label) +
                 "</text>\n";
        }
        if (p.threshold && *p.threshold > 0) {
            const double y = py(*p.threshold);
            s += "<polyline class=\"threshold\" fill=\"none\" stroke=\"black\" stroke-dasharray=\"6,4\" points=\"" +
                 fmt("%.2f", left) + "," + fmt("%.2f", y) + " " + fmt("%.2f", right) + "," + fmt("%.2f", y) +
                 "\"><title>" + detail::escape(p.threshold_label) + "</title></polyline>\n";
            s += "<text x=\"" + fmt("%.1f", left + 6) + "\" y=\"" + fmt("%.1f", y - 4) + "\">" +
                 detail::escape(p.threshold_label) + "</text>\n";
        }
        s += "</g>\n";
    }
    s += "</svg>\n";
    return s;
}

} // namespace clockstab::svg
