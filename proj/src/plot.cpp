#include "adaseg/plot.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

namespace adaseg {

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 60, kRight = 150, kTop = 40, kBottom = 50;

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s)
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

}  // namespace

std::string learning_curve_svg(const LearningCurve& curve, const std::string& title, const std::string& highlight)
{
    static constexpr std::array<const char*, 8> palette{"#4c72b0", "#55a868", "#8172b2", "#937860",
                                                        "#64b5cd", "#8c8c8c", "#ccb974", "#da8bc3"};
    std::string bold = highlight;
    if (bold.empty() && curve.epoch_added && !curve.structures.empty()) bold = curve.structures.back();

    int first = 1, last = 2;
    if (!curve.rows.empty()) {
        first = curve.rows.front().epoch;
        last = std::max(curve.rows.back().epoch, first + 1);
    }
    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto x = [&](double epoch) { return kLeft + pw * (epoch - first) / (last - first); };
    auto y = [&](double dsc) { return kTop + ph * (1.0 - dsc); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title.empty()) {
        svg << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
            << escape(title) << "</text>\n";
    }
    // Axes, grid and ticks.
    for (int i = 0; i <= 5; ++i) {
        const double v = i / 5.0;
        svg << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(y(v)) << "\" x2=\"" << num(kLeft + pw) << "\" y2=\""
            << num(y(v)) << "\" stroke=\"#e5e5e5\"/>\n";
        svg << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(y(v) + 4) << "\" text-anchor=\"end\">" << num(v)
            << "</text>\n";
    }
    const int span = last - first;
    const int step = std::max(1, span / 8);
    for (int e = first; e <= last; e += step) {
        svg << "<text x=\"" << num(x(e)) << "\" y=\"" << num(kTop + ph + 18) << "\" text-anchor=\"middle\">" << e
            << "</text>\n";
    }
    svg << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 10)
        << "\" text-anchor=\"middle\">epoch</text>\n";
    svg << "<text transform=\"translate(16," << num(kTop + ph / 2)
        << ") rotate(-90)\" text-anchor=\"middle\">validation DSC</text>\n";

    if (curve.epoch_added) {
        const double ex = x(*curve.epoch_added);
        svg << "<line class=\"epoch-added\" x1=\"" << num(ex) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(ex)
            << "\" y2=\"" << num(kTop + ph) << "\" stroke=\"#c44e52\" stroke-dasharray=\"6,4\"/>\n";
        svg << "<text x=\"" << num(ex + 4) << "\" y=\"" << num(kTop + 14) << "\" fill=\"#c44e52\">added at epoch "
            << *curve.epoch_added << "</text>\n";
    }

    for (std::size_t k = 0; k < curve.structures.size(); ++k) {
        const bool emph = curve.structures[k] == bold;
        const std::string colour = emph ? "#c44e52" : palette[k % palette.size()];
        const std::string stroke = "\" fill=\"none\" stroke=\"" + colour + "\" stroke-width=\"" + (emph ? "3" : "1.5") + "\"/>\n";
        // A polyline per run of consecutive defined values.
        std::string points;
        auto flush = [&] {
            if (!points.empty()) svg << "<polyline data-structure=\"" << escape(curve.structures[k]) << "\" points=\"" << points << stroke;
            points.clear();
        };
        for (const auto& row : curve.rows) {
            if (k < row.dsc.size() && row.dsc[k]) {
                if (!points.empty()) points += ' ';
                points += num(x(row.epoch)) + "," + num(y(std::clamp(*row.dsc[k], 0.0, 1.0)));
            } else {
                flush();
            }
        }
        flush();
        const double ly = kTop + 10 + 20.0 * static_cast<double>(k);
        svg << "<line x1=\"" << num(kLeft + pw + 12) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(kLeft + pw + 36)
            << "\" y2=\"" << num(ly) << stroke;
        svg << "<text x=\"" << num(kLeft + pw + 42) << "\" y=\"" << num(ly + 4) << "\">" << escape(curve.structures[k])
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace adaseg
