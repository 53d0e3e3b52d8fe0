#include "dapt/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace dapt::report {

std::string format_number(double value) {
    if (std::isnan(value)) {
        return "nan";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

std::string xml_escape(const std::string& s) {
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

std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

const char* const kPalette[] = {"#4878a8", "#e08a3c", "#5aa05a", "#c44e52", "#8172b2", "#937860", "#da8bc3"};
constexpr int kWidth = 720;
constexpr int kHeight = 420;
constexpr int kLeft = 70;
constexpr int kRight = 150;
constexpr int kTop = 40;
constexpr int kBottom = 70;

struct Axis {
    double lo = 0.0;
    double hi = 1.0;
};

Axis value_axis(const std::vector<std::vector<double>>& values) {
    double lo = 0.0;
    double hi = 0.0;
    for (const auto& s : values) {
        for (double v : s) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (hi - lo < 1e-12) {
        hi = lo + 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    return {lo < 0.0 ? lo - pad : 0.0, hi > 0.0 ? hi + pad : 0.0};
}

void frame(std::ostringstream& svg, const std::string& title, const std::string& x_label, const std::string& y_label,
           const Axis& axis) {
    const int plot_h = kHeight - kTop - kBottom;
    const int plot_w = kWidth - kLeft - kRight;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg << "<rect class=\"background\" x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" fill=\"white\"/>\n";
    svg << "<text class=\"title\" x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
        << xml_escape(title) << "</text>\n";
    svg << "<line class=\"axis\" x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
        << kTop + plot_h << "\" stroke=\"black\"/>\n";
    svg << "<line class=\"axis\" x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w
        << "\" y2=\"" << kTop + plot_h << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = axis.lo + (axis.hi - axis.lo) * t / 4.0;
        const double y = kTop + plot_h - plot_h * t / 4.0;
        svg << "<text class=\"tick\" x=\"" << kLeft - 6 << "\" y=\"" << fixed(y + 4, 1) << "\" text-anchor=\"end\">"
            << fixed(v, 3) << "</text>\n";
    }
    svg << "<text class=\"x-label\" x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
        << "\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n";
    svg << "<text class=\"y-label\" x=\"16\" y=\"" << kTop + plot_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << kTop + plot_h / 2 << ")\">" << xml_escape(y_label) << "</text>\n";
}

double y_of(double v, const Axis& axis) {
    const int plot_h = kHeight - kTop - kBottom;
    return kTop + plot_h - plot_h * (v - axis.lo) / (axis.hi - axis.lo);
}

void legend(std::ostringstream& svg, const std::vector<std::string>& names) {
    if (names.size() < 2) {
        return;
    }
    const int x = kWidth - kRight + 14;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const int y = kTop + 16 * static_cast<int>(i);
        svg << "<rect class=\"legend\" x=\"" << x << "\" y=\"" << y << "\" width=\"10\" height=\"10\" fill=\""
            << kPalette[i % std::size(kPalette)] << "\"/>\n";
        svg << "<text class=\"legend\" x=\"" << x + 14 << "\" y=\"" << y + 9 << "\">" << xml_escape(names[i])
            << "</text>\n";
    }
}

} // namespace

std::string comparison_csv(const std::vector<eval::ComparisonRow>& rows) {
    std::string out = "pair_id,cos_base,cos_tuned,difference,improvement_pct\n";
    for (const auto& r : rows) {
        out += csv_field(r.pair_id);
        if (!r.ok()) {
            out += ",,,,\n";
            continue;
        }
        out += "," + format_number(r.cos_base) + "," + format_number(r.cos_tuned) + "," +
               format_number(r.difference()) + ",";
        if (r.cos_base != 0.0) {
            out += format_number(r.improvement_pct());
        }
        out += "\n";
    }
    return out;
}

std::string summary_csv(const eval::Summary& s) {
    return "n_pairs,n_errors,mean_difference,std_difference,mean_improvement_pct\n" + std::to_string(s.n_pairs) +
           "," + std::to_string(s.n_errors) + "," + format_number(s.mean_difference) + "," +
           format_number(s.std_difference) + "," + format_number(s.mean_improvement_pct) + "\n";
}

std::string anchor_csv(const std::vector<eval::AnchorRow>& rows) {
    std::string out = "other_id,cos_base,cos_tuned,difference\n";
    for (const auto& r : rows) {
        out += csv_field(r.other_id) + "," + format_number(r.cos_base) + "," + format_number(r.cos_tuned) + "," +
               format_number(r.difference()) + "\n";
    }
    return out;
}

std::string profile_csv(const std::vector<eval::SentenceProfile>& rows) {
    std::string out = "id,mean_difference,std_difference\n";
    for (const auto& r : rows) {
        out += csv_field(r.id) + "," + format_number(r.mean_difference) + "," + format_number(r.std_difference) +
               "\n";
    }
    return out;
}

std::string sweep_csv(const eval::SweepReport& report) {
    std::string out = "pair_id,base";
    for (auto b : report.budgets) {
        out += ",epochs_" + std::to_string(b);
    }
    out += "\n";
    for (std::size_t i = 0; i < report.pair_ids.size(); ++i) {
        out += csv_field(report.pair_ids[i]);
        for (double c : report.cosines[i]) {
            out += "," + format_number(c);
        }
        out += "\n";
    }
    out += "mean";
    for (double m : report.column_means) {
        out += "," + format_number(m);
    }
    return out + "\n";
}

std::string published_csv(const std::vector<eval::PublishedCheck>& rows) {
    std::string out = "id,computed_improvement_pct,printed_improvement_pct,flag\n";
    for (const auto& r : rows) {
        out += csv_field(r.id) + "," + format_number(r.computed_improvement_pct) + "," +
               format_number(r.printed_improvement_pct) + "," + (r.discrepancy ? "discrepancy" : "ok") + "\n";
    }
    return out;
}

std::string render_bar_chart(const BarChart& chart) {
    const Axis axis = value_axis(chart.values);
    std::ostringstream svg;
    frame(svg, chart.title, chart.x_label, chart.y_label, axis);
    const int plot_w = kWidth - kLeft - kRight;
    const std::size_t groups = chart.labels.size();
    const std::size_t series = chart.values.size();
    if (groups > 0 && series > 0) {
        const double group_w = static_cast<double>(plot_w) / static_cast<double>(groups);
        const double bar_w = group_w * 0.8 / static_cast<double>(series);
        const double zero = y_of(0.0, axis);
        for (std::size_t g = 0; g < groups; ++g) {
            const double gx = kLeft + group_w * static_cast<double>(g) + group_w * 0.1;
            for (std::size_t s = 0; s < series; ++s) {
                const double v = g < chart.values[s].size() ? chart.values[s][g] : 0.0;
                const double y = y_of(v, axis);
                svg << "<rect class=\"bar\" x=\"" << fixed(gx + bar_w * static_cast<double>(s)) << "\" y=\""
                    << fixed(std::min(y, zero)) << "\" width=\"" << fixed(bar_w) << "\" height=\""
                    << fixed(std::fabs(zero - y)) << "\" fill=\"" << kPalette[s % std::size(kPalette)]
                    << "\"><title>" << xml_escape(chart.labels[g]) << ": " << format_number(v)
                    << "</title></rect>\n";
            }
            svg << "<text class=\"tick\" x=\"" << fixed(gx + group_w * 0.4) << "\" y=\"" << kHeight - kBottom + 16
                << "\" text-anchor=\"middle\">" << xml_escape(chart.labels[g]) << "</text>\n";
        }
        svg << "<line class=\"zero\" x1=\"" << kLeft << "\" y1=\"" << fixed(zero) << "\" x2=\"" << kLeft + plot_w
            << "\" y2=\"" << fixed(zero) << "\" stroke=\"#666\"/>\n";
    }
    legend(svg, chart.series_names);
    svg << "</svg>\n";
    return svg.str();
}

std::string render_line_chart(const LineChart& chart) {
    const Axis axis = value_axis(chart.values);
    std::ostringstream svg;
    frame(svg, chart.title, chart.x_label, chart.y_label, axis);
    const int plot_w = kWidth - kLeft - kRight;
    const std::size_t n = chart.x_ticks.size();
    auto x_of = [&](std::size_t i) {
        return n < 2 ? kLeft + plot_w / 2.0
                     : kLeft + 20.0 + (plot_w - 40.0) * static_cast<double>(i) / static_cast<double>(n - 1);
    };
    for (std::size_t i = 0; i < n; ++i) {
        svg << "<text class=\"tick\" x=\"" << fixed(x_of(i)) << "\" y=\"" << kHeight - kBottom + 16
            << "\" text-anchor=\"middle\">" << xml_escape(chart.x_ticks[i]) << "</text>\n";
    }
    for (std::size_t s = 0; s < chart.values.size(); ++s) {
        svg << "<polyline class=\"series\" fill=\"none\" stroke=\"" << kPalette[s % std::size(kPalette)]
            << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < chart.values[s].size() && i < n; ++i) {
            svg << (i ? " " : "") << fixed(x_of(i)) << "," << fixed(y_of(chart.values[s][i], axis));
        }
        svg << "\"/>\n";
    }
    legend(svg, chart.series_names);
    svg << "</svg>\n";
    return svg.str();
}

std::string comparison_chart(const std::vector<eval::ComparisonRow>& rows) {
    BarChart chart;
    chart.title = "Cosine difference (tuned - base) per pair";
    chart.x_label = "pair";
    chart.y_label = "cosine difference";
    chart.values.emplace_back();
    for (const auto& r : rows) {
        if (!r.ok()) {
            continue;
        }
        chart.labels.push_back(r.pair_id);
        chart.values[0].push_back(r.difference());
    }
    return render_bar_chart(chart);
}

std::string anchor_chart(const std::string& anchor_id, const std::vector<eval::AnchorRow>& rows) {
    BarChart chart;
    chart.title = "Cosine to " + anchor_id;
    chart.x_label = "sentence";
    chart.y_label = "cosine similarity";
    chart.series_names = {"base", "tuned"};
    chart.values.assign(2, {});
    for (const auto& r : rows) {
        chart.labels.push_back(r.other_id);
        chart.values[0].push_back(r.cos_base);
        chart.values[1].push_back(r.cos_tuned);
    }
    return render_bar_chart(chart);
}

std::string sweep_chart(const eval::SweepReport& report) {
    LineChart chart;
    chart.title = "Pair cosine by fine-tuning epochs";
    chart.x_label = "fine-tuning epochs";
    chart.y_label = "cosine similarity";
    chart.x_ticks.push_back("0");
    for (auto b : report.budgets) {
        chart.x_ticks.push_back(std::to_string(b));
    }
    for (std::size_t i = 0; i < report.pair_ids.size(); ++i) {
        chart.series_names.push_back(report.pair_ids[i]);
        chart.values.push_back(report.cosines[i]);
    }
    chart.series_names.push_back("mean");
    chart.values.push_back(report.column_means);
    return render_line_chart(chart);
}

} // namespace dapt::report
