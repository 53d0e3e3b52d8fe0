#pragma once

#include "dapt/evaluation.hpp"

#include <string>
#include <vector>

namespace dapt::report {

/// Shortest decimal that round-trips (0.59 prints as "0.59").
std::string format_number(double value);

/// pair_id,cos_base,cos_tuned,difference,improvement_pct
/// Rows that failed to score keep their id and leave the numbers empty.
std::string comparison_csv(const std::vector<eval::ComparisonRow>& rows);
std::string summary_csv(const eval::Summary& summary);
std::string anchor_csv(const std::vector<eval::AnchorRow>& rows);
std::string profile_csv(const std::vector<eval::SentenceProfile>& rows);
/// pair_id,base,epochs_<b>,... plus a final "mean" row.
std::string sweep_csv(const eval::SweepReport& report);
std::string published_csv(const std::vector<eval::PublishedCheck>& rows);

struct BarChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<std::string> labels;
    std::vector<std::string> series_names; // one entry per series; a single series needs no legend
    std::vector<std::vector<double>> values; // [series][label]
};

/// Grouped bar chart. Every bar is a `<rect class="bar" .../>`.
std::string render_bar_chart(const BarChart& chart);

struct LineChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<std::string> x_ticks;
    std::vector<std::string> series_names;
    std::vector<std::vector<double>> values; // [series][tick]
};

std::string render_line_chart(const LineChart& chart);

/// Difference per pair.
std::string comparison_chart(const std::vector<eval::ComparisonRow>& rows);
/// Base and tuned cosine per anchor partner.
std::string anchor_chart(const std::string& anchor_id, const std::vector<eval::AnchorRow>& rows);
/// Mean cosine across budgets, one line per pair plus the mean.
std::string sweep_chart(const eval::SweepReport& report);

} // namespace dapt::report
