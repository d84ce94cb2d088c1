#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ecodrive/analytics.hpp"

namespace ecodrive::report {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

/// Self-contained SVG line chart.
std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series);

/// Self-contained SVG bar chart over [-1, 1] style signed values; missing values are drawn as gaps.
std::string bar_chart(const std::string& title, const std::vector<std::string>& labels,
                      const std::vector<std::optional<double>>& values);

struct ReportFiles {
  std::vector<std::filesystem::path> written;
};

/// Writes effectiveness, slice, adoption, correlation, Pareto, overlap, and scaling tables plus plots.
/// Throws DataError on an empty record set.
ReportFiles write_report(const std::vector<assess::AssessmentRecord>& records, const std::filesystem::path& out_dir);

}  // namespace ecodrive::report
