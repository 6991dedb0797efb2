#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "biasprobe/errors.hpp"
#include "biasprobe/stats/fit.hpp"
#include "biasprobe/text.hpp"

namespace biasprobe::stats {

struct ReportRow {
  std::string label;
  std::string slope_female;
  std::string r_female;
  std::string slope_male;
  std::string r_male;
};

/// Slope and Pearson's r per gender, three decimals, "n/a" for undefined r.
inline std::vector<ReportRow> report_table(const std::vector<std::pair<std::string, FitResult>>& runs) {
  if (runs.empty()) throw InputError("report needs at least one run");
  const auto r3 = [](const std::optional<double>& v) {
    return v ? text::format_fixed(*v, 3) : std::string("n/a");
  };
  std::vector<ReportRow> rows;
  for (const auto& [label, f] : runs) {
    rows.push_back({label, text::format_fixed(f.slope_female, 3), r3(f.pearson_female),
                    text::format_fixed(f.slope_male, 3), r3(f.pearson_male)});
  }
  return rows;
}

/// Markdown table with Female/Male slope and r columns.
inline std::string render_report(const std::vector<ReportRow>& rows) {
  std::string out =
      "| Run | Female slope | Female Pearson's r | Male slope | Male Pearson's r |\n"
      "|---|---:|---:|---:|---:|\n";
  for (const auto& r : rows) {
    out += "| " + r.label + " | " + r.slope_female + " | " + r.r_female + " | " + r.slope_male +
           " | " + r.r_male + " |\n";
  }
  return out;
}

}  // namespace biasprobe::stats
