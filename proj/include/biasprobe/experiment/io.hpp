#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "biasprobe/errors.hpp"
#include "biasprobe/experiment/config.hpp"
#include "biasprobe/scorer/prediction.hpp"
#include "biasprobe/stats/series.hpp"
#include "biasprobe/text.hpp"
#include "json.hpp"

namespace biasprobe::experiment {

inline constexpr std::string_view kSeriesHeader = "w_index,w_value,mean_female,mean_male,n_probes";
inline constexpr std::string_view kMassesHeader =
    "probe_index,w_index,template_id,verb,life_stage,female,male";

/// RFC 4180 field quoting.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

/// Splits RFC 4180 CSV into rows of fields. Quoted fields may span lines.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view content) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw InputError("unterminated quoted CSV field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string series_to_csv(const std::vector<stats::SeriesPoint>& series) {
  std::string out(kSeriesHeader);
  out += '\n';
  for (const auto& p : series) {
    out += std::to_string(p.w_index) + ',' + csv_field(p.w_value) + ',' + text::format_double(p.mean_female) +
           ',' + text::format_double(p.mean_male) + ',' + std::to_string(p.n_probes) + '\n';
  }
  return out;
}

namespace detail {

template <class T>
T parse_number(const std::string& s, std::string_view what) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw InputError("bad " + std::string(what) + " '" + s + "'");
  }
  return v;
}

}  // namespace detail

inline std::vector<stats::SeriesPoint> series_from_csv(std::string_view content) {
  const auto rows = parse_csv(content);
  if (rows.empty()) throw InputError("series CSV is empty");
  std::string header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
  if (header != kSeriesHeader) throw InputError("series CSV header must be '" + std::string(kSeriesHeader) + "'");
  std::vector<stats::SeriesPoint> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 5) throw InputError("series CSV row " + std::to_string(i + 1) + " needs five fields");
    out.push_back({detail::parse_number<std::size_t>(r[0], "w_index"), r[1],
                   detail::parse_number<double>(r[2], "mean_female"),
                   detail::parse_number<double>(r[3], "mean_male"),
                   detail::parse_number<std::size_t>(r[4], "n_probes")});
  }
  return out;
}

inline std::string masses_to_csv(const std::vector<templates::ProbeText>& probes,
                                 const std::vector<scorer::GenderMass>& masses) {
  std::string out(kMassesHeader);
  out += '\n';
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const auto& p = probes[i];
    out += std::to_string(i) + ',' + std::to_string(p.w_index) + ',' + std::to_string(p.template_id) + ',' +
           csv_field(p.verb) + ',' + csv_field(p.life_stage) + ',' + text::format_double(masses[i].female) +
           ',' + text::format_double(masses[i].male) + '\n';
  }
  return out;
}

/// Writes via a temporary file and rename so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

/// Scored probes so far, keyed by probe index.
using Checkpoint = std::map<std::size_t, scorer::GenderMass>;

inline std::string checkpoint_to_json(const std::string& run_id, std::size_t probes_total,
                                      const Checkpoint& done) {
  nlohmann::json masses = nlohmann::json::array();
  for (const auto& [i, m] : done) masses.push_back({i, m.female, m.male});
  return nlohmann::json{{"run_id", run_id}, {"probes_total", probes_total}, {"masses", masses}}.dump() + "\n";
}

/// Returns an empty checkpoint when the file is absent or belongs to a
/// different run; a corrupt file is treated the same way.
inline Checkpoint read_checkpoint(const std::filesystem::path& path, const std::string& run_id,
                                  std::size_t probes_total) {
  Checkpoint out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("run_id") != run_id || j.at("probes_total") != probes_total) return out;
    for (const auto& row : j.at("masses")) {
      const auto i = row.at(0).get<std::size_t>();
      if (i < probes_total) out[i] = {row.at(1).get<double>(), row.at(2).get<double>()};
    }
  } catch (const nlohmann::json::exception&) {
    return {};
  }
  return out;
}

}  // namespace biasprobe::experiment
