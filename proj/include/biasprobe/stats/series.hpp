#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "biasprobe/errors.hpp"
#include "biasprobe/scorer/prediction.hpp"
#include "biasprobe/templates/probe.hpp"

namespace biasprobe::stats {

/// Averaged gender masses at one axis value.
struct SeriesPoint {
  std::size_t w_index = 0;
  std::string w_value;
  double mean_female = 0.0;
  double mean_male = 0.0;
  std::size_t n_probes = 0;

  bool operator==(const SeriesPoint&) const = default;
};

using ScoredProbe = std::pair<templates::ProbeText, scorer::GenderMass>;

namespace detail {

/// Sum after sorting, so the result does not depend on input order.
inline double order_free_mean(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace detail

/// One point per distinct w_index, ordered by w_index.
inline std::vector<SeriesPoint> aggregate(const std::vector<ScoredProbe>& masses) {
  if (masses.empty()) throw InputError("nothing to aggregate");
  struct Bucket {
    std::string w_value;
    std::vector<double> female;
    std::vector<double> male;
  };
  std::map<std::size_t, Bucket> buckets;
  for (const auto& [probe, mass] : masses) {
    auto [it, inserted] = buckets.try_emplace(probe.w_index);
    if (inserted) {
      it->second.w_value = probe.w_value;
    } else if (it->second.w_value != probe.w_value) {
      throw InputError("axis index " + std::to_string(probe.w_index) + " has two values");
    }
    it->second.female.push_back(mass.female);
    it->second.male.push_back(mass.male);
  }
  std::vector<SeriesPoint> out;
  out.reserve(buckets.size());
  for (auto& [w, b] : buckets) {
    const std::size_t n = b.female.size();
    out.push_back({w, b.w_value, detail::order_free_mean(b.female), detail::order_free_mean(b.male), n});
  }
  return out;
}

/// Sample Pearson correlation. Throws DegenerateError if either side is
/// constant.
inline double pearson_r(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw InputError("pearson_r needs equally long inputs");
  if (xs.size() < 3) throw InputError("pearson_r needs at least three points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  // Rounding in the mean leaves tiny residues for constant input.
  const auto flat = [n](double ss, double mean) {
    return std::sqrt(ss / n) <= 1e-12 * std::max(1.0, std::abs(mean));
  };
  if (flat(sxx, mx) || flat(syy, my)) throw DegenerateError("zero variance series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace biasprobe::stats
