#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "biasprobe/errors.hpp"
#include "biasprobe/scm/sampler.hpp"
#include "json.hpp"

namespace biasprobe::scm {

enum class Variable { W, G, Z, S, Y };

inline const char* to_string(Variable v) {
  switch (v) {
    case Variable::W: return "W";
    case Variable::G: return "G";
    case Variable::Z: return "Z";
    case Variable::S: return "S";
    case Variable::Y: return "Y";
  }
  return "?";
}

inline Variable parse_variable(std::string_view s) {
  if (s == "W") return Variable::W;
  if (s == "G") return Variable::G;
  if (s == "Z") return Variable::Z;
  if (s == "S") return Variable::S;
  if (s == "Y") return Variable::Y;
  throw InputError("unknown variable '" + std::string(s) + "'");
}

struct DependenceReport {
  std::size_t n = 0;
  double mi_nats = 0.0;
  double chi2 = 0.0;
  double p_value = 1.0;
  std::size_t dof = 0;
};

inline void to_json(nlohmann::json& j, const DependenceReport& r) {
  j = nlohmann::json{{"n", r.n}, {"mi_nats", r.mi_nats}, {"chi2", r.chi2},
                     {"p_value", r.p_value}, {"dof", r.dof}};
}

namespace detail {

/// Dense 0-based codes for one variable across `samples`.
struct Coded {
  std::vector<std::size_t> codes;
  std::size_t levels = 0;
};

inline Coded encode(const std::vector<PopulationSample>& samples, Variable v) {
  Coded out;
  out.codes.reserve(samples.size());
  std::map<std::string, std::size_t> ids;
  for (const auto& s : samples) {
    std::string key;
    switch (v) {
      case Variable::W: key = std::to_string(s.w); break;
      case Variable::G: key = templates::to_string(s.g); break;
      case Variable::Z: key = s.z ? "1" : "0"; break;
      case Variable::S: key = s.s ? "1" : "0"; break;
      case Variable::Y: key = s.y_word; break;
    }
    const auto [it, inserted] = ids.emplace(std::move(key), ids.size());
    out.codes.push_back(it->second);
  }
  out.levels = ids.size();
  return out;
}

}  // namespace detail

/// Plug-in mutual information and Pearson chi-squared test between `x` and
/// `y`, optionally within strata of `condition`. Conditional MI is the
/// stratum-weighted sum; chi2 and dof are summed over strata, each stratum
/// contributing (r-1)(c-1) for the levels it actually contains.
inline DependenceReport dependence_report(const std::vector<PopulationSample>& samples,
                                          Variable x, Variable y,
                                          std::optional<Variable> condition = std::nullopt) {
  if (samples.empty()) throw InputError("dependence report needs at least one sample");
  const auto cx = detail::encode(samples, x);
  const auto cy = detail::encode(samples, y);
  if (cx.levels < 2 || cy.levels < 2) {
    throw DegenerateError(std::string("variable ") + to_string(cx.levels < 2 ? x : y) +
                          " has a single observed level");
  }
  detail::Coded cz;
  if (condition) {
    cz = detail::encode(samples, *condition);
  } else {
    cz.codes.assign(samples.size(), 0);
    cz.levels = 1;
  }

  const std::size_t nx = cx.levels;
  const std::size_t ny = cy.levels;
  std::vector<double> table(cz.levels * nx * ny, 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    table[(cz.codes[i] * nx + cx.codes[i]) * ny + cy.codes[i]] += 1.0;
  }

  DependenceReport r;
  r.n = samples.size();
  const double n = static_cast<double>(samples.size());
  for (std::size_t s = 0; s < cz.levels; ++s) {
    const double* cell = &table[s * nx * ny];
    std::vector<double> row(nx, 0.0);
    std::vector<double> col(ny, 0.0);
    double total = 0.0;
    for (std::size_t a = 0; a < nx; ++a) {
      for (std::size_t b = 0; b < ny; ++b) {
        row[a] += cell[a * ny + b];
        col[b] += cell[a * ny + b];
        total += cell[a * ny + b];
      }
    }
    if (total == 0.0) continue;
    std::size_t rows_seen = 0;
    std::size_t cols_seen = 0;
    for (double v : row) rows_seen += v > 0.0;
    for (double v : col) cols_seen += v > 0.0;
    r.dof += (rows_seen - 1) * (cols_seen - 1);

    for (std::size_t a = 0; a < nx; ++a) {
      if (row[a] == 0.0) continue;
      for (std::size_t b = 0; b < ny; ++b) {
        if (col[b] == 0.0) continue;
        const double o = cell[a * ny + b];
        const double e = row[a] * col[b] / total;
        r.chi2 += (o - e) * (o - e) / e;
        if (o > 0.0) r.mi_nats += (o / n) * std::log(o * total / (row[a] * col[b]));
      }
    }
  }
  if (r.dof == 0) throw DegenerateError("no stratum has two observed levels of both variables");
  r.mi_nats = std::max(r.mi_nats, 0.0);
  const boost::math::chi_squared dist(static_cast<double>(r.dof));
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.chi2));
  return r;
}

}  // namespace biasprobe::scm
