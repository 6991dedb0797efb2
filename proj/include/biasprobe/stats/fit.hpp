#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "biasprobe/errors.hpp"
#include "biasprobe/stats/series.hpp"
#include "json.hpp"

namespace biasprobe::stats {

inline constexpr int kMinDegree = 1;
inline constexpr int kMaxDegree = 5;

struct CiPoint {
  double x = 0.0;
  double lower_f = 0.0;
  double upper_f = 0.0;
  double lower_m = 0.0;
  double upper_m = 0.0;
};

/// Polynomial least-squares fit of one gender's series on x in [0, 1].
struct PolyFit {
  std::vector<double> coeffs;  ///< Ascending powers of x.
  double sigma = 0.0;          ///< Residual standard error.
  double t_quantile = 0.0;     ///< t_{0.975, n-p}.
  Eigen::MatrixXd xtx_inv;     ///< (X^T W X)^{-1}.

  double value(double x) const {
    double y = 0.0;
    for (std::size_t i = coeffs.size(); i-- > 0;) y = y * x + coeffs[i];
    return y;
  }

  /// Half-width of the 95% mean-response band at x.
  double half_width(double x) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(coeffs.size()));
    double p = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i, p *= x) v[i] = p;
    const double q = v.dot(xtx_inv * v);
    return t_quantile * sigma * std::sqrt(std::max(q, 0.0));
  }
};

struct FitResult {
  int degree = 1;
  std::size_t axis_levels = 0;
  PolyFit female;
  PolyFit male;
  double slope_female = 0.0;
  double slope_male = 0.0;
  /// Empty when the series has zero variance.
  std::optional<double> pearson_female;
  std::optional<double> pearson_male;
  std::vector<CiPoint> ci_band;

  const std::vector<double>& coeffs_female() const noexcept { return female.coeffs; }
  const std::vector<double>& coeffs_male() const noexcept { return male.coeffs; }
  bool degenerate() const noexcept { return !pearson_female || !pearson_male; }
};

inline double normalized_x(std::size_t w_index, std::size_t axis_levels) {
  return static_cast<double>(w_index) / static_cast<double>(axis_levels - 1);
}

namespace detail {

inline PolyFit least_squares(const std::vector<double>& xs, const std::vector<double>& ys,
                             const std::vector<double>& weights, int degree) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  const Eigen::Index p = degree + 1;
  Eigen::MatrixXd design(n, p);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sw = std::sqrt(weights[static_cast<std::size_t>(i)]);
    double pw = 1.0;
    for (Eigen::Index j = 0; j < p; ++j, pw *= xs[static_cast<std::size_t>(i)]) design(i, j) = sw * pw;
    rhs[i] = sw * ys[static_cast<std::size_t>(i)];
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < p) throw FitError("design matrix is rank deficient");
  const Eigen::VectorXd beta = qr.solve(rhs);
  const Eigen::VectorXd resid = rhs - design * beta;

  PolyFit f;
  f.coeffs.assign(beta.data(), beta.data() + beta.size());
  const double dof = static_cast<double>(n - p);
  f.sigma = std::sqrt(resid.squaredNorm() / dof);
  f.t_quantile = boost::math::quantile(boost::math::students_t(dof), 0.975);
  const Eigen::MatrixXd xtx = design.transpose() * design;
  f.xtx_inv = xtx.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  return f;
}

inline std::optional<double> pearson_or_empty(const std::vector<double>& xs,
                                              const std::vector<double>& ys) {
  try {
    return pearson_r(xs, ys);
  } catch (const DegenerateError&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Least-squares polynomial fit of mean_female and mean_male against
/// x = w_index / (axis_levels - 1).
///
/// `axis_levels` defaults to max(w_index) + 1. Points are weighted by
/// n_probes only when the counts differ. Slopes always come from a separate
/// degree-1 fit; the 95% band is the mean-response band of the degree-d fit.
inline FitResult fit(const std::vector<SeriesPoint>& series, int degree,
                     std::optional<std::size_t> axis_levels = std::nullopt) {
  if (degree < kMinDegree || degree > kMaxDegree) {
    throw InputError("fit degree must be between 1 and 5");
  }
  if (series.size() < static_cast<std::size_t>(degree) + 2) {
    throw InputError("fit of degree " + std::to_string(degree) + " needs at least " +
                     std::to_string(degree + 2) + " points");
  }
  std::size_t levels = 0;
  for (const auto& p : series) levels = std::max(levels, p.w_index + 1);
  if (axis_levels) {
    if (*axis_levels < levels) throw InputError("w_index beyond axis length");
    levels = *axis_levels;
  }
  if (levels < 2) throw FitError("axis needs at least two levels");

  std::vector<double> xs, yf, ym, weights;
  bool equal_counts = true;
  for (const auto& p : series) {
    xs.push_back(normalized_x(p.w_index, levels));
    yf.push_back(p.mean_female);
    ym.push_back(p.mean_male);
    equal_counts = equal_counts && p.n_probes == series.front().n_probes;
  }
  for (const auto& p : series) {
    weights.push_back(equal_counts ? 1.0 : static_cast<double>(p.n_probes));
  }

  FitResult r;
  r.degree = degree;
  r.axis_levels = levels;
  r.female = detail::least_squares(xs, yf, weights, degree);
  r.male = detail::least_squares(xs, ym, weights, degree);
  if (degree == 1) {
    r.slope_female = r.female.coeffs[1];
    r.slope_male = r.male.coeffs[1];
  } else {
    r.slope_female = detail::least_squares(xs, yf, weights, 1).coeffs[1];
    r.slope_male = detail::least_squares(xs, ym, weights, 1).coeffs[1];
  }
  r.pearson_female = detail::pearson_or_empty(xs, yf);
  r.pearson_male = detail::pearson_or_empty(xs, ym);

  for (double x : xs) {
    const double f = r.female.value(x);
    const double hf = r.female.half_width(x);
    const double m = r.male.value(x);
    const double hm = r.male.half_width(x);
    r.ci_band.push_back({x, f - hf, f + hf, m - hm, m + hm});
  }
  return r;
}

inline nlohmann::json fit_to_json(const FitResult& r) {
  const auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json ci = nlohmann::json::array();
  for (const auto& c : r.ci_band) {
    ci.push_back({{"x", c.x}, {"lower_f", c.lower_f}, {"upper_f", c.upper_f},
                  {"lower_m", c.lower_m}, {"upper_m", c.upper_m}});
  }
  return {{"degree", r.degree},
          {"coeffs_female", r.female.coeffs},
          {"coeffs_male", r.male.coeffs},
          {"slope_female", r.slope_female},
          {"slope_male", r.slope_male},
          {"pearson_female", opt(r.pearson_female)},
          {"pearson_male", opt(r.pearson_male)},
          {"degenerate", r.degenerate()},
          {"ci", ci}};
}

}  // namespace biasprobe::stats
