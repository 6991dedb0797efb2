#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "biasprobe/errors.hpp"
#include "biasprobe/templates/lexicon.hpp"
#include "json.hpp"

namespace biasprobe::scm {

using templates::Gender;

/// Parameters of the structural causal model
///   W ~ Uniform{0..K-1},  G ~ Bernoulli(p_female),
///   Z := 1[U_z < a_G(W)],  a_g(w) = clamp(base_g + gain_g * w/(K-1), 0, 1),
///   S := Z.
struct ScmParams {
  double p_female = 0.5;
  std::uint32_t axis_levels = 22;
  double access_base_f = 0.2;
  double access_gain_f = 0.6;
  double access_base_m = 0.5;
  double access_gain_m = 0.0;
  std::uint64_t rng_seed = 7;

  void validate() const {
    if (axis_levels < 2) throw ConfigError("axis_levels must be at least 2");
    if (!(p_female >= 0.0 && p_female <= 1.0)) throw ConfigError("p_female must lie in [0, 1]");
    for (double c : {access_base_f, access_gain_f, access_base_m, access_gain_m}) {
      if (!std::isfinite(c)) throw ConfigError("access coefficients must be finite");
    }
  }

  /// P(Z=1 | W=w, G=g).
  double access_probability(std::uint32_t w, Gender g) const {
    const double x = static_cast<double>(w) / static_cast<double>(axis_levels - 1);
    const double a = g == Gender::female ? access_base_f + access_gain_f * x
                                         : access_base_m + access_gain_m * x;
    return std::clamp(a, 0.0, 1.0);
  }

  bool operator==(const ScmParams&) const = default;
};

inline void to_json(nlohmann::json& j, const ScmParams& p) {
  j = nlohmann::json{{"p_female", p.p_female},           {"axis_levels", p.axis_levels},
                     {"access_base_f", p.access_base_f}, {"access_gain_f", p.access_gain_f},
                     {"access_base_m", p.access_base_m}, {"access_gain_m", p.access_gain_m},
                     {"rng_seed", p.rng_seed}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, ScmParams& p) {
  if (!j.is_object()) throw ConfigError("ScmParams must be a JSON object");
  p = ScmParams{};
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "p_female") p.p_female = value.get<double>();
      else if (key == "axis_levels") p.axis_levels = value.get<std::uint32_t>();
      else if (key == "access_base_f") p.access_base_f = value.get<double>();
      else if (key == "access_gain_f") p.access_gain_f = value.get<double>();
      else if (key == "access_base_m") p.access_base_m = value.get<double>();
      else if (key == "access_gain_m") p.access_gain_m = value.get<double>();
      else if (key == "rng_seed") p.rng_seed = value.get<std::uint64_t>();
      else throw ConfigError("unknown ScmParams field '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid ScmParams: ") + e.what());
  }
  p.validate();
}

/// P(G=female | W=w, S=1) by Bayes over the access function.
inline double posterior_female_given_w(const ScmParams& params, std::uint32_t w) {
  params.validate();
  if (w >= params.axis_levels) throw InputError("axis index out of range");
  const double af = params.access_probability(w, Gender::female);
  const double am = params.access_probability(w, Gender::male);
  const double num = params.p_female * af;
  const double den = num + (1.0 - params.p_female) * am;
  if (den <= 0.0) {
    throw UndefinedPosteriorError("no selected population at w=" + std::to_string(w));
  }
  return num / den;
}

}  // namespace biasprobe::scm
