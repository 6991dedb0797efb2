#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "biasprobe/errors.hpp"
#include "biasprobe/rng.hpp"
#include "biasprobe/scm/params.hpp"
#include "biasprobe/templates/lexicon.hpp"

namespace biasprobe::scm {

struct PopulationSample {
  std::uint32_t w = 0;
  Gender g = Gender::female;
  bool z = false;
  bool s = false;
  std::string y_word;

  bool operator==(const PopulationSample&) const = default;
};

namespace stream {
inline constexpr std::uint64_t axis = 1;
inline constexpr std::uint64_t gender = 2;
inline constexpr std::uint64_t access_noise = 3;
inline constexpr std::uint64_t pronoun = 4;
}  // namespace stream

/// Draws `n` individuals. W, G, U_z and the pronoun choice each come from
/// their own seeded stream, so W and G are independent by construction.
inline std::vector<PopulationSample> sample_population(
    const ScmParams& params, std::size_t n,
    const templates::GenderLexicon& lexicon = templates::builtin_lexicon()) {
  params.validate();
  if (n == 0) throw InputError("sample count must be at least 1");
  if (lexicon.female_words().empty() || lexicon.male_words().empty()) {
    throw ConfigError("sampling needs words in both lexicon columns");
  }

  RandomStream w_rng(derive_seed(params.rng_seed, stream::axis));
  RandomStream g_rng(derive_seed(params.rng_seed, stream::gender));
  RandomStream u_rng(derive_seed(params.rng_seed, stream::access_noise));
  RandomStream y_rng(derive_seed(params.rng_seed, stream::pronoun));

  std::vector<PopulationSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    PopulationSample s;
    s.w = static_cast<std::uint32_t>(w_rng.below(params.axis_levels));
    s.g = g_rng.bernoulli(params.p_female) ? Gender::female : Gender::male;
    s.z = u_rng.uniform() < params.access_probability(s.w, s.g);
    s.s = s.z;
    const auto& column = lexicon.words(s.g);
    s.y_word = column[y_rng.below(column.size())];
    out.push_back(std::move(s));
  }
  return out;
}

/// The samples with s = 1, in their original order.
inline std::vector<PopulationSample> apply_selection(const std::vector<PopulationSample>& samples) {
  std::vector<PopulationSample> out;
  for (const auto& s : samples) {
    if (s.s) out.push_back(s);
  }
  return out;
}

inline std::string samples_to_csv(const std::vector<PopulationSample>& samples) {
  std::string out = "w,g,z,s,y_word\n";
  out.reserve(samples.size() * 20);
  for (const auto& s : samples) {
    out += std::to_string(s.w);
    out += ',';
    out += templates::to_string(s.g);
    out += s.z ? ",1" : ",0";
    out += s.s ? ",1," : ",0,";
    out += s.y_word;
    out += '\n';
  }
  return out;
}

}  // namespace biasprobe::scm
