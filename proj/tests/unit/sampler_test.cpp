#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "biasprobe/rng.hpp"
#include "biasprobe/scm/params.hpp"
#include "biasprobe/scm/sampler.hpp"

using namespace biasprobe;
using namespace biasprobe::scm;
using templates::builtin_lexicon;

namespace {

double female_fraction(const std::vector<PopulationSample>& xs) {
  std::size_t f = 0;
  for (const auto& s : xs) f += s.g == Gender::female;
  return double(f) / double(xs.size());
}

}  // namespace

TEST(Posterior, HandBayesValues) {
  const ScmParams p;
  EXPECT_NEAR(posterior_female_given_w(p, 0), 0.2 / 0.7, 1e-12);
  EXPECT_NEAR(posterior_female_given_w(p, 21), 0.8 / 1.3, 1e-12);
}

TEST(Posterior, SymmetricAccessLeavesPrior) {
  ScmParams p;
  p.p_female = 0.3;
  p.access_base_m = p.access_base_f;
  p.access_gain_m = p.access_gain_f;
  for (std::uint32_t w = 0; w < p.axis_levels; ++w) {
    EXPECT_NEAR(posterior_female_given_w(p, w), 0.3, 1e-12);
  }
}

TEST(Posterior, UndefinedWhenNobodyIsSelected) {
  ScmParams p;
  p.access_base_f = 0.0;
  p.access_gain_f = 0.0;
  p.access_base_m = 0.0;
  EXPECT_THROW(posterior_female_given_w(p, 0), UndefinedPosteriorError);
  EXPECT_THROW(posterior_female_given_w(ScmParams{}, 22), InputError);
}

TEST(ScmParams, AccessIsClamped) {
  ScmParams p;
  p.access_base_f = -0.5;
  p.access_gain_f = 3.0;
  for (std::uint32_t w = 0; w < p.axis_levels; ++w) {
    const double a = p.access_probability(w, Gender::female);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
  EXPECT_EQ(p.access_probability(0, Gender::female), 0.0);
  EXPECT_EQ(p.access_probability(21, Gender::female), 1.0);
}

TEST(ScmParams, JsonRoundTripAndValidation) {
  ScmParams p;
  p.rng_seed = 99;
  p.access_gain_m = -0.1;
  const nlohmann::json j = p;
  EXPECT_EQ(j.get<ScmParams>(), p);
  EXPECT_THROW((nlohmann::json{{"axis_levels", 1}}.get<ScmParams>()), ConfigError);
  EXPECT_THROW((nlohmann::json{{"p_female", 1.5}}.get<ScmParams>()), ConfigError);
  EXPECT_THROW((nlohmann::json{{"bogus", 1}}.get<ScmParams>()), ConfigError);
}

TEST(SamplePopulation, ConfigErrors) {
  ScmParams p;
  p.axis_levels = 1;
  EXPECT_THROW(sample_population(p, 10), ConfigError);
  p = ScmParams{};
  p.p_female = -0.1;
  EXPECT_THROW(sample_population(p, 10), ConfigError);
  EXPECT_THROW(sample_population(ScmParams{}, 0), InputError);
}

TEST(SamplePopulation, GenderIsBalanced) {
  const auto xs = sample_population(ScmParams{}, 100000);
  EXPECT_NEAR(female_fraction(xs), 0.5, 0.01);
}

TEST(SamplePopulation, SymmetricSelectionKeepsRatio) {
  ScmParams p;
  p.access_gain_f = p.access_gain_m = 0.0;
  p.access_base_f = p.access_base_m = 0.4;
  const auto selected = apply_selection(sample_population(p, 100000));
  EXPECT_NEAR(female_fraction(selected), 0.5, 0.01);
}

TEST(SamplePopulation, SelectedFemaleFractionFollowsPosterior) {
  const ScmParams p;
  const auto selected = apply_selection(sample_population(p, 200000));
  std::vector<PopulationSample> at0, at21;
  for (const auto& s : selected) {
    if (s.w == 0) at0.push_back(s);
    if (s.w == 21) at21.push_back(s);
  }
  EXPECT_NEAR(female_fraction(at0), 0.286, 0.02);
  EXPECT_NEAR(female_fraction(at21), 0.615, 0.02);
}

TEST(SamplePopulation, InvariantsHold) {
  const auto& lex = builtin_lexicon();
  for (const auto& s : sample_population(ScmParams{}, 20000)) {
    EXPECT_EQ(s.s, s.z);
    EXPECT_LT(s.w, 22u);
    EXPECT_TRUE(s.g == Gender::female ? lex.is_female(s.y_word) : lex.is_male(s.y_word));
  }
}

TEST(SamplePopulation, DeterministicPerSeed) {
  ScmParams p;
  p.rng_seed = 1234;
  const auto a = samples_to_csv(sample_population(p, 5000));
  const auto b = samples_to_csv(sample_population(p, 5000));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.rfind("w,g,z,s,y_word\n", 0), 0u);
  p.rng_seed = 1235;
  EXPECT_NE(a, samples_to_csv(sample_population(p, 5000)));
}

TEST(ApplySelection, FiltersAndPreservesOrder) {
  std::vector<PopulationSample> all_in(5), all_out(5);
  for (std::uint32_t i = 0; i < 5; ++i) {
    all_in[i] = {i, Gender::male, true, true, "he"};
    all_out[i] = {i, Gender::male, false, false, "he"};
  }
  EXPECT_EQ(apply_selection(all_in), all_in);
  EXPECT_TRUE(apply_selection(all_out).empty());

  std::vector<PopulationSample> mixed = {all_in[0], all_out[1], all_in[2]};
  const auto kept = apply_selection(mixed);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].w, 0u);
  EXPECT_EQ(kept[1].w, 2u);
}

TEST(ApplySelection, CountMatchesMeanAccess) {
  // Mean of a_g(w) over uniform w and p_female = 0.5 is 0.5 for the defaults.
  const auto xs = sample_population(ScmParams{}, 200000);
  const double expected = 200000 * 0.5;
  EXPECT_NEAR(double(apply_selection(xs).size()), expected, 0.02 * expected);
}

// Randomised parameter sets: per-level selected female fraction stays within
// 3/sqrt(count) of the Bayes posterior.
TEST(SamplePopulation, ConvergesToPosteriorForRandomParams) {
  RandomStream rng(42);
  for (int trial = 0; trial < 8; ++trial) {
    ScmParams p;
    p.axis_levels = 2 + static_cast<std::uint32_t>(rng.below(9));
    p.p_female = 0.2 + 0.6 * rng.uniform();
    p.access_base_f = rng.uniform();
    p.access_gain_f = rng.uniform() - 0.5;
    p.access_base_m = rng.uniform();
    p.access_gain_m = rng.uniform() - 0.5;
    p.rng_seed = 1000 + trial;
    const auto selected = apply_selection(sample_population(p, 60000));
    std::vector<std::size_t> count(p.axis_levels), female(p.axis_levels);
    for (const auto& s : selected) {
      ++count[s.w];
      female[s.w] += s.g == Gender::female;
    }
    for (std::uint32_t w = 0; w < p.axis_levels; ++w) {
      if (count[w] < 1000) continue;
      const double emp = double(female[w]) / double(count[w]);
      EXPECT_LT(std::abs(emp - posterior_female_given_w(p, w)), 3.0 / std::sqrt(double(count[w])))
          << "trial " << trial << " w " << w;
    }
  }
}
