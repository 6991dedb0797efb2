#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "biasprobe/errors.hpp"
#include "biasprobe/scm/sampler.hpp"
#include "biasprobe/scorer/prediction.hpp"
#include "biasprobe/templates/axis.hpp"
#include "biasprobe/templates/lexicon.hpp"
#include "json.hpp"

namespace biasprobe::scorer {

/// Token that absorbs whatever probability the lexicon words leave over.
inline constexpr const char* kResidualToken = "<other>";

/// Additively smoothed counts of gendered words per axis level.
///
///   P(word | w) = (count(w, word) + alpha) / (sum_word' count(w, word') + alpha * V)
///
/// with V the number of distinct lexicon words.
class SyntheticScorerModel {
 public:
  SyntheticScorerModel(std::vector<std::string> axis, std::vector<std::string> vocabulary,
                       double alpha)
      : axis_(std::move(axis)),
        vocabulary_(std::move(vocabulary)),
        alpha_(alpha),
        counts_(axis_.size(), std::vector<std::uint64_t>(vocabulary_.size(), 0)) {
    if (!(alpha_ > 0.0)) throw ConfigError("smoothing alpha must be positive");
    if (axis_.empty()) throw ConfigError("synthetic scorer needs a non-empty axis");
    if (vocabulary_.empty()) throw ConfigError("synthetic scorer needs a non-empty vocabulary");
  }

  const std::vector<std::string>& axis() const noexcept { return axis_; }
  const std::vector<std::string>& vocabulary() const noexcept { return vocabulary_; }
  double alpha() const noexcept { return alpha_; }
  std::size_t axis_levels() const noexcept { return axis_.size(); }

  std::uint64_t count(std::size_t w, std::size_t word) const { return counts_.at(w).at(word); }

  void add(std::size_t w, std::string_view word, std::uint64_t n = 1) {
    if (w >= axis_.size()) throw InputError("axis index " + std::to_string(w) + " out of range");
    counts_[w][word_index(word)] += n;
  }

  /// Smoothed distribution over the vocabulary at axis level `w`, in
  /// vocabulary order.
  std::vector<double> distribution(std::size_t w) const {
    const auto& row = counts_.at(w);
    double total = 0.0;
    for (auto c : row) total += static_cast<double>(c);
    const double denom = total + alpha_ * static_cast<double>(vocabulary_.size());
    std::vector<double> out;
    out.reserve(row.size());
    for (auto c : row) out.push_back((static_cast<double>(c) + alpha_) / denom);
    return out;
  }

  std::size_t word_index(std::string_view word) const {
    const auto it = std::find(vocabulary_.begin(), vocabulary_.end(), text::to_lower(word));
    if (it == vocabulary_.end()) throw InputError("word '" + std::string(word) + "' not in vocabulary");
    return static_cast<std::size_t>(it - vocabulary_.begin());
  }

  /// {axis, alpha, vocabulary, counts: [[w_index, word, count], ...]}; zero
  /// counts are omitted.
  nlohmann::json to_json() const {
    nlohmann::json counts = nlohmann::json::array();
    for (std::size_t w = 0; w < axis_.size(); ++w) {
      for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
        if (counts_[w][i] != 0) counts.push_back({w, vocabulary_[i], counts_[w][i]});
      }
    }
    return {{"axis", axis_}, {"alpha", alpha_}, {"vocabulary", vocabulary_}, {"counts", counts}};
  }

  static SyntheticScorerModel from_json(const nlohmann::json& j) {
    try {
      SyntheticScorerModel m(j.at("axis").get<std::vector<std::string>>(),
                             j.contains("vocabulary")
                                 ? j.at("vocabulary").get<std::vector<std::string>>()
                                 : templates::builtin_lexicon().all_words(),
                             j.at("alpha").get<double>());
      for (const auto& row : j.at("counts")) {
        m.add(row.at(0).get<std::size_t>(), row.at(1).get<std::string>(),
              row.at(2).get<std::uint64_t>());
      }
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid synthetic scorer model: ") + e.what());
    }
  }

 private:
  std::vector<std::string> axis_;
  std::vector<std::string> vocabulary_;
  double alpha_;
  std::vector<std::vector<std::uint64_t>> counts_;
};

/// Tallies y_word per axis level over the selected samples (s = 1).
inline SyntheticScorerModel train_synthetic_scorer(
    const std::vector<scm::PopulationSample>& selected_samples,
    const templates::GenderLexicon& lexicon, double alpha, const templates::AxisSpec& axis) {
  if (selected_samples.empty()) throw InputError("no samples to train on");
  SyntheticScorerModel model(axis.values, lexicon.all_words(), alpha);
  for (const auto& s : selected_samples) {
    if (s.s) model.add(s.w, s.y_word);
  }
  return model;
}

/// Scores a probe by looking up its axis value in a trained model. Emits
/// every vocabulary word plus the residual token.
class SyntheticScorer final : public Scorer {
 public:
  explicit SyntheticScorer(SyntheticScorerModel model) : model_(std::move(model)) {}

  const SyntheticScorerModel& model() const noexcept { return model_; }

  /// Entries a full (untruncated) prediction contains.
  std::size_t vocabulary_size() const noexcept { return model_.vocabulary().size() + 1; }

  MaskPrediction predict(const templates::ProbeText& probe) const {
    require_single_mask(probe);
    const auto& axis = model_.axis();
    const auto it = std::find(axis.begin(), axis.end(), probe.w_value);
    if (it == axis.end()) {
      throw UnknownAxisValueError("axis value '" + probe.w_value + "' was not in the training axis");
    }
    const auto dist = model_.distribution(static_cast<std::size_t>(it - axis.begin()));
    std::vector<TokenScore> entries;
    entries.reserve(dist.size() + 1);
    double total = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
      entries.push_back({model_.vocabulary()[i], dist[i]});
      total += dist[i];
    }
    entries.push_back({kResidualToken, std::max(0.0, 1.0 - total)});
    return MaskPrediction(std::move(entries));
  }

  MaskPrediction score(const templates::ProbeText& probe, std::size_t k) const override {
    if (k == 0) throw InputError("k must be at least 1");
    return predict(probe).top(k);
  }

  nlohmann::json descriptor() const override {
    return {{"type", "synthetic"}, {"alpha", model_.alpha()}, {"axis_levels", model_.axis_levels()}};
  }

 private:
  SyntheticScorerModel model_;
};

}  // namespace biasprobe::scorer
