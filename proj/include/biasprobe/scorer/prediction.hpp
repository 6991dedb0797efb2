#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "biasprobe/errors.hpp"
#include "biasprobe/templates/lexicon.hpp"
#include "biasprobe/templates/probe.hpp"
#include "biasprobe/text.hpp"
#include "json.hpp"

namespace biasprobe::scorer {

struct TokenScore {
  std::string token;
  double prob = 0.0;

  bool operator==(const TokenScore&) const = default;
};

/// Candidates for the masked position, highest probability first.
class MaskPrediction {
 public:
  MaskPrediction() = default;

  /// Stable-sorts `entries` by descending probability. Throws InputError on
  /// a probability outside [0, 1] or a total above 1 + 1e-6.
  explicit MaskPrediction(std::vector<TokenScore> entries,
                          std::optional<std::size_t> k_available = std::nullopt)
      : entries_(std::move(entries)), k_available_(k_available.value_or(entries_.size())) {
    double total = 0.0;
    for (const auto& e : entries_) {
      if (!(e.prob >= 0.0 && e.prob <= 1.0)) {
        throw InputError("token '" + e.token + "' has probability outside [0, 1]");
      }
      total += e.prob;
    }
    if (total > 1.0 + 1e-6) throw InputError("token probabilities sum above 1");
    std::stable_sort(entries_.begin(), entries_.end(),
                     [](const TokenScore& a, const TokenScore& b) { return a.prob > b.prob; });
  }

  const std::vector<TokenScore>& entries() const noexcept { return entries_; }

  /// How many candidates the backend produced before any truncation.
  std::size_t k_available() const noexcept { return k_available_; }

  MaskPrediction top(std::size_t k) const {
    MaskPrediction out = *this;
    if (out.entries_.size() > k) out.entries_.resize(k);
    return out;
  }

  double total() const {
    double t = 0.0;
    for (const auto& e : entries_) t += e.prob;
    return t;
  }

 private:
  std::vector<TokenScore> entries_;
  std::size_t k_available_ = 0;
};

struct GenderMass {
  double female = 0.0;
  double male = 0.0;

  bool operator==(const GenderMass&) const = default;
};

/// Sums the probability of female-column and male-column tokens among the
/// first `k` entries of `pred`; other tokens contribute nothing.
inline GenderMass gender_mass(const MaskPrediction& pred, const templates::GenderLexicon& lexicon,
                              std::size_t k = 5) {
  if (k == 0) throw InputError("k must be at least 1");
  GenderMass m;
  const auto& entries = pred.entries();
  const std::size_t limit = std::min(k, entries.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (lexicon.is_female(entries[i].token)) {
      m.female += entries[i].prob;
    } else if (lexicon.is_male(entries[i].token)) {
      m.male += entries[i].prob;
    }
  }
  return m;
}

inline void require_single_mask(const templates::ProbeText& probe) {
  if (text::count_occurrences(probe.text, templates::kMask) != 1) {
    throw InputError("probe must contain " + std::string(templates::kMask) + " exactly once: '" +
                     probe.text + "'");
  }
}

/// A masked-token scoring backend. Implementations are read-only after
/// construction and may be called from several threads at once.
class Scorer {
 public:
  virtual ~Scorer() = default;

  /// Top-`k` candidates for the single mask in `probe`.
  virtual MaskPrediction score(const templates::ProbeText& probe, std::size_t k) const = 0;

  /// Stable identity of the backend, recorded in run manifests.
  virtual nlohmann::json descriptor() const = 0;

  /// Concurrent calls the backend tolerates.
  virtual std::size_t max_in_flight() const { return 1; }
};

}  // namespace biasprobe::scorer
