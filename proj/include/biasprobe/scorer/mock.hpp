#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "biasprobe/errors.hpp"
#include "biasprobe/scorer/prediction.hpp"
#include "json.hpp"

namespace biasprobe::scorer {

/// Fixed probability tables, optionally keyed by axis value. Used by tests
/// and for dry runs of the pipeline without a model.
class MockScorer final : public Scorer {
 public:
  explicit MockScorer(std::vector<TokenScore> table,
                      std::map<std::string, std::vector<TokenScore>> by_w = {})
      : table_(std::move(table)), by_w_(std::move(by_w)) {
    static_cast<void>(MaskPrediction{table_});
    for (const auto& [w, t] : by_w_) static_cast<void>(MaskPrediction{t});
  }

  /// Accepts either a flat `{"token": prob, ...}` object or
  /// `{"default": {...}, "by_w": {"<axis value>": {...}}}`.
  static MockScorer from_json(const nlohmann::json& j) {
    try {
      if (!j.is_object()) throw ConfigError("mock table must be a JSON object");
      if (!j.contains("default") && !j.contains("by_w")) return MockScorer(parse_table(j));
      std::map<std::string, std::vector<TokenScore>> by_w;
      if (j.contains("by_w")) {
        for (const auto& [w, t] : j.at("by_w").items()) by_w.emplace(w, parse_table(t));
      }
      return MockScorer(j.contains("default") ? parse_table(j.at("default")) : std::vector<TokenScore>{},
                        std::move(by_w));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid mock table: ") + e.what());
    } catch (const InputError& e) {
      throw ConfigError(std::string("invalid mock table: ") + e.what());
    }
  }

  MaskPrediction score(const templates::ProbeText& probe, std::size_t k) const override {
    require_single_mask(probe);
    if (k == 0) throw InputError("k must be at least 1");
    const auto it = by_w_.find(probe.w_value);
    return MaskPrediction(it != by_w_.end() ? it->second : table_).top(k);
  }

  nlohmann::json descriptor() const override { return {{"type", "mock"}}; }

 private:
  static std::vector<TokenScore> parse_table(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("mock table entry must map tokens to probabilities");
    std::vector<TokenScore> out;
    for (const auto& [token, prob] : j.items()) out.push_back({token, prob.get<double>()});
    return out;
  }

  std::vector<TokenScore> table_;
  std::map<std::string, std::vector<TokenScore>> by_w_;
};

}  // namespace biasprobe::scorer
