#pragma once

#include <algorithm>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "biasprobe/errors.hpp"
#include "biasprobe/text.hpp"

namespace biasprobe::templates {

enum class Gender { female, male };

inline const char* to_string(Gender g) { return g == Gender::female ? "female" : "male"; }

/// Ordered (male, female) word pairs. A column may repeat a word across rows
/// ("her" for both him/her and his/her); membership treats each column as a
/// set. Empty cells are allowed so single-gender lexicons can be expressed.
class GenderLexicon {
 public:
  struct Pair {
    std::string male;
    std::string female;
  };

  GenderLexicon() = default;

  explicit GenderLexicon(std::vector<Pair> pairs) : pairs_(std::move(pairs)) {
    for (auto& p : pairs_) {
      p.male = text::to_lower(text::trim(p.male));
      p.female = text::to_lower(text::trim(p.female));
      push_unique(male_, p.male);
      push_unique(female_, p.female);
    }
    if (male_.empty() && female_.empty()) throw ConfigError("lexicon has no words");
    for (const auto& w : male_) {
      if (contains(female_, w)) throw ConfigError("word '" + w + "' appears in both lexicon columns");
    }
  }

  const std::vector<Pair>& pairs() const noexcept { return pairs_; }

  /// Distinct words of each column, in first-occurrence order.
  const std::vector<std::string>& female_words() const noexcept { return female_; }
  const std::vector<std::string>& male_words() const noexcept { return male_; }
  const std::vector<std::string>& words(Gender g) const noexcept {
    return g == Gender::female ? female_ : male_;
  }

  /// Male column then female column, each deduplicated.
  std::vector<std::string> all_words() const {
    std::vector<std::string> out = male_;
    out.insert(out.end(), female_.begin(), female_.end());
    return out;
  }

  /// Case-insensitive, whole-token membership. Surrounding whitespace is
  /// ignored since some tokenizers report a leading space.
  bool is_female(std::string_view token) const { return contains(female_, normalise(token)); }
  bool is_male(std::string_view token) const { return contains(male_, normalise(token)); }
  bool contains_word(std::string_view token) const {
    const auto t = normalise(token);
    return contains(female_, t) || contains(male_, t);
  }

  std::string to_csv() const {
    std::string out = "male,female\n";
    for (const auto& p : pairs_) out += p.male + "," + p.female + "\n";
    return out;
  }

  /// Two-column `male,female` CSV with a mandatory header.
  static GenderLexicon from_csv(std::string_view content) {
    const auto lines = text::nonblank_lines(content);
    if (lines.empty() || text::to_lower(text::trim(lines.front())) != "male,female") {
      throw ConfigError("lexicon CSV must start with header 'male,female'");
    }
    std::vector<Pair> pairs;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const auto comma = lines[i].find(',');
      if (comma == std::string::npos || lines[i].find(',', comma + 1) != std::string::npos) {
        throw ConfigError("lexicon CSV line " + std::to_string(i + 1) + " needs exactly two columns");
      }
      pairs.push_back({lines[i].substr(0, comma), lines[i].substr(comma + 1)});
    }
    return GenderLexicon(std::move(pairs));
  }

 private:
  static std::string normalise(std::string_view token) { return text::to_lower(text::trim(token)); }

  static bool contains(const std::vector<std::string>& v, const std::string& w) {
    return !w.empty() && std::find(v.begin(), v.end(), w) != v.end();
  }

  static void push_unique(std::vector<std::string>& v, const std::string& w) {
    if (!w.empty() && !contains(v, w)) v.push_back(w);
  }

  std::vector<Pair> pairs_;
  std::vector<std::string> male_;
  std::vector<std::string> female_;
};

/// The twelve single-token gendered word pairs masked by the task.
inline const GenderLexicon& builtin_lexicon() {
  static const GenderLexicon lexicon({
      {"he", "she"},
      {"him", "her"},
      {"his", "her"},
      {"himself", "herself"},
      {"male", "female"},
      {"man", "woman"},
      {"men", "women"},
      {"husband", "wife"},
      {"father", "mother"},
      {"boyfriend", "girlfriend"},
      {"brother", "sister"},
      {"actor", "actress"},
  });
  return lexicon;
}

}  // namespace biasprobe::templates
