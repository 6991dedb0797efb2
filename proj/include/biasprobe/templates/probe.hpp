#pragma once

#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "biasprobe/errors.hpp"
#include "biasprobe/templates/axis.hpp"
#include "biasprobe/templates/lexicon.hpp"
#include "biasprobe/text.hpp"

namespace biasprobe::templates {

inline constexpr std::string_view kMask = "[MASK]";

inline const std::vector<std::string>& builtin_verbs() {
  static const std::vector<std::string> verbs = {"was", "is", "will be"};
  return verbs;
}

inline const std::vector<std::string>& builtin_life_stages() {
  static const std::vector<std::string> stages = {"a child", "a kid",   "an adolescent",
                                                  "a teenager", "an adult", "all grown up"};
  return stages;
}

/// A probe pattern with `{mask}`, `{w}` and optional `{verb}` / `{life_stage}`
/// placeholders, plus the filler lists used to expand it.
struct TemplateSpec {
  std::string pattern;
  std::vector<std::string> verbs = builtin_verbs();
  std::vector<std::string> life_stages = builtin_life_stages();

  bool has_verb() const { return pattern.find("{verb}") != std::string::npos; }
  bool has_life_stage() const { return pattern.find("{life_stage}") != std::string::npos; }

  void validate() const {
    const auto once = [&](std::string_view ph, bool required) {
      const auto n = text::count_occurrences(pattern, ph);
      if (n > 1 || (required && n == 0)) {
        throw TemplateError("pattern '" + pattern + "' must contain " + std::string(ph) +
                            (required ? " exactly once" : " at most once"));
      }
    };
    once("{mask}", true);
    once("{w}", true);
    once("{verb}", false);
    once("{life_stage}", false);
    if (pattern.find(kMask) != std::string::npos) {
      throw TemplateError("pattern must use {mask}, not a literal " + std::string(kMask));
    }
    if (has_verb() && verbs.empty()) throw TemplateError("pattern uses {verb} but no verbs given");
    if (has_life_stage() && life_stages.empty()) {
      throw TemplateError("pattern uses {life_stage} but no life stages given");
    }
  }
};

/// One pattern per line; fillers default to the built-in verbs and stages.
inline std::vector<TemplateSpec> templates_from_lines(std::string_view content) {
  std::vector<TemplateSpec> out;
  for (auto& line : text::nonblank_lines(content)) {
    TemplateSpec t{std::string(text::trim(line))};
    t.validate();
    out.push_back(std::move(t));
  }
  if (out.empty()) throw TemplateError("template file has no patterns");
  return out;
}

inline std::vector<TemplateSpec> builtin_templates(AxisCategory category) {
  switch (category) {
    case AxisCategory::date:
    case AxisCategory::place:
      return {TemplateSpec{"{mask} {verb} {life_stage} in {w}."},
              TemplateSpec{"In {w}, {mask} {verb} {life_stage}."}};
    case AxisCategory::subreddit:
      return {TemplateSpec{"{mask} {verb} {life_stage}. {w}."}};
    case AxisCategory::custom: break;
  }
  throw TemplateError("custom category has no built-in templates");
}

struct ProbeText {
  std::string text;
  std::size_t w_index = 0;
  std::string w_value;
  std::string verb;
  std::string life_stage;
  std::size_t template_id = 0;

  bool operator==(const ProbeText&) const = default;
};

/// Expands every template against every axis value, axis-major, then
/// template, verb and life stage.
inline std::vector<ProbeText> render_probes(const std::vector<TemplateSpec>& templates,
                                            const AxisSpec& axis) {
  if (templates.empty()) throw TemplateError("no templates to render");
  axis.validate();
  for (const auto& t : templates) t.validate();

  static const std::vector<std::string> kNone = {""};
  std::vector<ProbeText> out;
  for (std::size_t wi = 0; wi < axis.values.size(); ++wi) {
    const std::string& w = axis.values[wi];
    for (std::size_t ti = 0; ti < templates.size(); ++ti) {
      const auto& t = templates[ti];
      const auto& verbs = t.has_verb() ? t.verbs : kNone;
      const auto& stages = t.has_life_stage() ? t.life_stages : kNone;
      for (const auto& verb : verbs) {
        for (const auto& stage : stages) {
          std::string s = t.pattern;
          text::replace_all(s, "{verb}", verb);
          text::replace_all(s, "{life_stage}", stage);
          text::replace_all(s, "{mask}", kMask);
          text::replace_all(s, "{w}", w);
          if (text::count_occurrences(s, kMask) != 1) {
            throw TemplateError("rendered probe '" + s + "' does not contain exactly one mask");
          }
          out.push_back({std::move(s), wi, w, verb, stage, ti});
        }
      }
    }
  }
  return out;
}

/// Words of `s`: maximal runs of ASCII letters, where a hyphen between two
/// letters joins its neighbours ("male-pattern" is one word).
inline std::vector<std::string> words_of(std::string_view s) {
  const auto alpha = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; };
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (alpha(c)) {
      cur.push_back(c);
    } else if (c == '-' && !cur.empty() && i + 1 < s.size() && alpha(s[i + 1])) {
      cur.push_back(c);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// True iff no lexicon word appears as a whole word outside the mask.
inline bool validate_neutral(const ProbeText& probe, const GenderLexicon& lexicon) {
  std::string stripped = probe.text;
  text::replace_all(stripped, kMask, " ");
  for (const auto& w : words_of(stripped)) {
    if (lexicon.contains_word(w)) return false;
  }
  return true;
}

}  // namespace biasprobe::templates
