#pragma once

#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "biasprobe/errors.hpp"
#include "biasprobe/text.hpp"

namespace biasprobe::templates {

enum class AxisCategory { date, place, subreddit, custom };

inline const char* to_string(AxisCategory c) {
  switch (c) {
    case AxisCategory::date: return "date";
    case AxisCategory::place: return "place";
    case AxisCategory::subreddit: return "subreddit";
    case AxisCategory::custom: return "custom";
  }
  return "custom";
}

inline AxisCategory parse_axis_category(std::string_view s) {
  if (s == "date") return AxisCategory::date;
  if (s == "place") return AxisCategory::place;
  if (s == "subreddit") return AxisCategory::subreddit;
  if (s == "custom") return AxisCategory::custom;
  throw ConfigError("unknown axis category '" + std::string(s) + "'");
}

/// Ordered values of the W variable; position is the x coordinate.
struct AxisSpec {
  AxisCategory category = AxisCategory::custom;
  std::vector<std::string> values;

  AxisSpec() = default;
  AxisSpec(AxisCategory c, std::vector<std::string> v) : category(c), values(std::move(v)) {
    validate();
  }

  std::size_t size() const noexcept { return values.size(); }

  void validate() const {
    if (values.empty()) throw ConfigError("axis has no values");
    std::set<std::string_view> seen;
    for (const auto& v : values) {
      if (text::trim(v).empty()) throw ConfigError("axis contains an empty value");
      if (!seen.insert(v).second) throw ConfigError("axis value '" + v + "' is duplicated");
    }
  }

  /// Index of `value`, or npos.
  std::size_t find(std::string_view value) const {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] == value) return i;
    }
    return std::string::npos;
  }

  std::string to_lines() const {
    std::string out;
    for (const auto& v : values) out += v + "\n";
    return out;
  }

  /// One value per line, order significant.
  static AxisSpec from_lines(std::string_view content) {
    std::vector<std::string> values;
    for (auto& line : text::nonblank_lines(content)) values.emplace_back(text::trim(line));
    return AxisSpec(AxisCategory::custom, std::move(values));
  }
};

/// Years from `first` to `last` inclusive in steps of `step`.
inline AxisSpec date_axis(int first = 1801, int last = 2011, int step = 10) {
  if (step <= 0 || last < first) throw ConfigError("invalid date range");
  std::vector<std::string> values;
  for (int y = first; y <= last; y += step) values.push_back(std::to_string(y));
  return AxisSpec(AxisCategory::date, std::move(values));
}

/// Bottom ten then top ten countries of the 2021 Global Gender Gap ranking.
inline const std::vector<std::string>& builtin_places() {
  static const std::vector<std::string> places = {
      "Afghanistan", "Yemen",   "Iraq",      "Pakistan", "Syria",
      "Democratic Republic of Congo", "Iran", "Mali", "Chad", "Saudi Arabia",
      "Switzerland", "Ireland", "Lithuania", "Rwanda",   "Namibia",
      "Sweden",      "New Zealand", "Norway", "Finland", "Iceland",
  };
  return places;
}

/// Subreddits with at least 400,000 commenters, ordered by increasing share
/// of self-reported female commenters.
inline const std::vector<std::string>& builtin_subreddits() {
  static const std::vector<std::string> subs = {
      "GlobalOffensive", "pcmasterrace", "nfl", "sports", "The_Donald",
      "leagueoflegends", "Overwatch", "gonewild", "Futurology", "space",
      "technology", "gaming", "Jokes", "dataisbeautiful", "woahdude",
      "askscience", "wow", "anime", "BlackPeopleTwitter", "politics",
      "pokemon", "worldnews", "reddit.com", "interestingasfuck", "videos",
      "nottheonion", "television", "science", "atheism", "movies",
      "gifs", "Music", "trees", "EarthPorn", "GetMotivated",
      "pokemongo", "news", "Fitness", "Showerthoughts", "OldSchoolCool",
      "explainlikeimfive", "todayilearned", "gameofthrones", "AdviceAnimals", "DIY",
      "WTF", "IAmA", "cringepics", "tifu", "mildlyinteresting",
      "funny", "pics", "LifeProTips", "creepy", "personalfinance",
      "food", "AskReddit", "books", "aww", "sex",
      "relationships",
  };
  return subs;
}

inline AxisSpec builtin_axis(AxisCategory category, int date_step = 10) {
  switch (category) {
    case AxisCategory::date: return date_axis(1801, 2011, date_step);
    case AxisCategory::place: return AxisSpec(AxisCategory::place, builtin_places());
    case AxisCategory::subreddit: return AxisSpec(AxisCategory::subreddit, builtin_subreddits());
    case AxisCategory::custom: break;
  }
  throw ConfigError("custom axes have no built-in values; supply an axis file");
}

}  // namespace biasprobe::templates
