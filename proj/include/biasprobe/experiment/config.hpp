#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "biasprobe/errors.hpp"
#include "biasprobe/experiment/hash.hpp"
#include "biasprobe/scm/params.hpp"
#include "biasprobe/scorer/mock.hpp"
#include "biasprobe/stats/fit.hpp"
#include "biasprobe/templates/probe.hpp"
#include "json.hpp"

namespace biasprobe::experiment {

inline constexpr const char* kCacheDirEnv = "BIASPROBE_CACHE_DIR";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr std::size_t kDefaultRemoteK = 5;

struct SyntheticScorerConfig {
  scm::ScmParams params;
  std::size_t corpus_n = 200000;
  double alpha = 1.0;
};

struct RemoteScorerConfig {
  std::string url;
  std::string mask_token = "[MASK]";
};

/// Either a path to a JSON table file or the table inline.
struct MockScorerConfig {
  std::optional<std::string> table_path;
  nlohmann::json table;
};

using ScorerConfig = std::variant<SyntheticScorerConfig, RemoteScorerConfig, MockScorerConfig>;

inline const char* scorer_type(const ScorerConfig& s) {
  switch (s.index()) {
    case 0: return "synthetic";
    case 1: return "remote";
    default: return "mock";
  }
}

/// Everything needed to reproduce one run. Paths are resolved relative to
/// the working directory; inline lists win over files.
struct ExperimentConfig {
  ScorerConfig scorer = SyntheticScorerConfig{};
  templates::AxisCategory category = templates::AxisCategory::date;
  std::optional<std::string> axis_file;
  std::optional<std::vector<std::string>> axis;
  std::optional<std::string> template_file;
  std::optional<std::vector<std::string>> templates;
  std::optional<std::string> lexicon_file;
  std::optional<std::size_t> k;
  int fit_degree = 1;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> label;
  bool write_masses = true;

  void validate() const {
    if (fit_degree < stats::kMinDegree || fit_degree > stats::kMaxDegree) {
      throw ConfigError("fit_degree must be between 1 and 5");
    }
    if (k && *k == 0) throw ConfigError("k must be at least 1");
    if (category == templates::AxisCategory::custom && !axis && !axis_file) {
      throw ConfigError("custom category needs axis or axis_file");
    }
    if (const auto* s = std::get_if<SyntheticScorerConfig>(&scorer)) {
      s->params.validate();
      if (s->corpus_n == 0) throw ConfigError("corpus_n must be positive");
      if (!(s->alpha > 0.0)) throw ConfigError("alpha must be positive");
    } else if (const auto* r = std::get_if<RemoteScorerConfig>(&scorer)) {
      if (r->url.empty()) throw ConfigError("remote scorer needs a url");
      if (r->mask_token.empty()) throw ConfigError("remote scorer needs a mask_token");
    } else {
      const auto& m = std::get<MockScorerConfig>(scorer);
      if (!m.table_path && m.table.is_null()) throw ConfigError("mock scorer needs a table");
    }
  }
};

namespace detail {

template <class T>
std::optional<T> opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> known,
                           std::string_view where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + std::string(where));
  }
}

inline ScorerConfig scorer_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type")) throw ConfigError("scorer needs a type");
  const auto type = j.at("type").get<std::string>();
  if (type == "synthetic") {
    reject_unknown(j, {"type", "params", "corpus_n", "alpha"}, "synthetic scorer");
    SyntheticScorerConfig s;
    if (j.contains("params")) s.params = j.at("params").get<scm::ScmParams>();
    if (auto v = opt<std::size_t>(j, "corpus_n")) s.corpus_n = *v;
    if (auto v = opt<double>(j, "alpha")) s.alpha = *v;
    return s;
  }
  if (type == "remote") {
    reject_unknown(j, {"type", "url", "mask_token"}, "remote scorer");
    RemoteScorerConfig r;
    r.url = j.value("url", "");
    if (auto v = opt<std::string>(j, "mask_token")) r.mask_token = *v;
    return r;
  }
  if (type == "mock") {
    reject_unknown(j, {"type", "table"}, "mock scorer");
    MockScorerConfig m;
    if (!j.contains("table")) throw ConfigError("mock scorer needs a table");
    if (j.at("table").is_string()) {
      m.table_path = j.at("table").get<std::string>();
    } else {
      m.table = j.at("table");
    }
    return m;
  }
  throw ConfigError("unknown scorer type '" + type + "'");
}

inline nlohmann::json scorer_to_json(const ScorerConfig& s) {
  if (const auto* syn = std::get_if<SyntheticScorerConfig>(&s)) {
    return {{"type", "synthetic"}, {"params", syn->params}, {"corpus_n", syn->corpus_n}, {"alpha", syn->alpha}};
  }
  if (const auto* r = std::get_if<RemoteScorerConfig>(&s)) {
    return {{"type", "remote"}, {"url", r->url}, {"mask_token", r->mask_token}};
  }
  const auto& m = std::get<MockScorerConfig>(s);
  return {{"type", "mock"}, {"table", m.table_path ? nlohmann::json(*m.table_path) : m.table}};
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  try {
    detail::reject_unknown(j,
                           {"scorer", "category", "axis_file", "axis", "template_file", "templates",
                            "lexicon_file", "k", "fit_degree", "seed", "out", "label", "write_masses"},
                           "experiment config");
    ExperimentConfig c;
    if (j.contains("scorer")) c.scorer = detail::scorer_from_json(j.at("scorer"));
    if (auto v = detail::opt<std::string>(j, "category")) c.category = templates::parse_axis_category(*v);
    c.axis_file = detail::opt<std::string>(j, "axis_file");
    c.axis = detail::opt<std::vector<std::string>>(j, "axis");
    c.template_file = detail::opt<std::string>(j, "template_file");
    c.templates = detail::opt<std::vector<std::string>>(j, "templates");
    c.lexicon_file = detail::opt<std::string>(j, "lexicon_file");
    if (j.contains("k") && !j.at("k").is_null()) {
      if (!j.at("k").is_number_integer() || j.at("k").get<std::int64_t>() < 1) {
        throw ConfigError("k must be a positive integer");
      }
      c.k = j.at("k").get<std::size_t>();
    }
    if (auto v = detail::opt<int>(j, "fit_degree")) c.fit_degree = *v;
    c.seed = detail::opt<std::uint64_t>(j, "seed");
    c.out = detail::opt<std::string>(j, "out");
    c.label = detail::opt<std::string>(j, "label");
    if (auto v = detail::opt<bool>(j, "write_masses")) c.write_masses = *v;
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid experiment config: ") + e.what());
  }
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j{{"scorer", detail::scorer_to_json(c.scorer)},
                   {"category", templates::to_string(c.category)},
                   {"fit_degree", c.fit_degree},
                   {"write_masses", c.write_masses}};
  const auto put = [&](const char* key, const auto& v) {
    if (v) j[key] = *v;
  };
  put("axis_file", c.axis_file);
  put("axis", c.axis);
  put("template_file", c.template_file);
  put("templates", c.templates);
  put("lexicon_file", c.lexicon_file);
  put("k", c.k);
  put("seed", c.seed);
  put("out", c.out);
  put("label", c.label);
  return j;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ExperimentConfig load_config_file(const std::filesystem::path& path) {
  try {
    return config_from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

/// Root under which run directories are created.
inline std::filesystem::path cache_root(const ExperimentConfig& c) {
  if (c.out) return *c.out;
  if (const char* env = std::getenv(kCacheDirEnv); env && *env) return env;
  return "runs";
}

/// The config with every input materialised: lists loaded, defaults filled
/// and the scorer's randomness tied to the run seed.
struct ResolvedExperiment {
  ExperimentConfig config;
  templates::AxisSpec axis;
  std::vector<templates::TemplateSpec> templates;
  templates::GenderLexicon lexicon;
  std::vector<templates::ProbeText> probes;
  nlohmann::json mock_table;  ///< Null unless the scorer is mock.
  std::size_t k = kDefaultRemoteK;
  std::uint64_t seed = 7;
  nlohmann::json canonical;
  std::string run_id;
};

/// Entries in a full synthetic prediction: distinct lexicon words plus the
/// residual token.
inline std::size_t synthetic_vocabulary_size(const templates::GenderLexicon& lexicon) {
  return lexicon.all_words().size() + 1;
}

inline ResolvedExperiment resolve(const ExperimentConfig& config) {
  config.validate();
  ResolvedExperiment r;
  r.config = config;

  if (config.axis) {
    r.axis = templates::AxisSpec(config.category, *config.axis);
  } else if (config.axis_file) {
    r.axis = templates::AxisSpec::from_lines(read_text_file(*config.axis_file));
    r.axis.category = config.category;
  } else {
    r.axis = templates::builtin_axis(config.category);
  }

  const auto template_category =
      config.category == templates::AxisCategory::custom ? templates::AxisCategory::date : config.category;
  if (config.templates) {
    std::string joined;
    for (const auto& t : *config.templates) joined += t + "\n";
    r.templates = templates::templates_from_lines(joined);
  } else if (config.template_file) {
    r.templates = templates::templates_from_lines(read_text_file(*config.template_file));
  } else {
    r.templates = templates::builtin_templates(template_category);
  }

  r.lexicon = config.lexicon_file ? templates::GenderLexicon::from_csv(read_text_file(*config.lexicon_file))
                                  : templates::builtin_lexicon();
  r.probes = templates::render_probes(r.templates, r.axis);

  if (std::holds_alternative<SyntheticScorerConfig>(config.scorer)) {
    auto& syn = std::get<SyntheticScorerConfig>(r.config.scorer);
    syn.params.axis_levels = static_cast<std::uint32_t>(r.axis.size());
    if (config.seed) syn.params.rng_seed = *config.seed;
    syn.params.validate();
    r.seed = syn.params.rng_seed;
    r.k = config.k.value_or(synthetic_vocabulary_size(r.lexicon));
  } else {
    r.seed = config.seed.value_or(7);
    r.k = config.k.value_or(kDefaultRemoteK);
  }
  if (const auto* m = std::get_if<MockScorerConfig>(&config.scorer)) {
    if (m->table_path) {
      try {
        r.mock_table = nlohmann::json::parse(read_text_file(*m->table_path));
      } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("mock table '" + *m->table_path + "' is not valid JSON: " + e.what());
      }
    } else {
      r.mock_table = m->table;
    }
    static_cast<void>(scorer::MockScorer::from_json(r.mock_table));
  }

  if (r.axis.size() < static_cast<std::size_t>(config.fit_degree) + 2) {
    throw ConfigError("axis of " + std::to_string(r.axis.size()) + " values is too short for a degree-" +
                      std::to_string(config.fit_degree) + " fit");
  }

  // Content, not file names, goes into the hash so edited lists get new ids.
  nlohmann::json scorer_j = detail::scorer_to_json(r.config.scorer);
  if (scorer_j["type"] == "mock") scorer_j["table"] = sha256_hex(r.mock_table.dump());
  std::string template_text;
  for (const auto& t : r.templates) template_text += t.pattern + "\n";
  r.canonical = {{"scorer", scorer_j},
                 {"category", templates::to_string(config.category)},
                 {"axis_sha256", sha256_hex(r.axis.to_lines())},
                 {"templates_sha256", sha256_hex(template_text)},
                 {"lexicon_sha256", sha256_hex(r.lexicon.to_csv())},
                 {"k", r.k},
                 {"fit_degree", config.fit_degree},
                 {"seed", r.seed}};
  r.run_id = sha256_hex(r.canonical.dump()).substr(0, 16);
  return r;
}

}  // namespace biasprobe::experiment
