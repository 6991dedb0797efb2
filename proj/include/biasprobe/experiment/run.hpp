#pragma once

#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "biasprobe/errors.hpp"
#include "biasprobe/experiment/config.hpp"
#include "biasprobe/experiment/io.hpp"
#include "biasprobe/experiment/plot.hpp"
#include "biasprobe/scm/sampler.hpp"
#include "biasprobe/scorer/mock.hpp"
#include "biasprobe/scorer/synthetic.hpp"
#include "biasprobe/stats/fit.hpp"
#include "biasprobe/stats/series.hpp"

namespace biasprobe::experiment {

inline constexpr std::size_t kCheckpointEvery = 50;

struct RunResult {
  nlohmann::json manifest;
  std::vector<stats::SeriesPoint> series;
  stats::FitResult fit;
  std::vector<scorer::GenderMass> masses;  ///< Empty when served from cache.
  std::filesystem::path dir;
  std::filesystem::path plot_path;
  bool cached = false;
  std::size_t scored_now = 0;  ///< Probes sent to the scorer by this call.

  std::string run_id() const { return manifest.at("run_id").get<std::string>(); }
  bool female_present() const { return manifest.at("genders").at("female").get<bool>(); }
  bool male_present() const { return manifest.at("genders").at("male").get<bool>(); }
};

/// True when Pearson's r is undefined for a gender the lexicon covers.
inline bool degenerate_for(const stats::FitResult& f, bool female, bool male) {
  return (female && !f.pearson_female) || (male && !f.pearson_male);
}

using ScorerFactory = std::function<std::unique_ptr<scorer::Scorer>(const ResolvedExperiment&)>;

struct RunOptions {
  /// Replaces scorer construction entirely when set.
  ScorerFactory scorer_factory;
  /// Builds remote scorers; runs with a remote scorer fail without it.
  ScorerFactory remote_factory;
  /// Called after each scored probe with (done, total), serialised.
  std::function<void(std::size_t, std::size_t)> progress;
  /// Called on entering "scoring" and "fitting".
  std::function<void(std::string_view)> on_state;
  std::size_t checkpoint_every = kCheckpointEvery;
};

inline std::filesystem::path run_dir(const ResolvedExperiment& r) { return cache_root(r.config) / r.run_id; }

/// Trains the synthetic scorer on the selected part of a freshly sampled
/// corpus. Deterministic given the resolved seed.
inline std::unique_ptr<scorer::Scorer> make_synthetic_scorer(const ResolvedExperiment& r) {
  const auto& cfg = std::get<SyntheticScorerConfig>(r.config.scorer);
  const auto population = scm::sample_population(cfg.params, cfg.corpus_n, r.lexicon);
  const auto selected = scm::apply_selection(population);
  if (selected.empty()) throw ConfigError("no synthetic sample passed selection; raise corpus_n or access");
  return std::make_unique<scorer::SyntheticScorer>(
      scorer::train_synthetic_scorer(selected, r.lexicon, cfg.alpha, r.axis));
}

inline std::unique_ptr<scorer::Scorer> make_scorer(const ResolvedExperiment& r, const RunOptions& opts) {
  if (opts.scorer_factory) return opts.scorer_factory(r);
  if (std::holds_alternative<SyntheticScorerConfig>(r.config.scorer)) return make_synthetic_scorer(r);
  if (std::holds_alternative<MockScorerConfig>(r.config.scorer)) {
    return std::make_unique<scorer::MockScorer>(scorer::MockScorer::from_json(r.mock_table));
  }
  if (!opts.remote_factory) throw ConfigError("remote scorer is not available here");
  return opts.remote_factory(r);
}

namespace detail {

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Re-throws the current exception with the probe index in its message,
/// keeping the error category.
[[noreturn]] inline void rethrow_with_index(std::exception_ptr e, std::size_t index) {
  const std::string at = "probe " + std::to_string(index) + ": ";
  try {
    std::rethrow_exception(e);
  } catch (const ProtocolError& x) {
    throw ProtocolError(at + x.what());
  } catch (const ScorerError& x) {
    throw ScorerError(at + x.what(), x.retriable());
  } catch (const UnknownAxisValueError& x) {
    throw UnknownAxisValueError(at + x.what());
  } catch (const InputError& x) {
    throw InputError(at + x.what());
  } catch (const ConfigError& x) {
    throw ConfigError(at + x.what());
  }
}

inline std::vector<scorer::GenderMass> score_all(const ResolvedExperiment& r, const scorer::Scorer& s,
                                                 const std::filesystem::path& dir, const RunOptions& opts,
                                                 std::size_t& scored_now) {
  const std::size_t total = r.probes.size();
  const auto ckpt_path = dir / "checkpoint.json";
  Checkpoint done = read_checkpoint(ckpt_path, r.run_id, total);
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < total; ++i) {
    if (!done.count(i)) todo.push_back(i);
  }

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::size_t error_index = 0;
  bool error_from_scorer = false;
  std::size_t unsaved = 0;

  if (opts.progress && !done.empty()) opts.progress(done.size(), total);

  const auto worker = [&] {
    while (!stop.load()) {
      const std::size_t t = next.fetch_add(1);
      if (t >= todo.size()) return;
      const std::size_t i = todo[t];
      try {
        const auto mass = scorer::gender_mass(s.score(r.probes[i], r.k), r.lexicon, r.k);
        std::lock_guard lock(mu);
        done[i] = mass;
        ++scored_now;
        if (++unsaved >= opts.checkpoint_every) {
          write_file_atomic(ckpt_path, checkpoint_to_json(r.run_id, total, done));
          unsaved = 0;
        }
        if (opts.progress) opts.progress(done.size(), total);
      } catch (...) {
        std::lock_guard lock(mu);
        // Keep the lowest failing index so the report is reproducible.
        if (!error || i < error_index) {
          error = std::current_exception();
          error_index = i;
          error_from_scorer = !done.count(i);
        }
        stop = true;
      }
    }
  };

  const std::size_t threads = std::min(std::max<std::size_t>(s.max_in_flight(), 1), todo.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  if (unsaved > 0) write_file_atomic(ckpt_path, checkpoint_to_json(r.run_id, total, done));
  if (error) {
    if (error_from_scorer) rethrow_with_index(error, error_index);
    std::rethrow_exception(error);
  }

  std::vector<scorer::GenderMass> out;
  out.reserve(total);
  for (const auto& [i, m] : done) out.push_back(m);
  return out;
}

}  // namespace detail

inline stats::FitResult fit_series(const std::vector<stats::SeriesPoint>& series, int degree,
                                   std::size_t axis_levels) {
  return stats::fit(series, degree, axis_levels);
}

inline std::string plot_title(const nlohmann::json& manifest) {
  std::string t = manifest.value("label", "");
  if (t.empty()) t = manifest.value("run_id", "");
  return t + " (" + manifest.value("category", "") + ")";
}

/// Loads a finished run directory. `degree` re-fits the cached series
/// without touching the scorer; nullopt uses the run's own degree.
inline RunResult load_run(const std::filesystem::path& dir, std::optional<int> degree = std::nullopt) {
  if (!std::filesystem::exists(dir / "manifest.json")) {
    throw InputError("no finished run at '" + dir.string() + "'");
  }
  RunResult r;
  r.dir = dir;
  r.cached = true;
  try {
    r.manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("corrupt manifest in '" + dir.string() + "': " + e.what());
  }
  r.series = series_from_csv(read_text_file(dir / "series.csv"));
  const int d = degree.value_or(r.manifest.at("fit_degree").get<int>());
  r.fit = fit_series(r.series, d, r.manifest.at("axis_levels").get<std::size_t>());
  r.plot_path = dir / "plot.svg";
  return r;
}

inline std::string render_plot(const RunResult& r, std::optional<int> degree_override = std::nullopt) {
  PlotOptions opts{plot_title(r.manifest), r.female_present(), r.male_present()};
  if (degree_override && *degree_override != r.fit.degree) {
    return render_plot(r.series, fit_series(r.series, *degree_override, r.fit.axis_levels), opts);
  }
  return render_plot(r.series, r.fit, opts);
}

/// Resolves the config, returns the cached result when the run already
/// finished, and otherwise scores (resuming from any checkpoint), fits and
/// writes the run directory. The manifest is written last and marks the
/// run complete.
inline RunResult run_experiment(const ExperimentConfig& config, const RunOptions& opts = {}) {
  const auto resolved = resolve(config);
  const auto dir = run_dir(resolved);
  if (std::filesystem::exists(dir / "manifest.json") && std::filesystem::exists(dir / "series.csv")) {
    return load_run(dir);
  }
  std::filesystem::create_directories(dir);
  const std::string started = detail::utc_now();

  const auto scorer = make_scorer(resolved, opts);
  if (opts.on_state) opts.on_state("scoring");
  RunResult r;
  r.dir = dir;
  r.masses = detail::score_all(resolved, *scorer, dir, opts, r.scored_now);

  if (opts.on_state) opts.on_state("fitting");
  std::vector<stats::ScoredProbe> scored;
  scored.reserve(resolved.probes.size());
  for (std::size_t i = 0; i < resolved.probes.size(); ++i) scored.emplace_back(resolved.probes[i], r.masses[i]);
  r.series = stats::aggregate(scored);
  if (r.series.size() != resolved.axis.size()) throw Error("series length differs from axis length");
  r.fit = fit_series(r.series, config.fit_degree, resolved.axis.size());

  const bool female = !resolved.lexicon.female_words().empty();
  const bool male = !resolved.lexicon.male_words().empty();
  nlohmann::json user_config = config_to_json(config);
  user_config.erase("out");
  r.manifest = {{"run_id", resolved.run_id},
                {"label", config.label.value_or("")},
                {"category", templates::to_string(config.category)},
                {"created_at", started},
                {"completed_at", detail::utc_now()},
                {"probe_count", resolved.probes.size()},
                {"axis_levels", resolved.axis.size()},
                {"k", resolved.k},
                {"fit_degree", config.fit_degree},
                {"seed", resolved.seed},
                {"scorer", scorer->descriptor()},
                {"tool_version", kToolVersion},
                {"genders", {{"female", female}, {"male", male}}},
                {"degenerate", degenerate_for(r.fit, female, male)},
                {"config", user_config},
                {"canonical", resolved.canonical}};

  write_file_atomic(dir / "series.csv", series_to_csv(r.series));
  write_file_atomic(dir / "fit.json", stats::fit_to_json(r.fit).dump(2) + "\n");
  if (config.write_masses) write_file_atomic(dir / "masses.csv", masses_to_csv(resolved.probes, r.masses));
  r.plot_path = dir / "plot.svg";
  write_file_atomic(r.plot_path, render_plot(r));
  write_file_atomic(dir / "manifest.json", r.manifest.dump(2) + "\n");
  return r;
}

}  // namespace biasprobe::experiment
