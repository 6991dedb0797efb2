#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include <gtest/gtest.h>

#include "biasprobe/experiment/run.hpp"
#include "support/temp_dir.hpp"

using namespace biasprobe;
using namespace biasprobe::experiment;
namespace fs = std::filesystem;

namespace {

std::size_t count_of(const std::string& hay, const std::string& needle) {
  return text::count_occurrences(hay, needle);
}

/// Mock table whose female mass rises along the date axis.
nlohmann::json rising_table() {
  nlohmann::json by_w;
  const auto axis = templates::builtin_axis(templates::AxisCategory::date);
  for (std::size_t i = 0; i < axis.size(); ++i) {
    by_w[axis.values[i]] = {{"she", 0.1 + 0.02 * double(i)}, {"he", 0.5 - 0.01 * double(i)}, {"it", 0.05}};
  }
  return {{"default", {{"it", 1.0}}}, {"by_w", by_w}};
}

ExperimentConfig mock_config(const fs::path& out, nlohmann::json table) {
  ExperimentConfig c;
  c.scorer.emplace<MockScorerConfig>().table = std::move(table);
  c.out = out.string();
  return c;
}

/// Wraps another scorer, counting calls and optionally failing at one probe.
class CountingScorer final : public scorer::Scorer {
 public:
  CountingScorer(std::unique_ptr<scorer::Scorer> inner, std::size_t in_flight = 1,
                 std::optional<std::size_t> fail_at = std::nullopt, std::atomic<std::size_t>* calls = nullptr)
      : inner_(std::move(inner)), in_flight_(in_flight), fail_at_(fail_at), calls_(calls) {}

  scorer::MaskPrediction score(const templates::ProbeText& p, std::size_t k) const override {
    if (calls_) ++*calls_;
    if (fail_at_ && p.w_index * 36 + p.template_id * 18 == *fail_at_ && p.verb == "was" &&
        p.life_stage == "a child") {
      throw ScorerError("endpoint returned HTTP 503", true);
    }
    return inner_->score(p, k);
  }
  nlohmann::json descriptor() const override { return inner_->descriptor(); }
  std::size_t max_in_flight() const override { return in_flight_; }

 private:
  std::unique_ptr<scorer::Scorer> inner_;
  std::size_t in_flight_;
  std::optional<std::size_t> fail_at_;
  std::atomic<std::size_t>* calls_;
};

struct Interrupted {};

}  // namespace

TEST(RunExperiment, DefaultSyntheticDateRun) {
  TempDir tmp("synthetic");
  ExperimentConfig c;
  c.out = tmp.path().string();
  const auto r = run_experiment(c);
  EXPECT_FALSE(r.cached);
  EXPECT_EQ(r.scored_now, 792u);
  EXPECT_EQ(r.masses.size(), 792u);
  ASSERT_EQ(r.series.size(), 22u);
  EXPECT_EQ(r.series.front().n_probes, 36u);
  EXPECT_EQ(r.fit.degree, 1);
  EXPECT_GE(*r.fit.pearson_female, 0.98);
  EXPECT_LE(*r.fit.pearson_male, -0.98);
  EXPECT_EQ(r.manifest["probe_count"], 792);
  EXPECT_EQ(r.manifest["scorer"]["type"], "synthetic");
  EXPECT_EQ(r.manifest["k"], 24);
  for (auto f : {"manifest.json", "series.csv", "fit.json", "plot.svg", "masses.csv", "checkpoint.json"}) {
    EXPECT_TRUE(fs::exists(r.dir / f)) << f;
  }
  const auto series = read_text_file(r.dir / "series.csv");
  EXPECT_EQ(series.rfind("w_index,w_value,mean_female,mean_male,n_probes\n0,1801,", 0), 0u);
  EXPECT_EQ(series_from_csv(series), r.series);
  const auto masses = read_text_file(r.dir / "masses.csv");
  EXPECT_EQ(masses.rfind("probe_index,w_index,template_id,verb,life_stage,female,male\n0,0,0,was,a child,", 0), 0u);
  const auto fit = nlohmann::json::parse(read_text_file(r.dir / "fit.json"));
  EXPECT_EQ(fit["degree"], 1);
  EXPECT_EQ(fit["ci"].size(), 22u);
}

TEST(RunExperiment, RerunIsServedFromCache) {
  TempDir tmp("cache");
  ExperimentConfig c;
  c.out = tmp.path().string();
  const auto first = run_experiment(c);
  const auto series = read_text_file(first.dir / "series.csv");
  std::size_t built = 0;
  RunOptions opts;
  opts.scorer_factory = [&](const ResolvedExperiment& r) {
    ++built;
    return make_scorer(r, {});
  };
  const auto second = run_experiment(c, opts);
  EXPECT_TRUE(second.cached);
  EXPECT_EQ(second.scored_now, 0u);
  EXPECT_EQ(built, 0u);
  EXPECT_EQ(second.run_id(), first.run_id());
  EXPECT_EQ(read_text_file(second.dir / "series.csv"), series);
  EXPECT_EQ(second.series, first.series);
  EXPECT_NEAR(*second.fit.pearson_female, *first.fit.pearson_female, 1e-15);
}

TEST(RunExperiment, IdenticalConfigsGiveIdenticalBytes) {
  TempDir a("bytes-a"), b("bytes-b");
  ExperimentConfig c;
  c.out = a.path().string();
  const auto ra = run_experiment(c);
  c.out = b.path().string();
  c.label = "another label";
  const auto rb = run_experiment(c);
  EXPECT_EQ(ra.run_id(), rb.run_id());
  EXPECT_EQ(read_text_file(ra.dir / "series.csv"), read_text_file(rb.dir / "series.csv"));
  EXPECT_EQ(read_text_file(ra.dir / "masses.csv"), read_text_file(rb.dir / "masses.csv"));
  EXPECT_EQ(read_text_file(ra.dir / "fit.json"), read_text_file(rb.dir / "fit.json"));
}

TEST(RunExperiment, RunIdTracksContent) {
  TempDir tmp("ids");
  ExperimentConfig c;
  c.out = tmp.path().string();
  const auto base = resolve(c).run_id;
  EXPECT_EQ(base.size(), 16u);

  auto seeded = c;
  seeded.seed = 8;
  EXPECT_NE(resolve(seeded).run_id, base);
  auto deg = c;
  deg.fit_degree = 2;
  EXPECT_NE(resolve(deg).run_id, base);
  auto custom = c;
  custom.category = templates::AxisCategory::custom;
  custom.axis = templates::builtin_axis(templates::AxisCategory::date).values;
  custom.axis->back() = "2012";
  EXPECT_NE(resolve(custom).run_id, base);

  // Same list from a file and inline hashes alike; the file name is irrelevant.
  const auto axis_path = tmp.path() / "axis.txt";
  std::ofstream(axis_path) << "1801\n1811\n1821\n1831\n";
  auto from_file = c;
  from_file.category = templates::AxisCategory::custom;
  from_file.axis_file = axis_path.string();
  auto inline_axis = c;
  inline_axis.category = templates::AxisCategory::custom;
  inline_axis.axis = std::vector<std::string>{"1801", "1811", "1821", "1831"};
  EXPECT_EQ(resolve(from_file).run_id, resolve(inline_axis).run_id);

  auto mock_a = mock_config(tmp.path(), {{"she", 0.5}});
  auto mock_b = mock_config(tmp.path(), {{"she", 0.4}});
  EXPECT_NE(resolve(mock_a).run_id, resolve(mock_b).run_id);
}

TEST(RunExperiment, ConstantMockIsDegenerate) {
  TempDir tmp("constant");
  const auto r = run_experiment(mock_config(tmp.path(), {{"she", 0.4}, {"he", 0.3}, {"it", 0.3}}));
  EXPECT_TRUE(r.fit.degenerate());
  EXPECT_TRUE(r.manifest["degenerate"].get<bool>());
  EXPECT_EQ(r.manifest["k"], 5);
  const auto fit = nlohmann::json::parse(read_text_file(r.dir / "fit.json"));
  EXPECT_TRUE(fit["pearson_female"].is_null());
  EXPECT_NEAR(r.series[3].mean_female, 0.4, 1e-12);
}

TEST(RunExperiment, ResumeAfterInterruptionMatchesGolden) {
  TempDir golden_dir("golden"), resumed_dir("resumed");
  const auto golden = run_experiment(mock_config(golden_dir.path(), rising_table()));

  const auto config = mock_config(resumed_dir.path(), rising_table());
  std::atomic<std::size_t> calls{0};
  RunOptions opts;
  opts.scorer_factory = [&](const ResolvedExperiment& r) {
    return std::make_unique<CountingScorer>(make_scorer(r, {}), 1, std::nullopt, &calls);
  };
  opts.progress = [](std::size_t done, std::size_t) {
    if (done == 120) throw Interrupted{};
  };
  EXPECT_THROW(run_experiment(config, opts), Interrupted);
  EXPECT_EQ(calls.load(), 120u);
  const auto dir = resumed_dir.path() / golden.run_id();
  EXPECT_FALSE(fs::exists(dir / "manifest.json"));
  EXPECT_EQ(read_checkpoint(dir / "checkpoint.json", golden.run_id(), 792).size(), 120u);

  opts.progress = nullptr;
  calls = 0;
  const auto resumed = run_experiment(config, opts);
  EXPECT_EQ(calls.load(), 792u - 120u);
  EXPECT_EQ(resumed.scored_now, 672u);
  EXPECT_EQ(read_text_file(resumed.dir / "series.csv"), read_text_file(golden.dir / "series.csv"));
  EXPECT_EQ(read_text_file(resumed.dir / "masses.csv"), read_text_file(golden.dir / "masses.csv"));
}

TEST(RunExperiment, CheckpointEveryFiftyProbes) {
  TempDir tmp("every50");
  const auto config = mock_config(tmp.path(), rising_table());
  const auto id = resolve(config).run_id;
  RunOptions opts;
  opts.progress = [&](std::size_t done, std::size_t) {
    if (done == 149 || done == 150 || done == 151) {
      const auto saved = read_checkpoint(tmp.path() / id / "checkpoint.json", id, 792).size();
      EXPECT_EQ(saved, done < 150 ? 100u : 150u) << done;
    }
  };
  run_experiment(config, opts);
}

TEST(RunExperiment, ConcurrentScoringMatchesSequential) {
  TempDir seq("seq"), par("par");
  const auto sequential = run_experiment(mock_config(seq.path(), rising_table()));
  RunOptions opts;
  opts.scorer_factory = [](const ResolvedExperiment& r) {
    return std::make_unique<CountingScorer>(make_scorer(r, {}), 4);
  };
  const auto parallel = run_experiment(mock_config(par.path(), rising_table()), opts);
  EXPECT_EQ(read_text_file(parallel.dir / "series.csv"), read_text_file(sequential.dir / "series.csv"));
  EXPECT_EQ(read_text_file(parallel.dir / "masses.csv"), read_text_file(sequential.dir / "masses.csv"));
}

TEST(RunExperiment, ScorerErrorCarriesProbeIndex) {
  TempDir tmp("fail");
  const auto config = mock_config(tmp.path(), rising_table());
  RunOptions opts;
  opts.scorer_factory = [](const ResolvedExperiment& r) {
    return std::make_unique<CountingScorer>(make_scorer(r, {}), 1, 72);
  };
  try {
    run_experiment(config, opts);
    FAIL() << "expected a scorer error";
  } catch (const ScorerError& e) {
    EXPECT_NE(std::string(e.what()).find("probe 72: "), std::string::npos) << e.what();
    EXPECT_TRUE(e.retriable());
  }
  const auto id = resolve(config).run_id;
  EXPECT_EQ(read_checkpoint(tmp.path() / id / "checkpoint.json", id, 792).size(), 72u);
  EXPECT_FALSE(fs::exists(tmp.path() / id / "manifest.json"));
}

TEST(RunExperiment, RemoteNeedsFactory) {
  TempDir tmp("remote");
  ExperimentConfig c;
  c.scorer = RemoteScorerConfig{"http://127.0.0.1:9/fill", "[MASK]"};
  c.out = tmp.path().string();
  EXPECT_THROW(run_experiment(c), ConfigError);
  EXPECT_EQ(resolve(c).k, 5u);
}

TEST(RenderPlot, LayersPerGender) {
  TempDir tmp("plot");
  ExperimentConfig c;
  c.out = tmp.path().string();
  const auto r = run_experiment(c);
  const auto svg = read_text_file(r.plot_path);
  EXPECT_EQ(count_of(svg, "<circle class=\"point "), 44u);
  EXPECT_EQ(count_of(svg, "<path class=\"fit "), 2u);
  EXPECT_EQ(count_of(svg, "<polygon class=\"band "), 2u);
  EXPECT_EQ(count_of(svg, "class=\"xlabel\""), 22u);

  const auto series_before = read_text_file(r.dir / "series.csv");
  const auto cubic = render_plot(r, 3);
  EXPECT_NE(cubic, svg);
  EXPECT_EQ(count_of(cubic, "<path class=\"fit "), 2u);
  EXPECT_EQ(read_text_file(r.dir / "series.csv"), series_before);
  EXPECT_THROW(render_plot(r, 6), InputError);
  EXPECT_THROW(render_plot(r, 0), InputError);
}

TEST(RenderPlot, FemaleOnlyLexicon) {
  TempDir tmp("female-only");
  const auto lex = tmp.path() / "lexicon.csv";
  std::ofstream(lex) << "male,female\n,she\n,her\n";
  auto c = mock_config(tmp.path(), rising_table());
  c.lexicon_file = lex.string();
  const auto r = run_experiment(c);
  EXPECT_FALSE(r.male_present());
  EXPECT_FALSE(r.manifest["degenerate"].get<bool>());
  const auto svg = read_text_file(r.plot_path);
  EXPECT_EQ(count_of(svg, "<circle class=\"point female"), 22u);
  EXPECT_EQ(count_of(svg, "<circle class=\"point male"), 0u);
  EXPECT_EQ(count_of(svg, "<path class=\"fit "), 1u);
}

TEST(ExperimentConfig, JsonRoundTripAndErrors) {
  const auto j = nlohmann::json::parse(R"({
    "scorer": {"type": "synthetic", "params": {"access_gain_m": 0.1}, "corpus_n": 5000, "alpha": 0.5},
    "category": "place", "k": 7, "fit_degree": 2, "seed": 3, "label": "x"})");
  const auto c = config_from_json(j);
  EXPECT_EQ(c.category, templates::AxisCategory::place);
  EXPECT_EQ(*c.k, 7u);
  EXPECT_EQ(std::get<SyntheticScorerConfig>(c.scorer).corpus_n, 5000u);
  EXPECT_EQ(config_to_json(config_from_json(config_to_json(c))), config_to_json(c));
  const auto r = resolve(c);
  EXPECT_EQ(std::get<SyntheticScorerConfig>(r.config.scorer).params.axis_levels, 20u);
  EXPECT_EQ(r.seed, 3u);
  EXPECT_EQ(r.probes.size(), 720u);

  const auto bad = [](const char* s) { return config_from_json(nlohmann::json::parse(s)); };
  EXPECT_THROW(bad(R"({"bogus": 1})"), ConfigError);
  EXPECT_THROW(bad(R"({"fit_degree": 6})"), ConfigError);
  EXPECT_THROW(bad(R"({"fit_degree": 0})"), ConfigError);
  EXPECT_THROW(bad(R"({"k": 0})"), ConfigError);
  EXPECT_THROW(bad(R"({"scorer": {"type": "magic"}})"), ConfigError);
  EXPECT_THROW(bad(R"({"scorer": {"type": "remote"}})"), ConfigError);
  EXPECT_THROW(bad(R"({"category": "custom"})"), ConfigError);
  EXPECT_THROW(bad(R"({"category": "date", "fit_degree": "one"})"), ConfigError);

  ExperimentConfig short_axis;
  short_axis.category = templates::AxisCategory::custom;
  short_axis.axis = std::vector<std::string>{"a", "b", "c"};
  EXPECT_NO_THROW(resolve(short_axis));
  short_axis.fit_degree = 2;
  EXPECT_THROW(resolve(short_axis), ConfigError);
  short_axis.templates = std::vector<std::string>{"{mask} {mask} {w}"};
  EXPECT_THROW(resolve(short_axis), TemplateError);
}

TEST(ExperimentIo, CsvQuotingRoundTrip) {
  std::vector<stats::SeriesPoint> s = {{0, "Lagos, Nigeria", 0.25, 0.5, 3}, {1, "say \"hi\"", 0.1, 0.2, 3}};
  const auto csv = series_to_csv(s);
  EXPECT_NE(csv.find("0,\"Lagos, Nigeria\",0.25,0.5,3\n"), std::string::npos);
  EXPECT_NE(csv.find("\"say \"\"hi\"\"\""), std::string::npos);
  EXPECT_EQ(series_from_csv(csv), s);
  EXPECT_THROW(series_from_csv("a,b\n"), InputError);
  EXPECT_THROW(series_from_csv(std::string(kSeriesHeader) + "\n0,x,zz,0,1\n"), InputError);
}

TEST(ExperimentIo, CheckpointIgnoresForeignRuns) {
  TempDir tmp("ckpt");
  const auto p = tmp.path() / "checkpoint.json";
  write_file_atomic(p, checkpoint_to_json("abc", 10, {{3, {0.1, 0.2}}, {4, {0.3, 0.0}}}));
  EXPECT_EQ(read_checkpoint(p, "abc", 10).size(), 2u);
  EXPECT_EQ(read_checkpoint(p, "abc", 10).at(4).female, 0.3);
  EXPECT_TRUE(read_checkpoint(p, "xyz", 10).empty());
  EXPECT_TRUE(read_checkpoint(p, "abc", 11).empty());
  write_file_atomic(p, "{not json");
  EXPECT_TRUE(read_checkpoint(p, "abc", 10).empty());
}

TEST(ExperimentConfig, CacheRootPrecedence) {
  ExperimentConfig c;
  ::unsetenv(kCacheDirEnv);
  EXPECT_EQ(cache_root(c), fs::path("runs"));
  ::setenv(kCacheDirEnv, "/tmp/elsewhere", 1);
  EXPECT_EQ(cache_root(c), fs::path("/tmp/elsewhere"));
  c.out = "mine";
  EXPECT_EQ(cache_root(c), fs::path("mine"));
  ::unsetenv(kCacheDirEnv);
}
