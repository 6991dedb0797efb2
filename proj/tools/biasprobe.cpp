// Command-line front end: simulate, dsep, probe, fit, report, serve.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "biasprobe/experiment/run.hpp"
#include "biasprobe/scm/dag.hpp"
#include "biasprobe/scm/dependence.hpp"
#include "biasprobe/service/server.hpp"
#include "biasprobe/stats/report.hpp"

namespace fs = std::filesystem;
using namespace biasprobe;

namespace {

enum Exit { kOk = 0, kConfig = 1, kScorer = 2, kDegenerate = 3 };

struct SimulateArgs {
  std::uint64_t seed = 7;
  std::size_t n = 200000;
  scm::ScmParams params;
  std::string csv;
  bool json = false;
};

struct DsepArgs {
  std::string dag = "with_gender";
  std::string a, b;
  std::vector<std::string> given;
  std::vector<std::string> edges;
  std::vector<std::string> selection;
};

struct ProbeArgs {
  std::string config;
  std::string scorer;
  std::string category;
  std::string axis_file;
  std::string template_file;
  std::string lexicon_file;
  std::optional<std::size_t> k;
  std::optional<int> degree;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string endpoint;
  std::string mask_token;
  std::string mock_table;
  std::optional<std::size_t> corpus_n;
  std::optional<double> alpha;
  std::string label;
  bool no_masses = false;
};

struct FitArgs {
  std::string run;
  int degree = 1;
};

struct ReportArgs {
  std::vector<std::string> runs;
  std::string out;
};

struct ServeArgs {
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string out = "runs";
  std::string static_dir = "web";
};

std::string fmt(double v) { return text::format_fixed(v, 6); }

std::string fmt_r(const std::optional<double>& r) { return r ? text::format_fixed(*r, 4) : "n/a"; }

void print_report_line(const char* name, const scm::DependenceReport& r) {
  std::cout << name << " n=" << r.n << " MI(W;G)=" << fmt(r.mi_nats) << " nats chi2=" << text::format_fixed(r.chi2, 2)
            << " dof=" << r.dof << " p=" << text::format_double(r.p_value) << "\n";
}

int run_simulate(const SimulateArgs& a) {
  auto params = a.params;
  params.rng_seed = a.seed;
  const auto population = scm::sample_population(params, a.n);
  const auto selected = scm::apply_selection(population);
  if (!a.csv.empty()) experiment::write_file_atomic(a.csv, scm::samples_to_csv(population));
  const auto full = scm::dependence_report(population, scm::Variable::W, scm::Variable::G);
  const auto sel = scm::dependence_report(selected, scm::Variable::W, scm::Variable::G);
  if (a.json) {
    std::cout << nlohmann::json{{"params", params}, {"full", full}, {"selected", sel}}.dump(2) << "\n";
  } else {
    print_report_line("full population:    ", full);
    print_report_line("selected population:", sel);
  }
  return kOk;
}

int run_dsep(const DsepArgs& a) {
  scm::CausalDag dag;
  if (a.edges.empty()) {
    dag = scm::build_reference_dag(scm::parse_dag_variant(a.dag));
  } else {
    const auto ensure = [&](const std::string& n) {
      if (dag.has_node(n)) return;
      const bool sel = std::find(a.selection.begin(), a.selection.end(), n) != a.selection.end();
      dag.add_node(n, sel ? scm::NodeKind::selection : scm::NodeKind::observed);
    };
    for (const auto& e : a.edges) {
      const bool bi = e.find("<->") != std::string::npos;
      const auto sep = bi ? e.find("<->") : e.find("->");
      if (sep == std::string::npos) throw InputError("edge '" + e + "' must look like A->B or A<->B");
      const std::string from(text::trim(e.substr(0, sep)));
      const std::string to(text::trim(e.substr(sep + (bi ? 3 : 2))));
      ensure(from);
      ensure(to);
      if (bi) {
        dag.add_bidirected(from, to);
      } else {
        dag.add_edge(from, to);
      }
    }
  }
  std::cout << (scm::d_separated(dag, a.a, a.b, a.given) ? "d-separated" : "not d-separated") << "\n";
  return kOk;
}

experiment::ExperimentConfig probe_config(const ProbeArgs& a) {
  experiment::ExperimentConfig c =
      a.config.empty() ? experiment::ExperimentConfig{} : experiment::load_config_file(a.config);
  if (!a.scorer.empty()) {
    if (a.scorer == "synthetic") {
      if (!std::holds_alternative<experiment::SyntheticScorerConfig>(c.scorer)) c.scorer = experiment::SyntheticScorerConfig{};
    } else if (a.scorer == "remote") {
      if (!std::holds_alternative<experiment::RemoteScorerConfig>(c.scorer)) c.scorer = experiment::RemoteScorerConfig{};
    } else if (a.scorer == "mock") {
      if (!std::holds_alternative<experiment::MockScorerConfig>(c.scorer)) c.scorer = experiment::MockScorerConfig{};
    } else {
      throw ConfigError("unknown scorer '" + a.scorer + "' (synthetic, remote, mock)");
    }
  }
  if (auto* s = std::get_if<experiment::SyntheticScorerConfig>(&c.scorer)) {
    if (a.corpus_n) s->corpus_n = *a.corpus_n;
    if (a.alpha) s->alpha = *a.alpha;
  }
  if (auto* r = std::get_if<experiment::RemoteScorerConfig>(&c.scorer)) {
    if (!a.endpoint.empty()) r->url = a.endpoint;
    if (!a.mask_token.empty()) r->mask_token = a.mask_token;
  } else if (!a.endpoint.empty() || !a.mask_token.empty()) {
    throw ConfigError("--endpoint and --mask-token need --scorer remote");
  }
  if (auto* m = std::get_if<experiment::MockScorerConfig>(&c.scorer)) {
    if (!a.mock_table.empty()) {
      m->table_path = a.mock_table;
      m->table = nullptr;
    }
  }
  if (!a.category.empty()) c.category = templates::parse_axis_category(a.category);
  if (!a.axis_file.empty()) {
    c.axis_file = a.axis_file;
    c.axis.reset();
    if (a.category.empty()) c.category = templates::AxisCategory::custom;
  }
  if (!a.template_file.empty()) {
    c.template_file = a.template_file;
    c.templates.reset();
  }
  if (!a.lexicon_file.empty()) c.lexicon_file = a.lexicon_file;
  if (a.k) c.k = a.k;
  if (a.degree) c.fit_degree = *a.degree;
  if (a.seed) c.seed = a.seed;
  if (!a.out.empty()) c.out = a.out;
  if (!a.label.empty()) c.label = a.label;
  if (a.no_masses) c.write_masses = false;
  c.validate();
  return c;
}

void print_fit(const stats::FitResult& f, bool female, bool male) {
  if (female) {
    std::cout << "female: slope=" << text::format_fixed(f.slope_female, 4) << " r=" << fmt_r(f.pearson_female) << "\n";
  }
  if (male) {
    std::cout << "male:   slope=" << text::format_fixed(f.slope_male, 4) << " r=" << fmt_r(f.pearson_male) << "\n";
  }
}

int run_probe(const ProbeArgs& a) {
  const auto config = probe_config(a);
  experiment::RunOptions opts;
  opts.remote_factory = service::make_remote_scorer;
  const auto r = experiment::run_experiment(config, opts);
  std::cout << "run " << r.run_id() << (r.cached ? " (cached)" : "") << ": " << r.manifest["probe_count"].get<std::size_t>()
            << " probes, " << r.series.size() << " axis values, degree " << r.fit.degree << "\n";
  std::cout << "written to " << r.dir.string() << "\n";
  print_fit(r.fit, r.female_present(), r.male_present());
  return experiment::degenerate_for(r.fit, r.female_present(), r.male_present()) ? kDegenerate : kOk;
}

int run_fit(const FitArgs& a) {
  const auto r = experiment::load_run(a.run, a.degree);
  const std::string suffix = "_d" + std::to_string(a.degree);
  experiment::write_file_atomic(r.dir / ("fit" + suffix + ".json"), stats::fit_to_json(r.fit).dump(2) + "\n");
  experiment::write_file_atomic(r.dir / ("plot" + suffix + ".svg"), experiment::render_plot(r));
  std::cout << "run " << r.run_id() << " refit at degree " << a.degree << " -> fit" << suffix << ".json, plot" << suffix
            << ".svg\n";
  print_fit(r.fit, r.female_present(), r.male_present());
  return experiment::degenerate_for(r.fit, r.female_present(), r.male_present()) ? kDegenerate : kOk;
}

int run_report(const ReportArgs& a) {
  std::vector<fs::path> dirs(a.runs.begin(), a.runs.end());
  if (!a.out.empty()) {
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(a.out)) {
      if (fs::exists(e.path() / "manifest.json")) found.push_back(e.path());
    }
    std::sort(found.begin(), found.end());
    dirs.insert(dirs.end(), found.begin(), found.end());
  }
  if (dirs.empty()) throw ConfigError("report needs run directories or --out");
  std::vector<std::pair<std::string, stats::FitResult>> rows;
  for (const auto& d : dirs) {
    const auto r = experiment::load_run(d);
    std::string label = r.manifest.value("label", "");
    if (label.empty()) label = r.run_id() + " (" + r.manifest.value("category", "") + ")";
    rows.emplace_back(label, r.fit);
  }
  std::cout << stats::render_report(stats::report_table(rows));
  return kOk;
}

service::Service* g_service = nullptr;

int run_serve(const ServeArgs& a) {
  service::ServiceOptions opts;
  opts.out = a.out;
  if (fs::is_directory(a.static_dir)) opts.static_dir = a.static_dir;
  service::Service svc(opts);
  const int port = svc.bind(a.host, a.port);
  g_service = &svc;
  std::signal(SIGINT, [](int) { if (g_service) g_service->stop(); });
  std::signal(SIGTERM, [](int) { if (g_service) g_service->stop(); });
  std::cout << "serving on http://" << a.host << ":" << port << " (runs in " << a.out << ")" << std::endl;
  svc.listen_after_bind();
  g_service = nullptr;
  return kOk;
}

template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const ScorerError& e) {
    std::cerr << "scorer error: " << e.what() << (e.retriable() ? " (retriable)" : "") << "\n";
    return kScorer;
  } catch (const DegenerateError& e) {
    std::cerr << "degenerate statistics: " << e.what() << "\n";
    return kDegenerate;
  } catch (const FitError& e) {
    std::cerr << "fit error: " << e.what() << "\n";
    return kDegenerate;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"biasprobe: spurious gender correlations in masked language models"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Sample the causal model and report W-G dependence");
  simulate->add_option("--seed", sim.seed, "RNG seed")->capture_default_str();
  simulate->add_option("--n", sim.n, "Population size")->capture_default_str()->check(CLI::PositiveNumber);
  simulate->add_option("--p-female", sim.params.p_female, "P(G = female)")->capture_default_str();
  simulate->add_option("--axis-levels", sim.params.axis_levels, "Number of W levels")->capture_default_str();
  simulate->add_option("--base-f", sim.params.access_base_f, "Female access at w = 0")->capture_default_str();
  simulate->add_option("--gain-f", sim.params.access_gain_f, "Female access gain across W")->capture_default_str();
  simulate->add_option("--base-m", sim.params.access_base_m, "Male access at w = 0")->capture_default_str();
  simulate->add_option("--gain-m", sim.params.access_gain_m, "Male access gain across W")->capture_default_str();
  simulate->add_option("--csv", sim.csv, "Write the sampled population as CSV");
  simulate->add_flag("--json", sim.json, "Print the reports as JSON");

  DsepArgs ds;
  auto* dsep = app.add_subcommand("dsep", "Query d-separation in a causal graph");
  dsep->add_option("--dag", ds.dag, "with_gender or with_selection")->capture_default_str();
  dsep->add_option("--a", ds.a, "First node")->required();
  dsep->add_option("--b", ds.b, "Second node")->required();
  dsep->add_option("--given", ds.given, "Conditioning node (repeatable)");
  dsep->add_option("--edge", ds.edges, "Custom edge A->B or A<->B (repeatable; replaces --dag)");
  dsep->add_option("--selection", ds.selection, "Mark a custom node as a selection node");

  ProbeArgs pa;
  auto* probe = app.add_subcommand("probe", "Render, score, aggregate and fit one run");
  probe->add_option("--config", pa.config, "Experiment config JSON; flags override it");
  probe->add_option("--scorer", pa.scorer, "synthetic, remote or mock");
  probe->add_option("--category", pa.category, "date, place, subreddit or custom");
  probe->add_option("--axis-file", pa.axis_file, "Axis values, one per line");
  probe->add_option("--template-file", pa.template_file, "Probe patterns, one per line");
  probe->add_option("--lexicon-file", pa.lexicon_file, "male,female CSV");
  probe->add_option("--k", pa.k, "Top-k predictions to sum")->check(CLI::PositiveNumber);
  probe->add_option("--degree", pa.degree, "Polynomial fit degree")->check(CLI::Range(1, 5));
  probe->add_option("--seed", pa.seed, "Run seed");
  probe->add_option("--out", pa.out, "Cache root for run directories");
  probe->add_option("--endpoint", pa.endpoint, "Fill-mask URL for the remote scorer");
  probe->add_option("--mask-token", pa.mask_token, "Mask token the remote model expects");
  probe->add_option("--mock-table", pa.mock_table, "JSON table for the mock scorer");
  probe->add_option("--n", pa.corpus_n, "Synthetic corpus size")->check(CLI::PositiveNumber);
  probe->add_option("--alpha", pa.alpha, "Synthetic smoothing");
  probe->add_option("--label", pa.label, "Row name in reports");
  probe->add_flag("--no-masses", pa.no_masses, "Skip masses.csv");

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Re-fit a finished run at another degree");
  fit->add_option("--run", fa.run, "Run directory")->required();
  fit->add_option("--degree", fa.degree, "Polynomial fit degree")->capture_default_str();

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "Slope and Pearson's r table over runs");
  report->add_option("runs", ra.runs, "Run directories");
  report->add_option("--out", ra.out, "Include every finished run under this root");

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  serve->add_option("--port", sa.port, "Port (0 picks a free one)")->capture_default_str();
  serve->add_option("--host", sa.host, "Bind address")->capture_default_str();
  serve->add_option("--out", sa.out, "Cache root for run directories")->capture_default_str();
  serve->add_option("--static", sa.static_dir, "Directory served at /")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return kConfig;
  }

  if (simulate->parsed()) return guarded([&] { return run_simulate(sim); });
  if (dsep->parsed()) return guarded([&] { return run_dsep(ds); });
  if (probe->parsed()) return guarded([&] { return run_probe(pa); });
  if (fit->parsed()) return guarded([&] { return run_fit(fa); });
  if (report->parsed()) return guarded([&] { return run_report(ra); });
  if (serve->parsed()) return guarded([&] { return run_serve(sa); });
  return kConfig;
}
