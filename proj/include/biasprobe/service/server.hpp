#pragma once

#include <algorithm>
#include <charconv>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "biasprobe/errors.hpp"
#include "biasprobe/experiment/run.hpp"
#include "biasprobe/scorer/remote.hpp"
#include "httplib.h"
#include "json.hpp"

namespace biasprobe::service {

enum class RunState { queued, scoring, fitting, done, failed };

inline const char* to_string(RunState s) {
  switch (s) {
    case RunState::queued: return "queued";
    case RunState::scoring: return "scoring";
    case RunState::fitting: return "fitting";
    case RunState::done: return "done";
    case RunState::failed: return "failed";
  }
  return "failed";
}

struct RunStatus {
  std::string run_id;
  RunState state = RunState::queued;
  std::size_t probes_done = 0;
  std::size_t probes_total = 0;
  std::optional<std::string> error;
  /// Set when the failure came from the scorer backend.
  std::optional<bool> retriable;
  std::string label;
  std::string category;

  nlohmann::json to_json() const {
    nlohmann::json j{{"run_id", run_id},
                     {"state", to_string(state)},
                     {"probes_done", probes_done},
                     {"probes_total", probes_total},
                     {"error", error ? nlohmann::json(*error) : nlohmann::json(nullptr)}};
    if (retriable) j["retriable"] = *retriable;
    return j;
  }
};

/// Builds remote scorers from the run config; the token comes from the
/// environment.
inline std::unique_ptr<scorer::Scorer> make_remote_scorer(const experiment::ResolvedExperiment& r) {
  const auto& cfg = std::get<experiment::RemoteScorerConfig>(r.config.scorer);
  scorer::RemoteOptions opts;
  opts.url = cfg.url;
  opts.mask_token = cfg.mask_token;
  return std::make_unique<scorer::RemoteScorer>(std::move(opts));
}

struct ServiceOptions {
  std::filesystem::path out = "runs";
  std::optional<std::filesystem::path> static_dir;
  /// Scorer construction; the remote factory defaults to make_remote_scorer.
  experiment::RunOptions run_options;
};

/// HTTP facade over the experiment runner. Runs execute on background
/// threads; at most one execution exists per run_id.
class Service {
 public:
  explicit Service(ServiceOptions opts) : opts_(std::move(opts)) {
    if (!opts_.run_options.remote_factory) opts_.run_options.remote_factory = make_remote_scorer;
    register_routes();
  }

  ~Service() {
    stop();
    std::vector<std::thread> workers;
    {
      std::lock_guard lock(mu_);
      workers.swap(workers_);
    }
    for (auto& t : workers) t.join();
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  httplib::Server& server() noexcept { return server_; }

  /// Binds to `port` (0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port) {
    if (port == 0) return server_.bind_to_any_port(host);
    if (!server_.bind_to_port(host, port)) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
    return port;
  }

  /// Serves until stop(); call after bind().
  bool listen_after_bind() { return server_.listen_after_bind(); }

  void stop() { server_.stop(); }

  /// Blocks until the run leaves the queued/scoring/fitting states.
  RunStatus wait(const std::string& run_id) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] {
      const auto it = runs_.find(run_id);
      return it == runs_.end() || it->second.state == RunState::done || it->second.state == RunState::failed;
    });
    return runs_.at(run_id);
  }

  std::optional<RunStatus> status(const std::string& run_id) {
    {
      std::lock_guard lock(mu_);
      if (const auto it = runs_.find(run_id); it != runs_.end()) return it->second;
    }
    return status_from_disk(run_id);
  }

  struct Admission {
    std::string run_id;
    bool created = false;
  };

  /// Deduplicated admission: a known or finished run_id is returned as is;
  /// a failed one is restarted and resumes from its checkpoint.
  Admission submit(experiment::ExperimentConfig config) {
    config.out = opts_.out.string();
    const auto resolved = experiment::resolve(config);
    std::lock_guard lock(mu_);
    if (const auto it = runs_.find(resolved.run_id); it != runs_.end() && it->second.state != RunState::failed) {
      return {resolved.run_id, false};
    }
    if (auto disk = status_from_disk(resolved.run_id)) {
      runs_[resolved.run_id] = *disk;
      return {resolved.run_id, false};
    }
    RunStatus s;
    s.run_id = resolved.run_id;
    s.probes_total = resolved.probes.size();
    s.label = config.label.value_or("");
    s.category = templates::to_string(config.category);
    runs_[resolved.run_id] = s;
    workers_.emplace_back([this, config, id = resolved.run_id] { execute(config, id); });
    return {resolved.run_id, true};
  }

 private:
  static constexpr const char* kJson = "application/json";

  std::optional<RunStatus> status_from_disk(const std::string& run_id) const {
    if (run_id.find_first_not_of("0123456789abcdef") != std::string::npos) return std::nullopt;
    const auto manifest_path = opts_.out / run_id / "manifest.json";
    if (!std::filesystem::exists(manifest_path)) return std::nullopt;
    try {
      const auto m = nlohmann::json::parse(experiment::read_text_file(manifest_path));
      RunStatus s;
      s.run_id = run_id;
      s.state = RunState::done;
      s.probes_total = s.probes_done = m.at("probe_count").get<std::size_t>();
      s.label = m.value("label", "");
      s.category = m.value("category", "");
      return s;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }

  void update(const std::string& id, const std::function<void(RunStatus&)>& f) {
    {
      std::lock_guard lock(mu_);
      auto& s = runs_.at(id);
      if (s.state == RunState::done || s.state == RunState::failed) return;
      f(s);
    }
    cv_.notify_all();
  }

  void execute(const experiment::ExperimentConfig& config, const std::string& id) {
    auto run_opts = opts_.run_options;
    run_opts.progress = [&](std::size_t done, std::size_t total) {
      update(id, [&](RunStatus& s) {
        s.probes_done = done;
        s.probes_total = total;
      });
    };
    run_opts.on_state = [&](std::string_view state) {
      update(id, [&](RunStatus& s) { s.state = state == "fitting" ? RunState::fitting : RunState::scoring; });
    };
    try {
      const auto result = experiment::run_experiment(config, run_opts);
      update(id, [&](RunStatus& s) {
        s.probes_done = s.probes_total = result.manifest.at("probe_count").get<std::size_t>();
        s.state = RunState::done;
      });
    } catch (const ScorerError& e) {
      update(id, [&](RunStatus& s) {
        s.state = RunState::failed;
        s.error = e.what();
        s.retriable = e.retriable();
      });
    } catch (const std::exception& e) {
      update(id, [&](RunStatus& s) {
        s.state = RunState::failed;
        s.error = e.what();
      });
    }
  }

  static void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), kJson);
  }

  static void send_error(httplib::Response& res, int status, const std::string& message,
                         nlohmann::json extra = nlohmann::json::object()) {
    extra["error"] = message;
    send_json(res, status, extra);
  }

  /// Resolves a finished run or writes the matching error response.
  std::optional<experiment::RunResult> finished_run(const std::string& id, std::optional<int> degree,
                                                    httplib::Response& res) {
    const auto s = status(id);
    if (!s) {
      send_error(res, 404, "unknown run '" + id + "'");
      return std::nullopt;
    }
    if (s->state == RunState::failed) {
      if (s->retriable) {
        send_error(res, 502, "scorer failure: " + s->error.value_or(""), {{"retriable", *s->retriable}});
      } else {
        send_error(res, 500, s->error.value_or("run failed"));
      }
      return std::nullopt;
    }
    if (s->state != RunState::done) {
      send_error(res, 404, "run '" + id + "' has no results yet", {{"state", to_string(s->state)}});
      return std::nullopt;
    }
    try {
      return experiment::load_run(opts_.out / id, degree);
    } catch (const InputError& e) {
      send_error(res, 400, e.what());
    } catch (const FitError& e) {
      send_error(res, 400, e.what());
    }
    return std::nullopt;
  }

  static std::optional<int> degree_param(const httplib::Request& req, httplib::Response& res, bool& ok) {
    ok = true;
    if (!req.has_param("degree")) return std::nullopt;
    const auto v = req.get_param_value("degree");
    int d = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), d);
    if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) {
      ok = false;
      send_error(res, 400, "degree must be an integer");
      return std::nullopt;
    }
    if (d < stats::kMinDegree || d > stats::kMaxDegree) {
      ok = false;
      send_error(res, 400, "degree must be between 1 and 5");
      return std::nullopt;
    }
    return d;
  }

  nlohmann::json run_index() {
    std::map<std::string, RunStatus> all;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(opts_.out, ec)) {
      const auto id = entry.path().filename().string();
      if (auto s = status_from_disk(id)) all[id] = *s;
    }
    {
      std::lock_guard lock(mu_);
      for (const auto& [id, s] : runs_) all[id] = s;
    }
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& [id, s] : all) {
      auto j = s.to_json();
      j["label"] = s.label;
      j["category"] = s.category;
      runs.push_back(std::move(j));
    }
    return {{"runs", runs}};
  }

  void register_routes() {
    server_.Get("/api/lexicon", [](const httplib::Request&, httplib::Response& res) {
      const auto& lex = templates::builtin_lexicon();
      nlohmann::json pairs = nlohmann::json::array();
      for (const auto& p : lex.pairs()) pairs.push_back({{"male", p.male}, {"female", p.female}});
      send_json(res, 200, {{"pairs", pairs}, {"female", lex.female_words()}, {"male", lex.male_words()}});
    });

    server_.Get(R"(/api/axes/([^/]+))", [](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto category = templates::parse_axis_category(req.matches[1].str());
        const auto axis = templates::builtin_axis(category);
        send_json(res, 200, {{"category", templates::to_string(category)}, {"values", axis.values}});
      } catch (const ConfigError&) {
        send_error(res, 404, "no built-in axis '" + req.matches[1].str() + "'");
      }
    });

    server_.Post("/api/runs", [this](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::parse_error& e) {
        send_error(res, 400, std::string("request body is not JSON: ") + e.what());
        return;
      }
      try {
        const auto a = submit(experiment::config_from_json(body));
        send_json(res, a.created ? 202 : 200, {{"run_id", a.run_id}});
      } catch (const ConfigError& e) {
        send_error(res, 400, e.what());
      } catch (const TemplateError& e) {
        send_error(res, 400, e.what());
      } catch (const InputError& e) {
        send_error(res, 400, e.what());
      }
    });

    server_.Get("/api/runs", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, run_index());
    });

    server_.Get(R"(/api/runs/([0-9a-f]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto s = status(req.matches[1].str());
      if (!s) return send_error(res, 404, "unknown run '" + req.matches[1].str() + "'");
      send_json(res, 200, s->to_json());
    });

    server_.Get(R"(/api/runs/([0-9a-f]+)/series)", [this](const httplib::Request& req, httplib::Response& res) {
      if (auto run = finished_run(req.matches[1].str(), std::nullopt, res)) {
        res.status = 200;
        res.set_content(experiment::series_to_csv(run->series), "text/csv");
      }
    });

    server_.Get(R"(/api/runs/([0-9a-f]+)/fit)", [this](const httplib::Request& req, httplib::Response& res) {
      bool ok = true;
      const auto degree = degree_param(req, res, ok);
      if (!ok) return;
      if (auto run = finished_run(req.matches[1].str(), degree, res)) {
        const auto body = stats::fit_to_json(run->fit);
        if (experiment::degenerate_for(run->fit, run->female_present(), run->male_present())) {
          return send_error(res, 409, "degenerate statistics: a series has zero variance", {{"fit", body}});
        }
        send_json(res, 200, body);
      }
    });

    server_.Get(R"(/api/runs/([0-9a-f]+)/plot\.svg)", [this](const httplib::Request& req, httplib::Response& res) {
      bool ok = true;
      const auto degree = degree_param(req, res, ok);
      if (!ok) return;
      if (auto run = finished_run(req.matches[1].str(), degree, res)) {
        res.status = 200;
        res.set_content(experiment::render_plot(*run), "image/svg+xml");
      }
    });

    if (opts_.static_dir && std::filesystem::is_directory(*opts_.static_dir)) {
      server_.set_mount_point("/", opts_.static_dir->string());
    } else {
      server_.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(
            "<!doctype html><title>biasprobe</title><p>biasprobe service is running. "
            "The API lives under <code>/api</code>.</p>\n",
            "text/html");
      });
    }

    server_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      } catch (...) {
        send_error(res, 500, "internal error");
      }
    });
  }

  ServiceOptions opts_;
  httplib::Server server_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, RunStatus> runs_;
  std::vector<std::thread> workers_;
};

}  // namespace biasprobe::service
