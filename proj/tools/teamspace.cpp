// teamspace: run the experiment server, export tidy tables, compute measures
// and drive bot cohorts.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "teamspace/analysis.hpp"
#include "teamspace/bot_hub.hpp"
#include "teamspace/errors.hpp"
#include "teamspace/event_log.hpp"
#include "teamspace/export.hpp"
#include "teamspace/net/bot_runner.hpp"
#include "teamspace/net/server.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace teamspace;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string new_run_id() {
  const auto t = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&t, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "run-%Y%m%dT%H%M%SZ", &utc);
  return buf;
}

std::pair<std::string, unsigned short> split_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("bind must be host:port, got " + bind);
  const int port = std::stoi(bind.substr(colon + 1));
  if (port < 0 || port > 65535) throw std::invalid_argument("port out of range: " + bind);
  return {bind.substr(0, colon), static_cast<unsigned short>(port)};
}

// ---- serve ---------------------------------------------------------------

struct ServeArgs {
  std::string config;
  std::string data_dir;
  std::string bind;
  std::optional<std::uint64_t> seed;
  std::string run_id;
  std::string static_dir;
  bool resume = false;
};

int serve(const ServeArgs& a) {
  auto config = a.config.empty() ? ExperimentConfig::defaults() : load_config(a.config);
  if (auto s = a.seed) {
    config.seed = *s;
  } else if (const char* env = std::getenv("TEAMSPACE_SEED"); env && *env) {
    config.seed = std::stoull(env);
  }
  config.validate();
  const fs::path data_dir = a.data_dir.empty() ? env_or("TEAMSPACE_DATA_DIR", "data/runs") : a.data_dir;
  const auto [host, port] = split_bind(a.bind.empty() ? env_or("TEAMSPACE_BIND", "127.0.0.1:8080") : a.bind);
  const auto run_id = a.run_id.empty() ? new_run_id() : a.run_id;
  const auto run_dir = data_dir / run_id;
  const auto log_path = run_dir / "events.jsonl";

  std::vector<Event> history;
  if (a.resume) {
    if (!fs::exists(log_path)) throw std::runtime_error("nothing to resume at " + log_path.string());
    history = read_event_log(log_path);
    validate_sequence(history);
  } else if (fs::exists(log_path)) {
    throw std::runtime_error(log_path.string() + " already exists; pass --resume to continue it");
  }
  fs::create_directories(run_dir);
  json config_json;
  to_json(config_json, config);
  write_json_file(run_dir / "config.json", config_json);

  JsonlEventLog log(log_path);
  Gateway gateway = history.empty()
                        ? Gateway(config, log, random_tokens(), a.static_dir)
                        : Gateway(config, log, random_tokens(), history, a.static_dir);
  net::ServerOptions options;
  options.address = host;
  options.port = port;
  net::Server server(gateway, options);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.start();
  std::cerr << "teamspace: serving " << run_id << " on http://" << host << ':' << server.port()
            << " (log " << log_path.string() << ")\n";
  while (!g_stop && !server.halted()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();

  if (server.halted()) {
    std::cerr << "teamspace: stopped after an event log failure; the log ends at the last durable event\n";
    return 1;
  }
  log.sync();
  const auto written = export_tables(gateway.state_copy(), config, run_dir / "export");
  std::cerr << "teamspace: wrote " << written.size() << " tables to " << (run_dir / "export").string()
            << '\n';
  return 0;
}

// ---- export --------------------------------------------------------------

int export_cmd(const fs::path& log, const fs::path& out, const std::vector<std::string>& tables,
               const std::optional<fs::path>& config_path) {
  try {
    const auto config = analysis::discover_config(log, config_path);
    const auto state = replay(read_event_log(log));
    for (const auto& p : export_tables(state, config, out, tables)) std::cout << p.string() << '\n';
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << '\n';
    return analysis::kExitValidation;
  } catch (const ReplayError& e) {
    std::cerr << "invalid log: " << e.what() << '\n';
    return analysis::kExitValidation;
  } catch (const CommandError& e) {
    std::cerr << e.what() << '\n';
    return analysis::kExitValidation;
  }
}

// ---- bots ----------------------------------------------------------------

json summary_json(const std::vector<bots::Summary>& summaries) {
  std::map<std::string, std::string> team_outcome;
  json rows = json::array();
  std::size_t violations = 0;
  for (const auto& s : summaries) {
    violations += s.violations.size();
    if (s.team_id) {
      auto& outcome = team_outcome[*s.team_id];
      if (s.final_status == "terminated" || outcome.empty()) outcome = s.final_status;
    }
    rows.push_back({{"pseudonym", s.pseudonym},
                    {"participant_id", s.participant_id},
                    {"team_id", s.team_id ? json(*s.team_id) : json(nullptr)},
                    {"final_status", s.final_status},
                    {"frames", s.frames},
                    {"posts", s.posts},
                    {"expected_rejections", s.expected_rejections},
                    {"violations", s.violations}});
  }
  std::size_t completions = 0;
  std::size_t terminations = 0;
  for (const auto& [_, outcome] : team_outcome) {
    completions += outcome == "complete";
    terminations += outcome == "terminated";
  }
  return {{"teams_formed", team_outcome.size()},
          {"completions", completions},
          {"terminations", terminations},
          {"violations", violations},
          {"bots", rows}};
}

struct BotsArgs {
  std::string server;
  std::string cohort;
  std::optional<std::uint64_t> seed;
  bool loopback = false;
  std::string config;
  std::string log;
  std::string summary;
};

int bots_run(const BotsArgs& a) {
  const auto spec = bots::cohort_from_json(read_json_file(a.cohort), a.seed);
  json summary;
  if (a.loopback) {
    const auto base = a.config.empty() ? ExperimentConfig::defaults() : load_config(a.config);
    bots::LoopbackOptions options;
    options.config = bots::apply_overrides(base, spec.config);
    if (!spec.config.contains("seed")) options.config.seed = spec.seed;
    options.scripts = spec.scripts;
    options.token_seed = spec.seed;
    std::optional<JsonlEventLog> log;
    if (!a.log.empty()) {
      const auto dir = fs::absolute(a.log).parent_path();
      fs::create_directories(dir);
      json config_json;
      to_json(config_json, options.config);
      write_json_file(dir / "config.json", config_json);
      log.emplace(a.log, FsyncPolicy::none);
      options.sink = &*log;
    }
    const auto result = bots::run_loopback(options);
    summary = summary_json(result.bots);
    summary["log"] = a.log.empty() ? json(nullptr) : json(a.log);
    summary["virtual_end"] = to_iso8601(result.ended_at);
  } else {
    net::NetworkOptions options;
    options.server_url = a.server;
    options.scripts = spec.scripts;
    const auto result = net::run_network(options);
    summary = summary_json(result.bots);
    summary["log"] = nullptr;  // the server owns it
    summary["timed_out"] = result.timed_out;
    summary["elapsed_seconds"] = static_cast<double>(result.elapsed.count()) / 1000.0;
  }
  const auto text = summary.dump(2);
  if (a.summary.empty()) {
    std::cout << text << '\n';
  } else {
    std::ofstream(a.summary) << text << '\n';
  }
  for (const auto& row : summary["bots"]) {
    for (const auto& v : row["violations"]) {
      std::cerr << "protocol violation (" << row["pseudonym"].get<std::string>()
                << "): " << v.get<std::string>() << '\n';
    }
  }
  return summary["violations"].get<std::size_t>() == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"teamspace: synchronous team experiments over chat"};
  app.require_subcommand(1);

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve", "Run the experiment server");
  serve_cmd->add_option("--config", serve_args.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  serve_cmd->add_option("--data-dir", serve_args.data_dir, "Run directory root [$TEAMSPACE_DATA_DIR]");
  serve_cmd->add_option("--bind", serve_args.bind, "host:port [$TEAMSPACE_BIND]");
  serve_cmd->add_option("--seed", serve_args.seed, "Condition seed [$TEAMSPACE_SEED]");
  serve_cmd->add_option("--run-id", serve_args.run_id, "Run directory name (default: UTC timestamp)");
  serve_cmd->add_option("--static", serve_args.static_dir, "Directory of web client assets");
  serve_cmd->add_flag("--resume", serve_args.resume, "Continue the log of an existing --run-id");

  fs::path export_log, export_out;
  std::vector<std::string> export_names;
  std::optional<fs::path> export_config;
  auto* export_sub = app.add_subcommand("export", "Write tidy CSV tables from an event log");
  export_sub->add_option("--log", export_log, "events.jsonl")->required()->check(CLI::ExistingFile);
  export_sub->add_option("--out", export_out, "Output directory")->required();
  export_sub->add_option("--table", export_names, "Only these tables (repeatable)");
  export_sub->add_option("--config", export_config, "Config (default: config.json beside the log)");

  analysis::Options analyze_opts;
  std::string dict_path, config_path;
  auto* analyze_sub = app.add_subcommand("analyze", "Compute measures from an event log");
  analyze_sub->add_option("subcommand", analyze_opts.subcommand,
                          "disagreement|climate|compromise|scales|accuracy|liwc|all")
      ->required();
  analyze_sub->add_option("--log", analyze_opts.log, "events.jsonl")->required();
  analyze_sub->add_option("--dict", dict_path, "LIWC-style dictionary (JSON)");
  analyze_sub->add_option("--out", analyze_opts.out, "Output directory")->required();
  analyze_sub->add_option("--config", config_path, "Config (default: config.json beside the log)");
  analyze_sub->add_flag("--by-phase", analyze_opts.by_phase, "LIWC profiles per chat phase");
  analyze_sub->add_flag("--shift", analyze_opts.shift, "LIWC discuss-to-decide shifts");

  BotsArgs bots_args;
  auto* bots_cmd = app.add_subcommand("bots", "Scripted participants");
  bots_cmd->require_subcommand(1);
  auto* bots_run_cmd = bots_cmd->add_subcommand("run", "Run a cohort");
  bots_run_cmd->add_option("--server", bots_args.server, "http://host:port");
  bots_run_cmd->add_option("--cohort", bots_args.cohort, "Cohort spec (JSON)")->required()->check(CLI::ExistingFile);
  bots_run_cmd->add_option("--seed", bots_args.seed, "Overrides the cohort seed");
  bots_run_cmd->add_flag("--loopback", bots_args.loopback, "Run against an in-process server on a virtual clock");
  bots_run_cmd->add_option("--config", bots_args.config, "Base config for --loopback")->check(CLI::ExistingFile);
  bots_run_cmd->add_option("--log", bots_args.log, "Event log path for --loopback");
  bots_run_cmd->add_option("--summary", bots_args.summary, "Write the summary here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_cmd) return serve(serve_args);
    if (*export_sub) return export_cmd(export_log, export_out, export_names, export_config);
    if (*analyze_sub) {
      if (!dict_path.empty()) analyze_opts.dict = dict_path;
      if (!config_path.empty()) analyze_opts.config = config_path;
      return analysis::run(analyze_opts, std::cerr);
    }
    if (*bots_run_cmd) {
      if (!bots_args.loopback && bots_args.server.empty()) {
        std::cerr << "bots run: --server is required unless --loopback is given\n";
        return 2;
      }
      return bots_run(bots_args);
    }
  } catch (const std::exception& e) {
    std::cerr << "teamspace: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
