#include "commands.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include "evaluate.hpp"
#include "iglu/config.hpp"
#include "iglu/dataset.hpp"
#include "iglu/grid_io.hpp"
#include "iglu/metrics.hpp"
#include "iglu/net.hpp"
#include "iglu/server.hpp"
#include "iglu/storage.hpp"
#include "iglu/taxonomy.hpp"

namespace iglu::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Failure with a chosen exit code; message goes to stderr.
struct Exit {
  int code;
  std::string message;
};

struct Common {
  bool json = false;
};

std::string cell_text(const Coord& c) {
  const Coord w = to_world(c);
  return "(" + std::to_string(w.x) + "," + std::to_string(w.y) + "," + std::to_string(w.z) + ")";
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw Exit{kUsageOrIo, "cannot write " + path.string()};
  f << j.dump(2) << '\n';
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Exit{kUsageOrIo, "cannot create " + dir.string() + ": " + ec.message()};
}

void report_issues(const std::vector<dataset::SchemaIssue>& issues, const fs::path& path, std::ostream& err) {
  for (const auto& i : issues) {
    err << path.string() << ": entry " << i.index << ": " << i.field << ": " << i.reason << '\n';
  }
}

dataset::ScanResult scan_or_exit(const fs::path& path, std::optional<dataset::Role> role, std::ostream& err) {
  dataset::ScanResult scan;
  try {
    scan = dataset::scan_records(path, role);
  } catch (const dataset::IoError& e) {
    throw Exit{kUsageOrIo, e.what()};
  }
  if (!scan.issues.empty()) {
    report_issues(scan.issues, path, err);
    throw Exit{kUsageOrIo, std::to_string(scan.issues.size()) + " malformed record(s) in " + path.string()};
  }
  return scan;
}

BlockGrid load_grid(const fs::path& path) {
  try {
    return grid_from_json(read_json_file(path));
  } catch (const std::exception& e) {
    throw Exit{kUsageOrIo, path.string() + ": " + e.what()};
  }
}

// ---------------------------------------------------------------------------

int cmd_ingest(const std::vector<std::string>& paths, const std::string& out_dir, const std::string& role_name,
               std::size_t min_words, const Common& common, std::ostream& out, std::ostream& err) {
  std::optional<dataset::Role> role;
  if (role_name == "architect") role = dataset::Role::Architect;
  if (role_name == "builder") role = dataset::Role::Builder;

  dataset::Corpus corpus;
  for (const auto& p : paths) {
    auto scan = scan_or_exit(p, role, err);
    for (auto& r : scan.corpus.architect) corpus.architect.push_back(std::move(r));
    for (auto& r : scan.corpus.builder) corpus.builder.push_back(std::move(r));
  }
  dataset::CleanConfig cc;
  cc.min_words = min_words;
  const auto result = dataset::clean(corpus, cc);

  json kept = json::array();
  for (const auto& r : result.kept.architect) kept.push_back(dataset::to_json(r));
  for (const auto& r : result.kept.builder) kept.push_back(dataset::to_json(r));
  json rejected = json::array();
  for (const auto& r : result.rejected) {
    rejected.push_back({{"role", r.role == dataset::Role::Architect ? "architect" : "builder"},
                        {"gameId", r.game_id},
                        {"stepId", r.step_id},
                        {"reason", dataset::to_string(r.reason)}});
  }
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_json_file(fs::path(out_dir) / "kept.json", kept);
    write_json_file(fs::path(out_dir) / "rejected.json", rejected);
  }

  if (common.json) {
    out << json{{"kept", kept.size()}, {"rejected", rejected}}.dump() << '\n';
    return kOk;
  }
  out << "kept " << kept.size() << " record(s), rejected " << rejected.size() << '\n';
  for (const auto& r : rejected) {
    out << "  rejected " << r["role"].get<std::string>() << " game " << r["gameId"] << " step " << r["stepId"] << ": "
        << r["reason"].get<std::string>() << '\n';
  }
  return kOk;
}

int cmd_stats(const std::string& path, bool clean_first, const Common& common, std::ostream& out, std::ostream& err) {
  auto corpus = scan_or_exit(path, std::nullopt, err).corpus;
  if (clean_first) corpus = dataset::clean(corpus).kept;
  const auto stats = dataset::compute_stats(corpus);
  if (common.json) {
    out << dataset::to_json(stats).dump() << '\n';
  } else {
    out << dataset::render_stats_table(stats);
  }
  return kOk;
}

int cmd_classify(const std::string& path, int tall_threshold, const Common& common, std::ostream& out) {
  json input;
  try {
    input = read_json_file(path);
  } catch (const std::exception& e) {
    throw Exit{kUsageOrIo, e.what()};
  }
  // A bare grid, or a list of {structureId|id, blocks|target|grid} entries.
  std::vector<std::pair<std::string, BlockGrid>> structures;
  try {
    const bool single = input.is_object() ? !input.contains("structures") && !input.contains("tasks")
                                          : input.empty() || input.at(0).is_array();
    if (single) {
      structures.emplace_back(fs::path(path).stem().string(), grid_from_json(input));
    } else {
      const json& list = input.is_object() ? (input.contains("structures") ? input["structures"] : input["tasks"]) : input;
      for (const auto& s : list) {
        const std::string id = s.contains("structureId") ? s["structureId"].get<std::string>() : s.at("id").get<std::string>();
        const json& blocks = s.contains("blocks") ? s["blocks"] : s.contains("target") ? s["target"] : s.at("grid");
        structures.emplace_back(id, grid_from_json(blocks));
      }
    }
  } catch (const std::exception& e) {
    throw Exit{kUsageOrIo, path + ": " + e.what()};
  }

  const taxonomy::Options options{tall_threshold};
  const std::vector<std::string> order{"flat", "flying", "diagonal", "tricky", "tall"};
  std::map<std::string, std::size_t> counts;
  for (const auto& name : order) counts[name] = 0;
  json rows = json::array();
  for (const auto& [id, grid] : structures) {
    std::vector<std::string> labels;
    try {
      labels = taxonomy::classify(grid, options).names();
    } catch (const taxonomy::EmptyStructure& e) {
      throw Exit{kDomainFailure, id + ": " + e.what()};
    }
    for (const auto& l : labels) ++counts[l];
    rows.push_back({{"structureId", id}, {"labels", labels}});
  }

  if (common.json) {
    json summary = json::object();
    for (const auto& name : order) summary[name] = counts[name];
    out << (structures.size() == 1 ? rows[0] : json{{"structures", rows}, {"summary", summary}}).dump() << '\n';
    return kOk;
  }
  for (const auto& r : rows) {
    out << r["structureId"].get<std::string>() << ":";
    for (const auto& l : r["labels"]) out << ' ' << l.get<std::string>();
    out << '\n';
  }
  if (structures.size() > 1) {
    for (std::size_t i = 0; i < order.size(); ++i) out << (i ? ", " : "") << order[i] << " [" << counts[order[i]] << "]";
    out << '\n';
  }
  return kOk;
}

int cmd_score(const std::string& g0_path, const std::string& g_path, const std::string& target_path, bool no_shift,
              const Common& common, std::ostream& out) {
  const auto g0 = load_grid(g0_path);
  const auto g = load_grid(g_path);
  const auto target = load_grid(target_path);
  metrics::ScoreOptions options;
  if (no_shift) options.shift_window = 0;
  const auto report = metrics::grid_f1(g, g0, diff(g0, target), options);
  if (common.json) {
    out << metrics::to_json(report).dump() << '\n';
    return kOk;
  }
  out << "f1 " << report.f1 << "  precision " << report.precision << "  recall " << report.recall << '\n'
      << "intersection " << report.intersection << " of " << report.target_size << " target / " << report.modifications
      << " modified, best shift (" << report.best_shift.dx << "," << report.best_shift.dz << ")\n";
  return kOk;
}

int cmd_replay(const std::string& path, const std::string& start_path, bool strict, const Common& common,
               std::ostream& out, std::ostream& err) {
  const auto corpus = scan_or_exit(path, dataset::Role::Builder, err).corpus;
  if (corpus.builder.empty()) throw Exit{kUsageOrIo, path + ": no builder records"};
  std::optional<BlockGrid> start_grid;
  if (!start_path.empty()) start_grid = load_grid(start_path);

  bool all_ok = true;
  json results = json::array();
  for (const auto& r : corpus.builder) {
    const WorldState start = start_grid ? spawn_state(*start_grid) : dataset::starting_state(corpus, r);
    json row{{"gameId", r.game_id}, {"stepId", r.step_id}};
    try {
      tape::ReplayOptions options;
      options.strict_positions = strict;
      dataset::VerifyResult v;
      if (strict) {
        // Strict mode goes through the tape replayer directly so position
        // checks apply; the block comparison is the same.
        const auto replayed = tape::replay_detailed(r.tape, start, options);
        v.replayed = replayed.state.grid;
        v.mismatch = diff(r.world_ending_state, v.replayed);
        v.consistent = v.mismatch.empty();
        v.warnings = replayed.warnings;
      } else {
        v = dataset::verify_builder_record_detailed(r, start);
      }
      row["verdict"] = v.consistent ? "VERIFIED" : "MISMATCH";
      row["grid"] = grid_to_json(v.replayed);
      json cells = json::array();
      for (const auto& [c, e] : v.mismatch) {
        // Mismatch is recorded -> replayed: Add means the replay has it,
        // Remove means only the record has it.
        cells.push_back({{"at", coord_to_json(to_world(c))},
                         {"side", e.tag == DeltaTag::Add ? "replayed" : "recorded"},
                         {"blockId", e.id}});
      }
      row["mismatch"] = cells;
      row["warnings"] = v.warnings;
      all_ok = all_ok && v.consistent;
    } catch (const tape::ReplayDivergence& e) {
      row["verdict"] = "DIVERGED";
      row["step"] = e.step();
      row["detail"] = e.what();
      all_ok = false;
    }
    results.push_back(std::move(row));
  }

  if (common.json) {
    out << (results.size() == 1 ? results[0] : results).dump() << '\n';
    return all_ok ? kOk : kDomainFailure;
  }
  for (const auto& row : results) {
    out << "game " << row["gameId"] << " step " << row["stepId"] << ": " << row["verdict"].get<std::string>() << '\n';
    if (row["verdict"] == "DIVERGED") {
      out << "  " << row["detail"].get<std::string>() << '\n';
      continue;
    }
    for (const auto& c : row["mismatch"]) {
      const Coord at = to_build(coord_from_json(c["at"]));
      out << "  " << cell_text(at) << " id " << c["blockId"] << " only in the " << c["side"].get<std::string>()
          << " grid\n";
    }
    out << "  final grid " << row["grid"].dump() << '\n';
  }
  return all_ok ? kOk : kDomainFailure;
}

void collect_outcomes(const fs::path& file, std::vector<metrics::GameOutcome>& outcomes) {
  auto take = [&](const json& j) {
    // Other server tables share the directory; only verdict rows count.
    if (j.is_object() && j.contains("winner")) outcomes.push_back(metrics::game_outcome_from_json(j));
  };
  std::ifstream in(file);
  if (!in) throw Exit{kUsageOrIo, "cannot read " + file.string()};
  if (file.extension() == ".ndjson" || file.extension() == ".jsonl") {
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto j = json::parse(line, nullptr, false);
      if (j.is_discarded()) continue;  // torn trailing row
      take(j);
    }
    return;
  }
  const auto j = read_json_file(file);
  if (j.is_array()) {
    for (const auto& e : j) take(e);
  } else {
    take(j);
  }
}

int cmd_tally(const std::string& path, const Common& common, std::ostream& out) {
  std::vector<metrics::GameOutcome> outcomes;
  try {
    if (fs::is_directory(path)) {
      std::vector<fs::path> files;
      for (const auto& entry : fs::recursive_directory_iterator(path)) {
        const auto ext = entry.path().extension();
        if (entry.is_regular_file() && (ext == ".json" || ext == ".ndjson" || ext == ".jsonl")) files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) collect_outcomes(f, outcomes);
    } else if (fs::exists(path)) {
      collect_outcomes(path, outcomes);
    } else {
      throw Exit{kUsageOrIo, "no such file or directory: " + path};
    }
  } catch (const json::exception& e) {
    throw Exit{kUsageOrIo, path + ": " + e.what()};
  } catch (const std::runtime_error& e) {
    throw Exit{kUsageOrIo, path + ": " + e.what()};
  }

  std::vector<metrics::AgentTally> rows;
  try {
    rows = metrics::tally_human_eval(outcomes);
  } catch (const std::invalid_argument& e) {
    throw Exit{kDomainFailure, e.what()};
  }
  if (common.json) {
    out << metrics::to_json(rows).dump() << '\n';
  } else {
    out << metrics::render_tally_table(rows);
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// serve

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

struct ServeOverrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> wire_port, admin_port;
  std::optional<std::string> web_root;
  bool memory = false;
};

int cmd_serve(const ServeOverrides& o, const Common& common, std::ostream& out, std::ostream& err) {
  const auto& [config_path, seed, wire_port, admin_port, web_root, memory] = o;
  ServerConfig config;
  try {
    config = load_server_config(config_path.empty() ? std::nullopt : std::optional<fs::path>(config_path));
  } catch (const std::exception& e) {
    throw Exit{kUsageOrIo, e.what()};
  }
  if (seed) config.seed = *seed;
  if (wire_port) config.wire_port = static_cast<std::uint16_t>(*wire_port);
  if (admin_port) config.admin_port = static_cast<std::uint16_t>(*admin_port);
  if (memory) config.storage_root.clear();
  if (web_root) config.web_root = fs::absolute(*web_root).string();

  std::shared_ptr<Storage> storage;
  try {
    if (config.storage_root.empty()) {
      storage = std::make_shared<MemoryStorage>();
    } else {
      storage = std::make_shared<FileStorage>(config.storage_root);
    }
  } catch (const std::exception& e) {
    throw Exit{kUsageOrIo, e.what()};
  }

  std::unique_ptr<server::GameServer> game;
  std::size_t task_count = 0;
  try {
    game = std::make_unique<server::GameServer>(config, storage);
    for (const auto& f : config.task_files) {
      for (auto& t : session::load_tasks(f)) {
        game->add_task(std::move(t));
        ++task_count;
      }
    }
  } catch (const std::exception& e) {
    throw Exit{kUsageOrIo, e.what()};
  }

  std::unique_ptr<net::WireServer> wire;
  std::unique_ptr<net::AdminServer> admin;
  try {
    wire = std::make_unique<net::WireServer>(*game, config.wire_host, config.wire_port);
    admin = std::make_unique<net::AdminServer>(*game, config.admin_host, config.admin_port, config.web_root);
  } catch (const net::NetError& e) {
    throw Exit{kUsageOrIo, e.what()};
  }

  g_stop = false;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  wire->start();
  admin->start();

  const std::string storage_text = config.storage_root.empty() ? "memory" : config.storage_root;
  if (common.json) {
    out << json{{"event", "listening"},
                {"wire", {{"host", config.wire_host}, {"port", wire->port()}}},
                {"admin", {{"host", config.admin_host}, {"port", admin->port()}}},
                {"storage", storage_text},
                {"tasks", game->tasks().size()}}
               .dump()
        << std::endl;
  } else {
    out << "iglu game server listening\n"
        << "  wire   tcp://" << config.wire_host << ":" << wire->port()
        << "  (newline-delimited JSON; WebSocket upgrade on the same port)\n"
        << "  admin  http://" << config.admin_host << ":" << admin->port() << "\n"
        << "  storage " << storage_text << ", " << game->tasks().size() << " task(s), " << task_count
        << " from task files\n"
        << std::flush;
  }

  auto last_tick = std::chrono::steady_clock::now();
  while (!g_stop) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    if (std::chrono::steady_clock::now() - last_tick >= std::chrono::seconds(1)) {
      last_tick = std::chrono::steady_clock::now();
      game->tick();
    }
  }

  // Seal live sessions before the connections go away so nobody is left
  // waiting on an open game.
  const auto sealed = game->shutdown();
  admin->stop();
  wire->stop();
  std::signal(SIGINT, SIG_DFL);
  std::signal(SIGTERM, SIG_DFL);
  if (common.json) {
    out << json{{"event", "stopped"}, {"sealedSessions", sealed}}.dump() << std::endl;
  } else {
    out << "stopped, sealed " << sealed << " live session(s)\n" << std::flush;
  }
  (void)err;
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_evaluate(const std::string& tasks_path, EvalRunConfig config, const std::string& out_dir, const Common& common,
                 std::ostream& out, std::ostream& err) {
  std::vector<EvalTask> tasks;
  try {
    tasks = load_eval_tasks(tasks_path);
  } catch (const std::exception& e) {
    throw Exit{kUsageOrIo, tasks_path + ": " + e.what()};
  }
  config.task_set_path = tasks_path;
  try {
    validate(config);
  } catch (const std::invalid_argument& e) {
    throw Exit{kUsageOrIo, e.what()};
  }

  EvalResult result;
  try {
    result = run_evaluation(tasks, config);
  } catch (const AgentUnreachable& e) {
    throw Exit{kDomainFailure, std::string("AgentUnreachable: ") + e.what()};
  }

  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    std::ofstream episodes(fs::path(out_dir) / "episodes.ndjson");
    for (const auto& e : result.episodes) episodes << to_json(e).dump() << '\n';
    write_json_file(fs::path(out_dir) / "leaderboard.json", to_json(result.row));
  }
  for (const auto& e : result.episodes) {
    if (e.error) err << "episode " << e.task_id << "#" << e.episode << ": " << *e.error << '\n';
    if (!e.ran) err << "episode " << e.task_id << "#" << e.episode << ": not run, time budget exhausted\n";
  }
  if (common.json) {
    out << to_json(result.row).dump() << '\n';
  } else {
    out << render_leaderboard(result.row);
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Grounded instruction building toolkit: data, scoring, game server and evaluation"};
  app.require_subcommand(1);
  Common common;
  app.add_flag("--json", common.json, "Machine-readable JSON on stdout");

  std::vector<std::string> ingest_paths;
  std::string ingest_out;
  std::string ingest_role = "auto";
  std::size_t min_words = 5;
  auto* ingest = app.add_subcommand("ingest", "Load and clean records, writing kept and rejected sets");
  ingest->add_option("paths", ingest_paths, "Record files (JSON array, object or NDJSON)")->required();
  ingest->add_option("--out", ingest_out, "Directory for kept.json and rejected.json");
  ingest->add_option("--role", ingest_role, "architect, builder or auto")
      ->check(CLI::IsMember({"auto", "architect", "builder"}));
  ingest->add_option("--min-words", min_words, "Shortest instruction kept");

  std::string stats_path;
  bool stats_clean = false;
  auto* stats = app.add_subcommand("stats", "Corpus statistics");
  stats->add_option("path", stats_path)->required();
  stats->add_flag("--clean", stats_clean, "Apply the cleaning rules first");

  std::string classify_path;
  int tall_threshold = taxonomy::kDefaultTallThreshold;
  auto* classify = app.add_subcommand("classify", "Structure category labels");
  classify->add_option("structures", classify_path)->required();
  classify->add_option("--tall-threshold", tall_threshold, "Lowest y that makes a structure tall")
      ->check(CLI::PositiveNumber);

  std::string g0_path, g_path, target_path;
  bool no_shift = false;
  auto* score = app.add_subcommand("score", "Grid F1 of a builder's work against a target");
  score->add_option("g0", g0_path, "Starting grid")->required();
  score->add_option("g", g_path, "Grid after the builder's turn")->required();
  score->add_option("target", target_path, "Target grid")->required();
  score->add_flag("--no-shift", no_shift, "Disable the translation search");

  std::string replay_path, replay_start;
  bool strict = false;
  auto* replay = app.add_subcommand("replay", "Replay builder records and verify their ending states");
  replay->add_option("record", replay_path)->required();
  replay->add_option("--start", replay_start, "Starting grid (defaults to the previous step of the game)");
  replay->add_flag("--strict", strict, "Also check recorded positions against simulated movement");

  std::string tally_path;
  auto* tally = app.add_subcommand("tally", "Human-evaluation win/loss table");
  tally->add_option("logs", tally_path, "Directory or file of verdict records")->required();

  ServeOverrides serve_opts;
  auto* serve = app.add_subcommand("serve", "Run the game server and admin API");
  serve->add_option("--config", serve_opts.config_path, "Server config JSON (IGLU_* variables override it)");
  serve->add_option("--seed", serve_opts.seed, "Seed for comparison ordering");
  serve->add_option("--wire-port", serve_opts.wire_port)->check(CLI::Range(0, 65535));
  serve->add_option("--admin-port", serve_opts.admin_port)->check(CLI::Range(0, 65535));
  serve->add_option("--web-root", serve_opts.web_root, "Directory of static files served on the admin port")
      ->check(CLI::ExistingDirectory);
  serve->add_flag("--memory", serve_opts.memory, "Keep logs in memory instead of the storage root");

  std::string eval_tasks, eval_out, eval_admin, eval_wire, eval_server_config;
  EvalRunConfig eval;
  double budget_minutes = 60.0;
  auto* evaluate = app.add_subcommand("evaluate", "Run an agent over a task set and print a leaderboard row");
  evaluate->add_option("--tasks", eval_tasks, "Task set file")->required();
  evaluate->add_option("--agent", eval.agent, "Built-in agent (grammar, noop) or an agent id on --admin/--wire");
  evaluate->add_option("--agent-id", eval.extra_agent_ids, "More ids of the same agent for --parallel on a server");
  evaluate->add_option("--admin", eval_admin, "External server admin endpoint host:port");
  evaluate->add_option("--wire", eval_wire, "External server wire endpoint host:port");
  evaluate->add_option("--episodes", eval.episodes_per_task, "Episodes per task")->check(CLI::PositiveNumber);
  evaluate->add_option("--budget-minutes", budget_minutes, "Wall-clock budget for the whole run")
      ->check(CLI::PositiveNumber);
  evaluate->add_option("--parallel", eval.parallel, "Concurrent episodes")->check(CLI::PositiveNumber);
  evaluate->add_option("--seed", eval.seed, "Seed for episode scheduling and the embedded server");
  evaluate->add_option("--team", eval.team, "Team column of the leaderboard row");
  evaluate->add_option("--step-budget", eval.step_budget, "Builder steps per turn on the embedded server")
      ->check(CLI::PositiveNumber);
  evaluate->add_option("--config", eval_server_config, "Server config for the embedded server's step budget");
  evaluate->add_flag("--no-shift", eval.no_shift, "Disable the translation search when scoring");
  evaluate->add_option("--out", eval_out, "Directory for episodes.ndjson and leaderboard.json");

  for (auto* sub : {ingest, stats, classify, score, replay, tally, serve, evaluate}) {
    sub->add_flag("--json", common.json, "Machine-readable JSON on stdout");
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageOrIo;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_paths, ingest_out, ingest_role, min_words, common, out, err);
    if (*stats) return cmd_stats(stats_path, stats_clean, common, out, err);
    if (*classify) return cmd_classify(classify_path, tall_threshold, common, out);
    if (*score) return cmd_score(g0_path, g_path, target_path, no_shift, common, out);
    if (*replay) return cmd_replay(replay_path, replay_start, strict, common, out, err);
    if (*tally) return cmd_tally(tally_path, common, out);
    if (*serve) return cmd_serve(serve_opts, common, out, err);
    if (*evaluate) {
      eval.time_budget = std::chrono::milliseconds(static_cast<long long>(budget_minutes * 60'000.0));
      try {
        if (!eval_admin.empty()) eval.admin = parse_endpoint(eval_admin);
        if (!eval_wire.empty()) eval.wire = parse_endpoint(eval_wire);
        if (!eval_server_config.empty() && evaluate->count("--step-budget") == 0) {
          eval.step_budget = load_server_config(fs::path(eval_server_config)).step_budget;
        }
      } catch (const std::exception& e) {
        throw Exit{kUsageOrIo, e.what()};
      }
      return cmd_evaluate(eval_tasks, eval, eval_out, common, out, err);
    }
  } catch (const Exit& e) {
    err << "iglu: " << e.message << '\n';
    return e.code;
  } catch (const std::exception& e) {
    err << "iglu: " << e.what() << '\n';
    return kDomainFailure;
  }
  return kUsageOrIo;
}

}  // namespace iglu::cli
