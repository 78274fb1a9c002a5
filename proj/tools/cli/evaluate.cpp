#include "evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "iglu/agent.hpp"
#include "iglu/grid_io.hpp"
#include "iglu/net.hpp"
#include "iglu/server.hpp"
#include "iglu/storage.hpp"

namespace iglu::cli {

namespace {

using nlohmann::json;
using steady = std::chrono::steady_clock;

agent::Policy builtin_policy(const std::string& name) {
  if (name == "grammar") return [](const agent::AgentObservation& o) { return agent::grammar_builder(o); };
  if (name == "noop") return agent::noop_policy;
  throw std::invalid_argument("unknown built-in agent '" + name + "' (expected grammar or noop)");
}

/// Embedded game server plus built-in agent workers, all on ephemeral ports.
class EmbeddedRig {
 public:
  EmbeddedRig(const EvalRunConfig& config, std::size_t workers) {
    ServerConfig sc;
    sc.wire_port = 0;
    sc.admin_port = 0;
    sc.storage_root.clear();
    sc.step_budget = config.step_budget;
    sc.seed = config.seed;
    game_ = std::make_unique<server::GameServer>(sc, std::make_shared<MemoryStorage>());
    wire_ = std::make_unique<net::WireServer>(*game_, sc.wire_host, 0);
    admin_ = std::make_unique<net::AdminServer>(*game_, sc.admin_host, 0);
    wire_->start();
    admin_->start();

    const auto policy = builtin_policy(config.agent);
    for (std::size_t i = 0; i < workers; ++i) {
      const std::string id = config.agent + "-" + std::to_string(i + 1);
      auto conn = agent::AgentConnection::connect(sc.wire_host, wire_->port(), id);
      auto* raw = conn.get();
      connections_.push_back(std::move(conn));
      threads_.emplace_back([this, raw, policy] {
        agent::RunOptions options;
        options.stop = &stop_;
        raw->run(policy, options);
      });
      ids_.push_back(id);
    }
    // Registration is asynchronous on the server side.
    const auto deadline = steady::now() + std::chrono::seconds(5);
    while (game_->agents().size() < workers && steady::now() < deadline) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }

  ~EmbeddedRig() {
    stop_ = true;
    for (auto& t : threads_) t.join();
    for (auto& c : connections_) c->close();
    wire_->stop();
    admin_->stop();
  }

  Endpoint admin() const { return {"127.0.0.1", admin_->port()}; }
  Endpoint wire() const { return {"127.0.0.1", wire_->port()}; }
  const std::vector<std::string>& agent_ids() const { return ids_; }

 private:
  std::unique_ptr<server::GameServer> game_;
  std::unique_ptr<net::WireServer> wire_;
  std::unique_ptr<net::AdminServer> admin_;
  std::atomic<bool> stop_{false};
  std::vector<std::unique_ptr<agent::AgentConnection>> connections_;
  std::vector<std::thread> threads_;
  std::vector<std::string> ids_;
};

struct Job {
  std::size_t task = 0;
  std::size_t episode = 0;
};

EpisodeResult run_episode(const EvalTask& t, std::size_t episode, const std::string& agent_id, const Endpoint& admin,
                          const Endpoint& wire, std::chrono::milliseconds timeout, const metrics::ScoreOptions& opts,
                          const std::string& human_id) {
  EpisodeResult r;
  r.task_id = t.task.id;
  r.episode = episode;
  r.ran = true;
  const GridDelta target = diff(t.task.initial, t.task.target);
  r.weight = target.size();

  net::AdminClient client(admin.host, admin.port);
  const auto code = client.post("/join-codes", {{"agentId", agent_id}, {"taskId", t.task.id}}).at("joinCode");
  auto architect = agent::ArchitectClient::connect(wire.host, wire.port, human_id);
  const auto played = agent::run_scripted_architect(*architect, code.get<std::string>(), t.instructions, timeout);
  architect->close();
  r.completion_code = played.completion_code;
  r.questions = played.questions;

  // Score the persisted log rather than the client's mirror.
  const json log = client.get("/logs/" + played.completion_code);
  std::vector<protocol::GameEvent> events;
  for (const auto& e : log.at("events")) events.push_back(protocol::game_event_from_json(e));
  const WorldState final_world = session::replay_log(t.task, events);
  r.report = metrics::grid_f1(final_world.grid, t.task.initial, target, opts);
  r.report.episode_length = log.at("summary").value("builderSteps", std::uint64_t{0});
  return r;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::vector<EvalTask> load_eval_tasks(const std::filesystem::path& path) {
  const auto j = read_json_file(path);
  const auto& list = j.is_object() && j.contains("tasks") ? j.at("tasks") : j;
  std::vector<EvalTask> out;
  for (const auto& entry : list.is_array() ? list : json::array({list})) {
    EvalTask t;
    t.task = session::task_from_json(entry);
    if (entry.contains("instructions")) {
      for (const auto& line : entry.at("instructions")) t.instructions.push_back(line.get<std::string>());
    } else {
      t.instructions = agent::script_instructions(t.task.initial, t.task.target);
    }
    out.push_back(std::move(t));
  }
  return out;
}

Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("endpoint '" + text + "' must be host:port");
  Endpoint e{text.substr(0, colon), 0};
  if (e.host.empty()) e.host = "127.0.0.1";
  const std::string port = text.substr(colon + 1);
  if (port.empty() || port.size() > 5 || !std::all_of(port.begin(), port.end(), ::isdigit) || std::stoi(port) > 65535) {
    throw std::invalid_argument("endpoint '" + text + "' has a bad port");
  }
  e.port = static_cast<std::uint16_t>(std::stoi(port));
  return e;
}

void validate(const EvalRunConfig& c) {
  if (c.episodes_per_task < 1) throw std::invalid_argument("episodes per task must be at least 1");
  if (c.time_budget.count() <= 0) throw std::invalid_argument("time budget must be positive");
  if (c.parallel < 1) throw std::invalid_argument("parallel must be at least 1");
  if (c.admin.has_value() != c.wire.has_value()) {
    throw std::invalid_argument("an external server needs both the admin and the wire endpoint");
  }
  if (!c.admin) builtin_policy(c.agent);
}

json to_json(const EpisodeResult& e) {
  json j{{"taskId", e.task_id},     {"episode", e.episode},       {"ran", e.ran},
         {"budgetExceeded", e.budget_exceeded}, {"weight", e.weight}, {"score", metrics::to_json(e.report)},
         {"questions", e.questions}};
  if (e.error) j["error"] = *e.error;
  return j;
}

json to_json(const LeaderboardRow& r) {
  return {{"team", r.team},
          {"approach", r.approach},
          {"f1", r.f1},
          {"precision", r.precision},
          {"recall", r.recall},
          {"episodeLength", r.episode_length},
          {"submissions", r.submissions},
          {"episodes", r.episodes},
          {"completed", r.completed}};
}

std::string render_leaderboard(const LeaderboardRow& r) {
  const std::vector<std::string> head{"Team", "Approach", "F1", "Precision", "Recall", "Ep. Length", "# of Submissions"};
  const std::vector<std::string> row{r.team,
                                     r.approach,
                                     fixed(r.f1, 3),
                                     fixed(r.precision, 3),
                                     fixed(r.recall, 3),
                                     fixed(r.episode_length, 0),
                                     std::to_string(r.submissions)};
  std::ostringstream out;
  for (int line = 0; line < 2; ++line) {
    const auto& cells = line == 0 ? head : row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::size_t width = std::max(head[i].size(), row[i].size());
      out << cells[i] << std::string(width - cells[i].size(), ' ') << (i + 1 < cells.size() ? "  " : "\n");
    }
  }
  return out.str();
}

LeaderboardRow summarize(const std::vector<EpisodeResult>& episodes, const std::string& team,
                         const std::string& approach) {
  LeaderboardRow row;
  row.team = team;
  row.approach = approach;
  row.episodes = episodes.size();
  std::vector<metrics::WeightedScore> weighted;
  double steps = 0.0;
  for (const auto& e : episodes) {
    // A task without modifications carries no weight and cannot be averaged.
    if (e.weight > 0) weighted.push_back({e.report, e.weight});
    if (e.ran && !e.error) {
      ++row.completed;
      steps += static_cast<double>(e.report.episode_length);
    }
  }
  if (!weighted.empty()) {
    row.f1 = metrics::weighted_average(weighted);
    row.precision = metrics::weighted_precision(weighted);
    row.recall = metrics::weighted_recall(weighted);
  }
  if (row.completed > 0) row.episode_length = steps / static_cast<double>(row.completed);
  return row;
}

EvalResult run_evaluation(const std::vector<EvalTask>& tasks, const EvalRunConfig& config) {
  validate(config);
  const auto started = steady::now();
  const auto deadline = started + config.time_budget;

  std::vector<Job> jobs;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (std::size_t e = 0; e < config.episodes_per_task; ++e) jobs.push_back({t, e + 1});
  }
  // Execution order is seeded; the report order is fixed below.
  std::mt19937_64 rng(config.seed);
  std::shuffle(jobs.begin(), jobs.end(), rng);
  const auto per_episode = std::max<std::chrono::milliseconds>(
      std::chrono::seconds(1), config.time_budget / std::max<std::size_t>(1, jobs.size()));

  std::unique_ptr<EmbeddedRig> rig;
  Endpoint admin;
  Endpoint wire;
  std::vector<std::string> agent_ids;
  if (config.admin) {
    admin = *config.admin;
    wire = *config.wire;
    agent_ids.push_back(config.agent);
    agent_ids.insert(agent_ids.end(), config.extra_agent_ids.begin(), config.extra_agent_ids.end());
    agent_ids.resize(std::min(agent_ids.size(), config.parallel));
    json listed;
    try {
      listed = net::AdminClient(admin.host, admin.port).get("/agents");
    } catch (const std::exception& e) {
      throw AgentUnreachable(std::string("admin endpoint unreachable: ") + e.what());
    }
    for (const auto& id : agent_ids) {
      const bool present = std::any_of(listed.begin(), listed.end(), [&](const json& a) { return a.value("agentId", "") == id; });
      if (!present) throw AgentUnreachable("agent " + id + " is not connected to the server");
    }
  } else {
    rig = std::make_unique<EmbeddedRig>(config, std::min(config.parallel, std::max<std::size_t>(1, jobs.size())));
    admin = rig->admin();
    wire = rig->wire();
    agent_ids = rig->agent_ids();
    if (agent_ids.empty()) throw AgentUnreachable("no built-in agent could connect");
  }

  json task_list = json::array();
  for (const auto& t : tasks) task_list.push_back(session::to_json(t.task));
  if (!task_list.empty()) net::AdminClient(admin.host, admin.port).post("/tasks", task_list);

  metrics::ScoreOptions opts;
  if (config.no_shift) opts.shift_window = 0;

  std::vector<EpisodeResult> results(jobs.size());
  std::mutex mutex;
  std::size_t next = 0;
  auto slot_of = [&](const Job& j) { return j.task * config.episodes_per_task + (j.episode - 1); };

  auto worker = [&](std::size_t w) {
    for (;;) {
      Job job;
      {
        std::lock_guard lock(mutex);
        if (next == jobs.size()) return;
        job = jobs[next++];
      }
      const auto& t = tasks[job.task];
      EpisodeResult r;
      r.task_id = t.task.id;
      r.episode = job.episode;
      r.weight = diff(t.task.initial, t.task.target).size();
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - steady::now());
      if (left.count() <= 0) {
        r.budget_exceeded = true;
      } else {
        try {
          r = run_episode(t, job.episode, agent_ids[w], admin, wire, std::min(per_episode, left), opts,
                          "eval-architect-" + std::to_string(w + 1));
        } catch (const std::exception& e) {
          r.ran = true;
          r.report = {};
          r.error = e.what();
          r.budget_exceeded = steady::now() >= deadline;
        }
      }
      std::lock_guard lock(mutex);
      results[slot_of(job)] = std::move(r);
    }
  };

  std::vector<std::thread> threads;
  for (std::size_t w = 1; w < agent_ids.size(); ++w) threads.emplace_back(worker, w);
  worker(0);
  for (auto& th : threads) th.join();

  EvalResult out;
  out.episodes = std::move(results);
  out.row = summarize(out.episodes, config.team, config.agent);
  return out;
}

}  // namespace iglu::cli
