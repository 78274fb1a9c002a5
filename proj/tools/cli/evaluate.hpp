#pragma once

// Offline evaluation harness. Drives a builder agent over a task set through
// the admin API and the wire protocol with a scripted architect, then scores
// every episode from its persisted log.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iglu/metrics.hpp"
#include "iglu/session.hpp"

namespace iglu::cli {

struct EvalTask {
  session::Task task;
  /// Architect script; generated from the task when the file gives none.
  std::vector<std::string> instructions;
};

/// Task file entries may carry an "instructions" array next to id, initial
/// and target.
std::vector<EvalTask> load_eval_tasks(const std::filesystem::path& path);

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};

/// "host:port" or ":port".
Endpoint parse_endpoint(const std::string& text);

struct EvalRunConfig {
  std::filesystem::path task_set_path;
  std::size_t episodes_per_task = 2;
  std::chrono::milliseconds time_budget = std::chrono::minutes(60);
  /// Built-in agent ("grammar" or "noop") for the embedded server, or the
  /// id of an agent already connected to an external server.
  std::string agent = "grammar";
  /// External server; both must be set together.
  std::optional<Endpoint> admin;
  std::optional<Endpoint> wire;
  /// Extra agent ids of the same approach, to run episodes concurrently on
  /// an external server.
  std::vector<std::string> extra_agent_ids;
  std::uint64_t seed = 0;
  std::size_t parallel = 1;
  bool no_shift = false;
  std::string team = "-";
  std::size_t step_budget = 250;
};

/// Throws std::invalid_argument on a config the harness cannot run.
void validate(const EvalRunConfig& c);

class AgentUnreachable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpisodeResult {
  std::string task_id;
  std::size_t episode = 0;
  bool ran = false;
  /// Skipped or cut short by the time budget.
  bool budget_exceeded = false;
  metrics::ScoreReport report;
  /// |T| of the task.
  std::size_t weight = 0;
  std::string completion_code;
  std::vector<std::string> questions;
  std::optional<std::string> error;
};

nlohmann::json to_json(const EpisodeResult& e);

struct LeaderboardRow {
  std::string team;
  std::string approach;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  /// Mean builder steps over the episodes that ran.
  double episode_length = 0.0;
  std::size_t submissions = 1;
  std::size_t episodes = 0;
  std::size_t completed = 0;
};

nlohmann::json to_json(const LeaderboardRow& r);
/// Columns Team, Approach, F1, Precision, Recall, Ep. Length, # of Submissions.
std::string render_leaderboard(const LeaderboardRow& r);

struct EvalResult {
  /// Ordered by task, then episode, whatever order they ran in.
  std::vector<EpisodeResult> episodes;
  LeaderboardRow row;
};

/// Unrun episodes score 0 with weight |T|. Throws AgentUnreachable.
EvalResult run_evaluation(const std::vector<EvalTask>& tasks, const EvalRunConfig& config);

/// Weighted reduction of episode scores into a leaderboard row.
LeaderboardRow summarize(const std::vector<EpisodeResult>& episodes, const std::string& team,
                         const std::string& approach);

}  // namespace iglu::cli
