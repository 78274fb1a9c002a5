#pragma once

// Evaluation math: grid F1 with a best-intersection shift search, weighted
// task averaging, macro-F1 for when-to-ask classification, MRR for
// clarifying-question ranking, and human-evaluation win/loss tallies.

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iglu/voxel.hpp"

namespace iglu::metrics {

enum class MetricsErrc { EmptyInput, RelevantMissing };

class MetricsError : public std::invalid_argument {
 public:
  MetricsError(MetricsErrc code, const std::string& detail, std::size_t index = 0);
  MetricsErrc code() const noexcept { return code_; }
  /// Offending pool for RelevantMissing.
  std::size_t index() const noexcept { return index_; }

 private:
  MetricsErrc code_;
  std::size_t index_;
};

struct Shift {
  int dx = 0;
  int dz = 0;
  friend bool operator==(const Shift&, const Shift&) = default;
};

struct Intersection {
  Shift shift;
  std::size_t count = 0;
};

inline constexpr int kDefaultShiftWindow = 10;

struct ScoreOptions {
  /// Horizontal shifts searched are [-window, window]^2; 0 disables the search.
  int shift_window = kDefaultShiftWindow;
};

/// Shift (dx, 0, dz) of m that matches the most entries of t in position, tag
/// and block id. Ties go to the smallest |dx| + |dz|, then lexicographic
/// (dx, dz).
Intersection argmax_intersection(const GridDelta& m, const GridDelta& t, int window = kDefaultShiftWindow);

struct ScoreReport {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t intersection = 0;
  Shift best_shift;
  std::size_t modifications = 0;
  std::size_t target_size = 0;
  std::uint64_t episode_length = 0;
};

/// Precision is I/|T|, recall I/|M|. Empty M or T scores 0.
ScoreReport score_delta(const GridDelta& m, const GridDelta& t, const ScoreOptions& options = {});

/// Scores the builder's modifications diff(g0, g) against the target diff t.
ScoreReport grid_f1(const BlockGrid& g, const BlockGrid& g0, const GridDelta& t, const ScoreOptions& options = {});

nlohmann::json to_json(const ScoreReport& r);

struct WeightedScore {
  ScoreReport report;
  /// |T| of the episode's task.
  std::size_t weight = 0;
};

/// sum(f1_i * |T_i|) / sum(|T_i|). Throws MetricsError(EmptyInput) on an
/// empty list and std::invalid_argument on a zero weight.
double weighted_average(std::span<const WeightedScore> reports);

/// Same reduction for precision and recall.
double weighted_precision(std::span<const WeightedScore> reports);
double weighted_recall(std::span<const WeightedScore> reports);

enum class Clarity { Clear, Ambiguous };

struct BinaryOutcome {
  Clarity predicted = Clarity::Clear;
  Clarity actual = Clarity::Clear;
};

/// Unweighted mean of the per-class F1 over {clear, ambiguous}.
double macro_f1(std::span<const BinaryOutcome> outcomes);

struct RankedPool {
  std::vector<std::string> candidates;
  std::string relevant;
};

/// Mean of 1/rank of the relevant question, ranks starting at 1.
double mrr(std::span<const RankedPool> pools);

struct GameOutcome {
  std::string hit_id;
  std::string agent_a;
  std::string agent_b;
  std::string task_id;
  std::string winner;
};

nlohmann::json to_json(const GameOutcome& o);
GameOutcome game_outcome_from_json(const nlohmann::json& j);

struct HeadToHead {
  std::size_t games = 0;
  std::size_t wins = 0;
  std::size_t losses = 0;
};

struct AgentTally {
  std::string agent;
  std::size_t games = 0;
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::map<std::string, HeadToHead> opponents;
};

/// One row per agent, sorted by agent id.
std::vector<AgentTally> tally_human_eval(std::span<const GameOutcome> outcomes);

/// "56.67%": exact ratio rounded half-to-even at two decimals.
std::string format_percent(std::size_t part, std::size_t whole);

/// Aligned text table with columns Agent, Total Games, Total Wins, Total
/// Losses, Wins Against, Losses Against.
std::string render_tally_table(const std::vector<AgentTally>& rows);
nlohmann::json to_json(const std::vector<AgentTally>& rows);

}  // namespace iglu::metrics
