#include "iglu/metrics.hpp"

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <tuple>

namespace iglu::metrics {

namespace {

double safe_ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

template <typename Field>
double weighted(std::span<const WeightedScore> reports, Field field) {
  if (reports.empty()) throw MetricsError(MetricsErrc::EmptyInput, "no episode reports to average");
  double num = 0.0;
  double den = 0.0;
  for (const auto& r : reports) {
    if (r.weight == 0) throw std::invalid_argument("episode weight |T| must be positive");
    num += field(r.report) * static_cast<double>(r.weight);
    den += static_cast<double>(r.weight);
  }
  return num / den;
}

double class_f1(std::span<const BinaryOutcome> outcomes, Clarity cls) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& o : outcomes) {
    const bool pred = o.predicted == cls;
    const bool act = o.actual == cls;
    if (pred && act) ++tp;
    else if (pred) ++fp;
    else if (act) ++fn;
  }
  return harmonic(safe_ratio(tp, tp + fp), safe_ratio(tp, tp + fn));
}

}  // namespace

MetricsError::MetricsError(MetricsErrc code, const std::string& detail, std::size_t index)
    : std::invalid_argument(detail), code_(code), index_(index) {}

Intersection argmax_intersection(const GridDelta& m, const GridDelta& t, int window) {
  window = std::max(window, 0);
  const int side = 2 * window + 1;
  std::vector<std::size_t> counts(static_cast<std::size_t>(side * side), 0);
  auto bump = [&](int dx, int dz) { ++counts[static_cast<std::size_t>((dx + window) * side + (dz + window))]; };
  if (static_cast<std::size_t>(side * side) < t.size()) {
    // Small window: probe t at every shifted position instead of pairing.
    const auto& te = t.entries();
    for (const auto& [mc, me] : m) {
      for (int dx = -window; dx <= window; ++dx) {
        for (int dz = -window; dz <= window; ++dz) {
          const auto hit = te.find({mc.x + dx, mc.y, mc.z + dz});
          if (hit != te.end() && hit->second == me) bump(dx, dz);
        }
      }
    }
  } else {
    for (const auto& [mc, me] : m) {
      for (const auto& [tc, te] : t) {
        if (mc.y != tc.y || me != te) continue;
        const int dx = tc.x - mc.x;
        const int dz = tc.z - mc.z;
        if (std::abs(dx) > window || std::abs(dz) > window) continue;
        bump(dx, dz);
      }
    }
  }
  Intersection best;
  auto rank = [](const Shift& s) { return std::tuple(std::abs(s.dx) + std::abs(s.dz), s.dx, s.dz); };
  for (int dx = -window; dx <= window; ++dx) {
    for (int dz = -window; dz <= window; ++dz) {
      const std::size_t c = counts[static_cast<std::size_t>((dx + window) * side + (dz + window))];
      const Shift s{dx, dz};
      if (c > best.count || (c == best.count && rank(s) < rank(best.shift))) best = {s, c};
    }
  }
  return best;
}

ScoreReport score_delta(const GridDelta& m, const GridDelta& t, const ScoreOptions& options) {
  ScoreReport r;
  r.modifications = m.size();
  r.target_size = t.size();
  const auto best = argmax_intersection(m, t, options.shift_window);
  r.best_shift = best.shift;
  r.intersection = best.count;
  r.precision = safe_ratio(best.count, t.size());
  r.recall = safe_ratio(best.count, m.size());
  r.f1 = harmonic(r.precision, r.recall);
  return r;
}

ScoreReport grid_f1(const BlockGrid& g, const BlockGrid& g0, const GridDelta& t, const ScoreOptions& options) {
  return score_delta(diff(g0, g), t, options);
}

nlohmann::json to_json(const ScoreReport& r) {
  return {{"f1", r.f1},
          {"precision", r.precision},
          {"recall", r.recall},
          {"intersection", r.intersection},
          {"bestShift", {r.best_shift.dx, r.best_shift.dz}},
          {"modifications", r.modifications},
          {"targetSize", r.target_size},
          {"episodeLength", r.episode_length}};
}

double weighted_average(std::span<const WeightedScore> reports) {
  return weighted(reports, [](const ScoreReport& r) { return r.f1; });
}

double weighted_precision(std::span<const WeightedScore> reports) {
  return weighted(reports, [](const ScoreReport& r) { return r.precision; });
}

double weighted_recall(std::span<const WeightedScore> reports) {
  return weighted(reports, [](const ScoreReport& r) { return r.recall; });
}

double macro_f1(std::span<const BinaryOutcome> outcomes) {
  if (outcomes.empty()) throw MetricsError(MetricsErrc::EmptyInput, "macro_f1 needs at least one outcome");
  return (class_f1(outcomes, Clarity::Clear) + class_f1(outcomes, Clarity::Ambiguous)) / 2.0;
}

double mrr(std::span<const RankedPool> pools) {
  if (pools.empty()) throw MetricsError(MetricsErrc::EmptyInput, "mrr needs at least one pool");
  // Sum of 1/rank kept as an exact fraction so the mean is rounded once;
  // falls back to floating point if the fraction outgrows 53 bits.
  std::uint64_t num = 0, den = 1;
  bool exact = true;
  double sum = 0.0;
  for (std::size_t i = 0; i < pools.size(); ++i) {
    const auto& c = pools[i].candidates;
    auto it = std::find(c.begin(), c.end(), pools[i].relevant);
    if (it == c.end()) {
      throw MetricsError(MetricsErrc::RelevantMissing, "pool " + std::to_string(i) + " lacks its relevant question",
                         i);
    }
    const auto rank = static_cast<std::uint64_t>(std::distance(c.begin(), it) + 1);
    sum += 1.0 / static_cast<double>(rank);
    if (exact) {
      // num/den + 1/rank = (num * rank + den) / (den * rank), then reduce.
      std::uint64_t a = 0, b = 0;
      exact = !__builtin_mul_overflow(num, rank, &a) && !__builtin_add_overflow(a, den, &a) &&
              !__builtin_mul_overflow(den, rank, &b);
      if (exact) {
        const auto g = std::gcd(a, b);
        num = a / g;
        den = b / g;
      }
    }
  }
  std::uint64_t total = 0;
  constexpr std::uint64_t kExactDouble = std::uint64_t{1} << 53;
  if (exact && !__builtin_mul_overflow(den, std::uint64_t{pools.size()}, &total) && total <= kExactDouble &&
      num <= kExactDouble) {
    return static_cast<double>(num) / static_cast<double>(total);
  }
  return sum / static_cast<double>(pools.size());
}

nlohmann::json to_json(const GameOutcome& o) {
  return {{"hitId", o.hit_id}, {"agentA", o.agent_a}, {"agentB", o.agent_b}, {"taskId", o.task_id},
          {"winner", o.winner}};
}

GameOutcome game_outcome_from_json(const nlohmann::json& j) {
  return {j.at("hitId").get<std::string>(), j.at("agentA").get<std::string>(), j.at("agentB").get<std::string>(),
          j.at("taskId").get<std::string>(), j.at("winner").get<std::string>()};
}

std::vector<AgentTally> tally_human_eval(std::span<const GameOutcome> outcomes) {
  std::map<std::string, AgentTally> by_agent;
  for (const auto& o : outcomes) {
    if (o.agent_a == o.agent_b) throw std::invalid_argument("outcome " + o.hit_id + " names the same agent twice");
    if (o.winner != o.agent_a && o.winner != o.agent_b) {
      throw std::invalid_argument("outcome " + o.hit_id + " winner is not one of its agents");
    }
    const std::string& loser = o.winner == o.agent_a ? o.agent_b : o.agent_a;
    auto& w = by_agent[o.winner];
    auto& l = by_agent[loser];
    w.agent = o.winner;
    l.agent = loser;
    ++w.games;
    ++w.wins;
    ++l.games;
    ++l.losses;
    auto& wh = w.opponents[loser];
    ++wh.games;
    ++wh.wins;
    auto& lh = l.opponents[o.winner];
    ++lh.games;
    ++lh.losses;
  }
  std::vector<AgentTally> rows;
  rows.reserve(by_agent.size());
  for (auto& [_, row] : by_agent) rows.push_back(std::move(row));
  return rows;
}

std::string format_percent(std::size_t part, std::size_t whole) {
  if (whole == 0) return "0.00%";
  const unsigned long long scaled = static_cast<unsigned long long>(part) * 10000ULL;
  unsigned long long q = scaled / whole;
  const unsigned long long rem = scaled % whole;
  if (2 * rem > whole || (2 * rem == whole && q % 2 == 1)) ++q;
  std::ostringstream out;
  out << q / 100 << '.' << std::setw(2) << std::setfill('0') << q % 100 << '%';
  return out.str();
}

std::string render_tally_table(const std::vector<AgentTally>& rows) {
  const std::vector<std::string> header{"Agent", "Total Games", "Total Wins", "Total Losses", "Wins Against",
                                        "Losses Against"};
  // Each agent spans one line per opponent.
  std::vector<std::vector<std::string>> lines;
  for (const auto& r : rows) {
    bool first = true;
    for (const auto& [opp, h] : r.opponents) {
      std::vector<std::string> cells(6);
      if (first) {
        cells[0] = r.agent;
        cells[1] = std::to_string(r.games);
        cells[2] = std::to_string(r.wins) + " (" + format_percent(r.wins, r.games) + ")";
        cells[3] = std::to_string(r.losses) + " (" + format_percent(r.losses, r.games) + ")";
      }
      cells[4] = opp + ": " + std::to_string(h.wins) + " (" + format_percent(h.wins, h.games) + ")";
      cells[5] = opp + ": " + std::to_string(h.losses) + " (" + format_percent(h.losses, h.games) + ")";
      lines.push_back(std::move(cells));
      first = false;
    }
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& l : lines) {
    for (std::size_t i = 0; i < l.size(); ++i) width[i] = std::max(width[i], l[i].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line += " | ";
      line += cells[i] + std::string(width[i] - cells[i].size(), ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  };
  emit(header);
  std::string rule;
  for (std::size_t i = 0; i < width.size(); ++i) rule += (i ? "-+-" : "") + std::string(width[i], '-');
  out << rule << '\n';
  for (const auto& l : lines) emit(l);
  return out.str();
}

nlohmann::json to_json(const std::vector<AgentTally>& rows) {
  auto out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json wins_against = nlohmann::json::object();
    nlohmann::json losses_against = nlohmann::json::object();
    for (const auto& [opp, h] : r.opponents) {
      wins_against[opp] = {{"count", h.wins}, {"percent", format_percent(h.wins, h.games)}};
      losses_against[opp] = {{"count", h.losses}, {"percent", format_percent(h.losses, h.games)}};
    }
    out.push_back({{"agent", r.agent},
                   {"totalGames", r.games},
                   {"totalWins", {{"count", r.wins}, {"percent", format_percent(r.wins, r.games)}}},
                   {"totalLosses", {{"count", r.losses}, {"percent", format_percent(r.losses, r.games)}}},
                   {"winsAgainst", wins_against},
                   {"lossesAgainst", losses_against}});
  }
  return out;
}

}  // namespace iglu::metrics
