#include "iglu/tape.hpp"

#include <charconv>
#include <cmath>
#include <optional>
#include <sstream>

namespace iglu::tape {

namespace {

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

class LineParser {
 public:
  explicit LineParser(std::size_t line) : line_(line) {}

  [[noreturn]] void fail(const std::string& reason) const { throw ParseError(line_, reason); }

  double number(std::string_view tok) const {
    tok = trim(tok);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
      fail("non-numeric field '" + std::string(tok) + "'");
    }
    return v;
  }

  int integer(std::string_view tok) const {
    const double v = number(tok);
    if (v != std::floor(v) || std::abs(v) > 1e9) fail("expected an integer, got '" + std::string(trim(tok)) + "'");
    return static_cast<int>(v);
  }

  std::vector<double> tuple(std::string_view payload, std::size_t arity) const {
    payload = trim(payload);
    if (payload.size() < 2 || payload.front() != '(' || payload.back() != ')') {
      fail("expected a parenthesised tuple");
    }
    payload = payload.substr(1, payload.size() - 2);
    std::vector<double> values;
    std::size_t start = 0;
    while (true) {
      const auto comma = payload.find(',', start);
      values.push_back(number(payload.substr(start, comma == std::string_view::npos ? payload.npos : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (values.size() != arity) {
      fail("expected " + std::to_string(arity) + " values, got " + std::to_string(values.size()));
    }
    return values;
  }

 private:
  std::size_t line_;
};

std::optional<std::size_t> known_arity(std::string_view name) {
  if (move_dir_from_string(name) || name == kJumpAction) return 0;
  if (name == kPlaceAction) return 4;
  if (name == kBreakAction) return 3;
  return std::nullopt;
}

BlockId block_id(const LineParser& p, std::string_view tok, bool allow_air) {
  const int v = p.integer(tok);
  if (v < 0 || v > 0xffff || (!allow_air && v == 0)) p.fail("invalid block id " + std::to_string(v));
  return static_cast<BlockId>(v);
}

TapeEvent parse_line(std::string_view line, std::size_t line_no) {
  LineParser p(line_no);
  line = trim(line);
  const auto first_space = line.find_first_of(" \t");
  if (first_space == std::string_view::npos) p.fail("expected '<step> <kind> <payload>'");
  const auto step_tok = line.substr(0, first_space);
  std::uint64_t step = 0;
  auto [ptr, ec] = std::from_chars(step_tok.data(), step_tok.data() + step_tok.size(), step);
  if (ec != std::errc() || ptr != step_tok.data() + step_tok.size()) {
    p.fail("step must be a non-negative integer, got '" + std::string(step_tok) + "'");
  }
  std::string_view rest = trim(line.substr(first_space));
  const auto kind_end = rest.find_first_of(" \t");
  const std::string_view kind = rest.substr(0, kind_end);
  const std::string_view payload = kind_end == std::string_view::npos ? std::string_view{} : rest.substr(kind_end);

  TapeEvent ev;
  ev.step = step;
  if (kind == "set_look") {
    const auto v = p.tuple(payload, 2);
    ev.kind = SetLookEvent{v[0], v[1]};
  } else if (kind == "pos_change") {
    const auto v = p.tuple(payload, 3);
    ev.kind = PosChangeEvent{{v[0], v[1], v[2]}};
  } else if (kind == "block_change") {
    const auto v = p.tuple(payload, 5);
    for (double d : v) {
      if (d != std::floor(d)) p.fail("block_change fields must be integers");
    }
    BlockChangeEvent bc{{static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2])},
                        block_id(p, format_number(v[3]), true), block_id(p, format_number(v[4]), true)};
    if (bc.old_id == bc.new_id) p.fail("block_change must change the block id");
    ev.kind = bc;
  } else if (kind == "action") {
    const auto toks = split_ws(payload);
    if (toks.empty()) p.fail("action without a name");
    ActionEvent a{std::string(toks[0]), {}};
    for (std::size_t i = 1; i < toks.size(); ++i) a.args.push_back(p.number(toks[i]));
    if (auto arity = known_arity(a.name); arity && *arity != a.args.size()) {
      p.fail("action " + a.name + " takes " + std::to_string(*arity) + " arguments, got " +
             std::to_string(a.args.size()));
    }
    if (a.name == kPlaceAction) {
      block_id(p, format_number(a.args[0]), false);
      for (std::size_t i = 1; i < 4; ++i) p.integer(format_number(a.args[i]));
    } else if (a.name == kBreakAction) {
      for (double d : a.args) p.integer(format_number(d));
    }
    ev.kind = std::move(a);
  } else {
    p.fail("unknown event kind '" + std::string(kind) + "'");
  }
  return ev;
}

Coord coord_arg(const ActionEvent& a, std::size_t offset) {
  return to_build({static_cast<int>(a.args[offset]), static_cast<int>(a.args[offset + 1]),
                   static_cast<int>(a.args[offset + 2])});
}

Vec3 to_world_pos(const Vec3& p) { return {p.x, p.y + kWorldGroundY, p.z}; }
Vec3 to_build_pos(const Vec3& p) { return {p.x, p.y - kWorldGroundY, p.z}; }

}  // namespace

ParseError::ParseError(std::size_t line, const std::string& reason)
    : std::runtime_error("tape line " + std::to_string(line) + ": " + reason), line_(line), reason_(reason) {}

ReplayDivergence::ReplayDivergence(std::uint64_t step, const std::string& detail)
    : std::runtime_error("replay diverged at step " + std::to_string(step) + ": " + detail), step_(step) {}

Tape parse_tape(std::span<const std::string> lines) {
  Tape t;
  std::uint64_t last_step = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    if (line == "...") {
      t.elided = true;
      continue;
    }
    TapeEvent ev = parse_line(line, i + 1);
    if (!t.events.empty() && ev.step < last_step) {
      throw ParseError(i + 1, "step " + std::to_string(ev.step) + " decreases from " + std::to_string(last_step));
    }
    last_step = ev.step;
    t.events.push_back(std::move(ev));
  }
  return t;
}

Tape parse_tape_text(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    lines.emplace_back(text.substr(start, nl == std::string_view::npos ? text.npos : nl - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return parse_tape(lines);
}

std::string format_event(const TapeEvent& e) {
  std::string out = std::to_string(e.step) + " ";
  std::visit(
      [&out](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, SetLookEvent>) {
          out += "set_look (" + format_number(k.pitch) + ", " + format_number(k.yaw) + ")";
        } else if constexpr (std::is_same_v<T, PosChangeEvent>) {
          out += "pos_change (" + format_number(k.pos.x) + ", " + format_number(k.pos.y) + ", " +
                 format_number(k.pos.z) + ")";
        } else if constexpr (std::is_same_v<T, ActionEvent>) {
          out += "action " + k.name;
          for (double a : k.args) out += " " + format_number(a);
        } else {
          out += "block_change (" + std::to_string(k.at.x) + ", " + std::to_string(k.at.y) + ", " +
                 std::to_string(k.at.z) + ", " + std::to_string(k.old_id) + ", " + std::to_string(k.new_id) + ")";
        }
      },
      e.kind);
  return out;
}

std::vector<std::string> serialize_tape(const Tape& t) {
  std::vector<std::string> lines;
  lines.reserve(t.events.size());
  for (const auto& e : t.events) lines.push_back(format_event(e));
  return lines;
}

std::optional<BuildAction> to_build_action(const ActionEvent& a) {
  if (auto dir = move_dir_from_string(a.name); dir && a.args.empty()) return Move{*dir};
  if (a.name == kJumpAction && a.args.empty()) return Jump{};
  if (a.name == kPlaceAction && a.args.size() == 4) {
    return PlaceBlock{coord_arg(a, 1), static_cast<BlockId>(a.args[0])};
  }
  if (a.name == kBreakAction && a.args.size() == 3) return BreakBlock{coord_arg(a, 0)};
  return std::nullopt;
}

ActionEvent to_action_event(const BuildAction& action) {
  return std::visit(
      [](const auto& a) -> ActionEvent {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, Move>) {
          return {std::string(to_string(a.dir)), {}};
        } else if constexpr (std::is_same_v<T, Jump>) {
          return {std::string(kJumpAction), {}};
        } else if constexpr (std::is_same_v<T, PlaceBlock>) {
          const Coord w = to_world(a.at);
          return {std::string(kPlaceAction), {double(a.id), double(w.x), double(w.y), double(w.z)}};
        } else if constexpr (std::is_same_v<T, BreakBlock>) {
          const Coord w = to_world(a.at);
          return {std::string(kBreakAction), {double(w.x), double(w.y), double(w.z)}};
        } else {
          throw std::invalid_argument("set_look is recorded as its own tape event");
        }
      },
      action);
}

ReplayResult replay_detailed(const Tape& t, const WorldState& initial, const ReplayOptions& options) {
  struct PendingBlock {
    std::uint64_t step;
    std::optional<BlockChangeEvent> change;
  };
  struct PendingMove {
    std::uint64_t step;
    Vec3 simulated;
  };

  ReplayResult result{initial, {}};
  WorldState& state = result.state;
  std::optional<PendingBlock> pending_block;
  std::optional<PendingMove> pending_move;

  for (const auto& ev : t.events) {
    if (const auto* a = std::get_if<ActionEvent>(&ev.kind)) {
      if (pending_block && pending_block->change) {
        throw ReplayDivergence(pending_block->step, "block action has no recorded block_change");
      }
      pending_block.reset();
      pending_move.reset();
      const auto action = to_build_action(*a);
      if (!action) {
        result.warnings.push_back("step " + std::to_string(ev.step) + ": unknown action '" + a->name +
                                  "' replayed as a no-op");
        continue;
      }
      const bool is_block_action =
          std::holds_alternative<PlaceBlock>(*action) || std::holds_alternative<BreakBlock>(*action);
      if (is_block_action) {
        PendingBlock pb{ev.step, std::nullopt};
        try {
          WorldState next = apply_action(state, *action);
          if (const auto* place = std::get_if<PlaceBlock>(&*action)) {
            pb.change = BlockChangeEvent{to_world(place->at), kAir, place->id};
          } else {
            const auto& brk = std::get<BreakBlock>(*action);
            pb.change = BlockChangeEvent{to_world(brk.at), *state.grid.at(brk.at), kAir};
          }
          state = std::move(next);
        } catch (const VoxelError& err) {
          result.warnings.push_back("step " + std::to_string(ev.step) + ": " + err.what());
        }
        pending_block = pb;
      } else {
        state = apply_action(state, *action);
        pending_move = PendingMove{ev.step, state.avatar.pos};
      }
    } else if (const auto* bc = std::get_if<BlockChangeEvent>(&ev.kind)) {
      if (pending_block) {
        if (!pending_block->change || *pending_block->change != *bc) {
          throw ReplayDivergence(pending_block->step,
                                 "simulated block effect disagrees with recorded block_change at step " +
                                     std::to_string(ev.step));
        }
        pending_block.reset();
      }
      const Coord c = to_build(bc->at);
      if (!in_bounds(c)) {
        throw ReplayDivergence(ev.step, "block_change outside the build region at " + to_string(bc->at));
      }
      if (bc->new_id == kAir) {
        state.grid.erase(c);
      } else {
        state.grid.set(c, bc->new_id);
      }
    } else if (const auto* pc = std::get_if<PosChangeEvent>(&ev.kind)) {
      const Vec3 recorded = to_build_pos(pc->pos);
      if (options.strict_positions && pending_move &&
          distance(pending_move->simulated, recorded) > options.position_tolerance) {
        throw ReplayDivergence(pending_move->step, "simulated position disagrees with recorded pos_change");
      }
      pending_move.reset();
      state.avatar.pos = recorded;
    } else if (const auto* sl = std::get_if<SetLookEvent>(&ev.kind)) {
      state.avatar.pitch = sl->pitch;
      state.avatar.yaw = sl->yaw;
    }
  }
  return result;
}

WorldState replay(const Tape& t, const WorldState& initial, const ReplayOptions& options) {
  return replay_detailed(t, initial, options).state;
}

Tape record_tape(const WorldState& initial, std::span<const BuildAction> actions, std::uint64_t first_step) {
  Tape t;
  WorldState state = initial;
  std::uint64_t step = first_step;
  for (const auto& action : actions) {
    if (std::holds_alternative<SetLook>(action)) {
      state = apply_action(state, action);
      t.events.push_back({step++, SetLookEvent{state.avatar.pitch, state.avatar.yaw}});
      continue;
    }
    WorldState next = apply_action(state, action);
    t.events.push_back({step++, to_action_event(action)});
    for (const auto& [c, e] : diff(state.grid, next.grid)) {
      const BlockId old_id = state.grid.at(c).value_or(kAir);
      const BlockId new_id = e.tag == DeltaTag::Add ? e.id : kAir;
      t.events.push_back({step++, BlockChangeEvent{to_world(c), old_id, new_id}});
    }
    if (!(next.avatar.pos == state.avatar.pos)) {
      t.events.push_back({step++, PosChangeEvent{to_world_pos(next.avatar.pos)}});
    }
    state = std::move(next);
  }
  return t;
}

}  // namespace iglu::tape
