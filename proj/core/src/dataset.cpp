#include "iglu/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "iglu/grid_io.hpp"

namespace iglu::dataset {

namespace {

using nlohmann::json;

[[noreturn]] void schema_fail(const std::string& field, const std::string& reason) {
  throw SchemaError({0, field, reason});
}

std::int64_t required_int(const json& j, const char* field) {
  if (!j.contains(field)) schema_fail(field, "missing");
  const auto& v = j.at(field);
  if (!v.is_number_integer()) schema_fail(field, "must be an integer");
  const auto value = v.get<std::int64_t>();
  if (value < 0) schema_fail(field, "must be non-negative");
  return value;
}

std::optional<std::string> optional_string(const json& j, const char* field) {
  if (!j.contains(field) || j.at(field).is_null()) return std::nullopt;
  if (!j.at(field).is_string()) schema_fail(field, "must be a string");
  return j.at(field).get<std::string>();
}

std::optional<double> optional_number(const json& j, const char* field) {
  if (!j.contains(field) || j.at(field).is_null()) return std::nullopt;
  if (!j.at(field).is_number()) schema_fail(field, "must be a number");
  return j.at(field).get<double>();
}

std::string trim_copy(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<json> split_entries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  if (trim_copy(text).empty()) return {};
  try {
    json doc = json::parse(strip_trailing_commas(text));
    if (doc.is_array()) return std::vector<json>(doc.begin(), doc.end());
    return {std::move(doc)};
  } catch (const json::parse_error&) {
    // Fall through to newline-delimited records.
  }
  std::vector<json> entries;
  std::istringstream lines(text);
  std::string line;
  std::size_t index = 0;
  while (std::getline(lines, line)) {
    if (trim_copy(line).empty()) continue;
    try {
      entries.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw SchemaError({index, "", std::string("invalid JSON: ") + e.what()});
    }
    ++index;
  }
  return entries;
}

double mean(const std::vector<std::size_t>& v) {
  if (v.empty()) return 0.0;
  double sum = 0.0;
  for (auto x : v) sum += static_cast<double>(x);
  return sum / static_cast<double>(v.size());
}

void count_split(SplitCounts& counts, const std::optional<std::string>& split) {
  if (!split) return;
  if (*split == "train") ++counts.train;
  if (*split == "test") ++counts.test;
}

json split_json(const SplitCounts& s) { return {{"train", s.train}, {"test", s.test}}; }

std::string fixed2(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << v;
  return out.str();
}

}  // namespace

std::string_view to_string(Perspective p) {
  switch (p) {
    case Perspective::North: return "north";
    case Perspective::South: return "south";
    case Perspective::East: return "east";
    case Perspective::West: return "west";
    case Perspective::Top: return "top";
  }
  return "north";
}

std::optional<Perspective> perspective_from_string(std::string_view s) {
  for (auto p : {Perspective::North, Perspective::South, Perspective::East, Perspective::West, Perspective::Top}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

SchemaError::SchemaError(SchemaIssue issue)
    : std::runtime_error("SchemaError: record " + std::to_string(issue.index) +
                         (issue.field.empty() ? "" : " field '" + issue.field + "'") + ": " + issue.reason),
      issue_(std::move(issue)) {}

ArchitectRecord parse_architect(const json& j) {
  if (!j.is_object()) schema_fail("", "record must be an object");
  ArchitectRecord r;
  r.game_id = required_int(j, "gameId");
  r.step_id = required_int(j, "stepId");
  if (j.contains("avatarInfo")) {
    const auto& info = j.at("avatarInfo");
    if (!info.is_object()) schema_fail("avatarInfo", "must be an object");
    if (info.contains("perspective")) {
      if (!info.at("perspective").is_string()) schema_fail("avatarInfo.perspective", "must be a string");
      r.perspective = perspective_from_string(lower(info.at("perspective").get<std::string>()));
      if (!r.perspective) schema_fail("avatarInfo.perspective", "unknown perspective");
    }
  }
  if (!j.contains("command")) schema_fail("command", "missing");
  if (!j.at("command").is_string()) schema_fail("command", "must be a string");
  r.command = j.at("command").get<std::string>();
  r.annotator_id = optional_string(j, "annotatorId");
  r.split = optional_string(j, "split");
  r.structure_id = optional_string(j, "structureId");
  r.timestamp = optional_number(j, "timestamp");
  return r;
}

BuilderRecord parse_builder(const json& j) {
  if (!j.is_object()) schema_fail("", "record must be an object");
  BuilderRecord r;
  r.game_id = required_int(j, "gameId");
  r.step_id = required_int(j, "stepId");
  if (j.contains("avatarInfo")) {
    const auto& info = j.at("avatarInfo");
    if (!info.is_object()) schema_fail("avatarInfo", "must be an object");
    if (info.contains("pos")) {
      const auto& pos = info.at("pos");
      if (!pos.is_array() || pos.size() != 3 || !pos[0].is_number() || !pos[1].is_number() || !pos[2].is_number()) {
        schema_fail("avatarInfo.pos", "must be [x, y, z]");
      }
      r.avatar.pos = {pos[0].get<double>(), pos[1].get<double>() - kWorldGroundY, pos[2].get<double>()};
    }
    if (info.contains("look")) {
      const auto& look = info.at("look");
      if (!look.is_array() || look.size() != 2 || !look[0].is_number() || !look[1].is_number()) {
        schema_fail("avatarInfo.look", "must be [pitch, yaw]");
      }
      r.avatar.pitch = look[0].get<double>();
      r.avatar.yaw = look[1].get<double>();
    }
  }
  if (!j.contains("worldEndingState")) schema_fail("worldEndingState", "missing");
  try {
    r.world_ending_state = grid_from_json(j.at("worldEndingState"));
  } catch (const std::exception& e) {
    schema_fail("worldEndingState", e.what());
  }
  if (!j.contains("tape")) schema_fail("tape", "missing");
  const auto& tape_json = j.at("tape");
  try {
    if (tape_json.is_string()) {
      r.tape = tape::parse_tape_text(tape_json.get<std::string>());
    } else if (tape_json.is_array()) {
      std::vector<std::string> lines;
      for (const auto& line : tape_json) {
        if (!line.is_string()) schema_fail("tape", "entries must be strings");
        lines.push_back(line.get<std::string>());
      }
      r.tape = tape::parse_tape(lines);
    } else {
      schema_fail("tape", "must be a string or an array of strings");
    }
  } catch (const tape::ParseError& e) {
    schema_fail("tape", e.what());
  }
  if (auto q = optional_string(j, "clarification_question")) {
    const auto t = trim_copy(*q);
    if (!t.empty() && t != "null") r.clarification_question = t;
  }
  if (j.contains("ambiguous") && !j.at("ambiguous").is_null()) {
    if (!j.at("ambiguous").is_boolean()) schema_fail("ambiguous", "must be a boolean");
    r.ambiguous = j.at("ambiguous").get<bool>();
  }
  r.annotator_id = optional_string(j, "annotatorId");
  r.timestamp = optional_number(j, "timestamp");
  return r;
}

json to_json(const ArchitectRecord& r) {
  json j{{"gameId", r.game_id}, {"stepId", r.step_id}, {"command", r.command}};
  j["avatarInfo"] = json::object();
  if (r.perspective) j["avatarInfo"]["perspective"] = std::string(to_string(*r.perspective));
  if (r.annotator_id) j["annotatorId"] = *r.annotator_id;
  if (r.split) j["split"] = *r.split;
  if (r.structure_id) j["structureId"] = *r.structure_id;
  if (r.timestamp) j["timestamp"] = *r.timestamp;
  return j;
}

json to_json(const BuilderRecord& r) {
  json j{{"gameId", r.game_id}, {"stepId", r.step_id}};
  j["avatarInfo"] = {{"pos", {r.avatar.pos.x, r.avatar.pos.y + kWorldGroundY, r.avatar.pos.z}},
                     {"look", {r.avatar.pitch, r.avatar.yaw}}};
  j["worldEndingState"] = {{"blocks", grid_to_json(r.world_ending_state)}};
  j["tape"] = tape::serialize_tape(r.tape);
  j["clarification_question"] = r.clarification_question ? json(*r.clarification_question) : json(nullptr);
  if (r.ambiguous) j["ambiguous"] = *r.ambiguous;
  if (r.annotator_id) j["annotatorId"] = *r.annotator_id;
  if (r.timestamp) j["timestamp"] = *r.timestamp;
  return j;
}

VerifyResult verify_builder_record_detailed(const BuilderRecord& r, const WorldState& start) {
  auto replayed = tape::replay_detailed(r.tape, start);
  VerifyResult out;
  out.replayed = std::move(replayed.state.grid);
  out.mismatch = diff(r.world_ending_state, out.replayed);
  out.consistent = out.mismatch.empty();
  out.warnings = std::move(replayed.warnings);
  return out;
}

bool verify_builder_record(const BuilderRecord& r, const WorldState& start) {
  return verify_builder_record_detailed(r, start).consistent;
}

bool verify_builder_record(const BuilderRecord& r) { return verify_builder_record(r, spawn_state({})); }

WorldState starting_state(const Corpus& corpus, const BuilderRecord& r) {
  const BuilderRecord* previous = nullptr;
  for (const auto& b : corpus.builder) {
    if (b.game_id != r.game_id || b.step_id >= r.step_id) continue;
    if (previous == nullptr || b.step_id > previous->step_id) previous = &b;
  }
  return spawn_state(previous ? previous->world_ending_state : BlockGrid{});
}

ScanResult scan_records(const std::filesystem::path& path, std::optional<Role> role) {
  ScanResult result;
  std::vector<json> entries;
  try {
    entries = split_entries(path);
  } catch (const SchemaError& e) {
    result.issues.push_back(e.issue());
    return result;
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    try {
      Role r = Role::Architect;
      if (role) {
        r = *role;
      } else if (e.is_object() && e.contains("command")) {
        r = Role::Architect;
      } else if (e.is_object() && (e.contains("worldEndingState") || e.contains("tape"))) {
        r = Role::Builder;
      } else {
        schema_fail("", "cannot tell architect from builder record");
      }
      if (r == Role::Architect) {
        result.corpus.architect.push_back(parse_architect(e));
      } else {
        result.corpus.builder.push_back(parse_builder(e));
      }
    } catch (const SchemaError& err) {
      SchemaIssue issue = err.issue();
      issue.index = i;
      result.issues.push_back(std::move(issue));
    }
  }
  return result;
}

Corpus load_records(const std::filesystem::path& path, std::optional<Role> role) {
  auto scanned = scan_records(path, role);
  if (!scanned.issues.empty()) throw SchemaError(scanned.issues.front());
  return std::move(scanned.corpus);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) {
    std::size_t b = 0;
    std::size_t e = tok.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(tok[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(tok[e - 1]))) --e;
    if (e > b) tokens.push_back(tok.substr(b, e - b));
  }
  return tokens;
}

std::size_t word_count(std::string_view text) { return tokenize(text).size(); }

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::ShortInstruction: return "ShortInstruction";
    case RejectReason::RepeatedInstructions: return "RepeatedInstructions";
    case RejectReason::MissingQuestion: return "MissingQuestion";
  }
  return "Unknown";
}

std::map<std::pair<std::int64_t, std::int64_t>, const BuilderRecord*> pair_instructions(const Corpus& corpus) {
  std::map<std::int64_t, std::map<std::int64_t, const BuilderRecord*>> builders;
  for (const auto& b : corpus.builder) {
    auto& slot = builders[b.game_id][b.step_id];
    // Duplicate steps: prefer the record that flags ambiguity so pairing is order-independent.
    if (!slot || (!slot->is_ambiguous() && b.is_ambiguous())) slot = &b;
  }
  std::map<std::pair<std::int64_t, std::int64_t>, const BuilderRecord*> pairs;
  for (const auto& a : corpus.architect) {
    auto game = builders.find(a.game_id);
    if (game == builders.end()) continue;
    auto next = game->second.upper_bound(a.step_id);
    if (next != game->second.end()) pairs[{a.game_id, a.step_id}] = next->second;
  }
  return pairs;
}

CleanResult clean(const Corpus& corpus, const CleanConfig& config) {
  // Annotators who repeat one instruction too often.
  std::map<std::string, std::map<std::string, std::size_t>> repeats;
  for (const auto& a : corpus.architect) {
    if (a.annotator_id) ++repeats[*a.annotator_id][trim_copy(a.command)];
  }
  std::set<std::string> low_quality;
  for (const auto& [annotator, counts] : repeats) {
    for (const auto& [_, n] : counts) {
      if (n >= config.repetition_threshold) low_quality.insert(annotator);
    }
  }

  // Instructions whose executor marked them unclear without asking.
  std::set<std::pair<std::int64_t, std::int64_t>> missing_question_instr;
  for (const auto& [key, b] : pair_instructions(corpus)) {
    if (b->is_ambiguous() && !b->clarification_question) missing_question_instr.insert(key);
  }

  CleanResult result;
  for (const auto& a : corpus.architect) {
    std::optional<RejectReason> reason;
    if (a.annotator_id && low_quality.count(*a.annotator_id)) {
      reason = RejectReason::RepeatedInstructions;
    } else if (word_count(a.command) < config.min_words) {
      reason = RejectReason::ShortInstruction;
    } else if (missing_question_instr.count({a.game_id, a.step_id})) {
      reason = RejectReason::MissingQuestion;
    }
    if (reason) {
      result.rejected.push_back({Role::Architect, a.game_id, a.step_id, *reason});
    } else {
      result.kept.architect.push_back(a);
    }
  }
  for (const auto& b : corpus.builder) {
    std::optional<RejectReason> reason;
    if (b.annotator_id && low_quality.count(*b.annotator_id)) {
      reason = RejectReason::RepeatedInstructions;
    } else if (b.is_ambiguous() && !b.clarification_question) {
      reason = RejectReason::MissingQuestion;
    }
    if (reason) {
      result.rejected.push_back({Role::Builder, b.game_id, b.step_id, *reason});
    } else {
      result.kept.builder.push_back(b);
    }
  }
  return result;
}

std::map<std::int64_t, double> game_durations(const Corpus& corpus) {
  std::map<std::int64_t, std::pair<double, double>> span;
  auto note = [&span](std::int64_t game, const std::optional<double>& ts) {
    if (!ts) return;
    auto [it, inserted] = span.try_emplace(game, *ts, *ts);
    if (!inserted) {
      it->second.first = std::min(it->second.first, *ts);
      it->second.second = std::max(it->second.second, *ts);
    }
  };
  for (const auto& a : corpus.architect) note(a.game_id, a.timestamp);
  for (const auto& b : corpus.builder) note(b.game_id, b.timestamp);
  std::map<std::int64_t, double> out;
  for (const auto& [game, s] : span) out[game] = (s.second - s.first) / 60.0;
  return out;
}

DatasetStats compute_stats(const Corpus& corpus) { return compute_stats(corpus, game_durations(corpus)); }

DatasetStats compute_stats(const Corpus& corpus, const std::map<std::int64_t, double>& durations_minutes) {
  DatasetStats s;
  std::set<std::string> structures;
  std::set<std::int64_t> games;
  std::vector<std::size_t> instruction_words;
  std::vector<std::size_t> question_words;

  const auto pairs = pair_instructions(corpus);
  for (const auto& a : corpus.architect) {
    games.insert(a.game_id);
    if (a.structure_id) structures.insert(*a.structure_id);
    instruction_words.push_back(word_count(a.command));
    ++s.instruction_count;
    count_split(s.total_split, a.split);
    auto it = pairs.find({a.game_id, a.step_id});
    const bool ambiguous = it != pairs.end() && it->second->is_ambiguous();
    if (ambiguous) {
      ++s.ambiguous_count;
      count_split(s.ambiguous_split, a.split);
    } else {
      ++s.clear_count;
      count_split(s.clear_split, a.split);
    }
  }
  for (const auto& b : corpus.builder) {
    games.insert(b.game_id);
    if (b.clarification_question) {
      ++s.clarifying_question_count;
      question_words.push_back(word_count(*b.clarification_question));
    }
  }

  s.target_structures = structures.size();
  s.completed_games = games.size();
  s.avg_instruction_words = mean(instruction_words);
  s.avg_question_words = mean(question_words);
  if (!games.empty()) {
    const auto g = static_cast<double>(games.size());
    s.avg_turns_per_game = static_cast<double>(corpus.architect.size() + corpus.builder.size()) / g;
    s.avg_questions_per_game = static_cast<double>(s.clarifying_question_count) / g;
  }
  std::vector<double> durations;
  for (const auto& [_, d] : durations_minutes) durations.push_back(d);
  if (!durations.empty()) {
    std::sort(durations.begin(), durations.end());
    const auto n = durations.size();
    s.median_game_duration_minutes = n % 2 ? durations[n / 2] : (durations[n / 2 - 1] + durations[n / 2]) / 2.0;
  }
  return s;
}

json to_json(const DatasetStats& s) {
  return {{"targetStructures", s.target_structures},
          {"completedGames", s.completed_games},
          {"medianGameDurationMinutes", s.median_game_duration_minutes},
          {"avgTurnsPerGame", s.avg_turns_per_game},
          {"instructionCount", s.instruction_count},
          {"avgInstructionWords", s.avg_instruction_words},
          {"clarifyingQuestionCount", s.clarifying_question_count},
          {"avgQuestionWords", s.avg_question_words},
          {"avgQuestionsPerGame", s.avg_questions_per_game},
          {"clearCount", s.clear_count},
          {"ambiguousCount", s.ambiguous_count},
          {"split",
           {{"total", split_json(s.total_split)},
            {"clear", split_json(s.clear_split)},
            {"ambiguous", split_json(s.ambiguous_split)}}}};
}

std::string render_stats_table(const DatasetStats& s) {
  std::ostringstream out;
  auto row = [&out](const std::string& label, const std::string& value) {
    out << std::left << std::setw(36) << label << value << '\n';
  };
  out << "Overview\n";
  row("Target Structures", std::to_string(s.target_structures));
  row("Completed Games", std::to_string(s.completed_games));
  row("Median Dur of Completed Games", fixed2(s.median_game_duration_minutes) + " mins");
  row("Avg. Turns of Completed Games", fixed2(s.avg_turns_per_game));
  row("No. Instructions", std::to_string(s.instruction_count));
  row("Avg. Len of Instructions", fixed2(s.avg_instruction_words) + " words");
  row("No. Clarifying Questions", std::to_string(s.clarifying_question_count));
  row("Avg. Clarifying Questions per Game", fixed2(s.avg_questions_per_game));
  out << '\n';
  auto split = [](std::size_t n, const SplitCounts& c) {
    return std::to_string(n) + " (" + std::to_string(c.train) + "/" + std::to_string(c.test) + ")";
  };
  auto pair_row = [&out](const std::string& a, const std::string& b, const std::string& c, const std::string& d) {
    out << std::left << std::setw(12) << a << std::setw(24) << b << std::setw(24) << c << d << '\n';
  };
  out << std::left << std::setw(36) << "Instructions (train/test)" << "Avg. Length (in words)" << '\n';
  pair_row("Total", split(s.instruction_count, s.total_split), "Instructions", fixed2(s.avg_instruction_words));
  pair_row("Clear", split(s.clear_count, s.clear_split), "Clarifying Questions", fixed2(s.avg_question_words));
  out << std::left << std::setw(12) << "Ambiguous" << split(s.ambiguous_count, s.ambiguous_split) << '\n';
  return out.str();
}

std::string_view to_string(CQCategory c) {
  switch (c) {
    case CQCategory::Color: return "Color";
    case CQCategory::NumberOfBlocks: return "NumberOfBlocks";
    case CQCategory::DirectionOrientation: return "DirectionOrientation";
    case CQCategory::IdentifyBlocks: return "IdentifyBlocks";
    case CQCategory::Other: return "Other";
  }
  return "Other";
}

QuestionCategorizer QuestionCategorizer::defaults() {
  return from_json({
      {"color", {"color", "colour", "colors", "colours", "colored", "coloured", "shade"}},
      {"number", {"how many", "how much", "number of", "count", "amount", "quantity"}},
      {"direction", {"where", "direction", "directions", "orientation", "oriented", "side", "facing",
                     "north", "south", "east", "west", "left", "right", "above", "below", "top", "bottom",
                     "front", "behind", "horizontally", "vertically", "diagonally", "position", "location"}},
      {"identify", {"which", "destroy", "destroyed", "remove", "removed", "replace", "replaced", "change",
                    "changed", "break", "broken"}},
  });
}

QuestionCategorizer QuestionCategorizer::from_json(const json& j) {
  static const std::vector<std::pair<const char*, CQCategory>> kOrder{
      {"color", CQCategory::Color},
      {"number", CQCategory::NumberOfBlocks},
      {"direction", CQCategory::DirectionOrientation},
      {"identify", CQCategory::IdentifyBlocks}};
  QuestionCategorizer c;
  for (const auto& [key, category] : kOrder) {
    std::vector<Phrase> phrases;
    if (j.contains(key)) {
      for (const auto& kw : j.at(key)) {
        Phrase p;
        for (auto& tok : tokenize(kw.get<std::string>())) p.push_back(lower(tok));
        if (!p.empty()) phrases.push_back(std::move(p));
      }
    }
    c.families_.emplace_back(category, std::move(phrases));
  }
  return c;
}

QuestionCategorizer QuestionCategorizer::load(const std::filesystem::path& path) {
  return from_json(read_json_file(path));
}

CQCategory QuestionCategorizer::categorize(std::string_view question) const {
  std::vector<std::string> tokens;
  for (auto& t : tokenize(question)) tokens.push_back(lower(t));
  for (const auto& [category, phrases] : families_) {
    for (const auto& p : phrases) {
      if (std::search(tokens.begin(), tokens.end(), p.begin(), p.end()) != tokens.end()) return category;
    }
  }
  return CQCategory::Other;
}

json QuestionCategorizer::to_json() const {
  json j = json::object();
  for (const auto& [category, phrases] : families_) {
    const char* key = category == CQCategory::Color            ? "color"
                      : category == CQCategory::NumberOfBlocks ? "number"
                      : category == CQCategory::DirectionOrientation ? "direction"
                                                                     : "identify";
    auto list = json::array();
    for (const auto& p : phrases) {
      std::string joined;
      for (const auto& w : p) joined += (joined.empty() ? "" : " ") + w;
      list.push_back(joined);
    }
    j[key] = list;
  }
  return j;
}

CQCategory categorize_question(std::string_view question) {
  static const QuestionCategorizer categorizer = QuestionCategorizer::defaults();
  return categorizer.categorize(question);
}

}  // namespace iglu::dataset
