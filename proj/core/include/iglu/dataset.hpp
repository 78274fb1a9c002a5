#pragma once

// Architect and builder record ingestion, cleaning, corpus statistics and
// clarifying-question categories.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "iglu/tape.hpp"
#include "iglu/voxel.hpp"

namespace iglu::dataset {

enum class Role { Architect, Builder };
enum class Perspective { North, South, East, West, Top };

std::string_view to_string(Perspective p);
std::optional<Perspective> perspective_from_string(std::string_view s);

struct ArchitectRecord {
  std::int64_t game_id = 0;
  std::int64_t step_id = 0;
  std::optional<Perspective> perspective;
  std::string command;

  // Optional fields outside the published schema.
  std::optional<std::string> annotator_id;
  std::optional<std::string> split;
  std::optional<std::string> structure_id;
  std::optional<double> timestamp;

  friend bool operator==(const ArchitectRecord&, const ArchitectRecord&) = default;
};

struct BuilderRecord {
  std::int64_t game_id = 0;
  std::int64_t step_id = 0;
  /// Build frame.
  Avatar avatar;
  /// Build frame; serialized in the world frame.
  BlockGrid world_ending_state;
  tape::Tape tape;
  std::optional<std::string> clarification_question;

  std::optional<bool> ambiguous;
  std::optional<std::string> annotator_id;
  std::optional<double> timestamp;

  /// Ambiguous when explicitly marked or when a question was asked.
  bool is_ambiguous() const { return ambiguous.value_or(clarification_question.has_value()); }

  friend bool operator==(const BuilderRecord&, const BuilderRecord&) = default;
};

struct Corpus {
  std::vector<ArchitectRecord> architect;
  std::vector<BuilderRecord> builder;

  bool empty() const { return architect.empty() && builder.empty(); }
  friend bool operator==(const Corpus&, const Corpus&) = default;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SchemaIssue {
  std::size_t index = 0;
  std::string field;
  std::string reason;
};

class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(SchemaIssue issue);
  const SchemaIssue& issue() const noexcept { return issue_; }

 private:
  SchemaIssue issue_;
};

/// Throw SchemaError with index 0; callers rethrow with the entry index.
ArchitectRecord parse_architect(const nlohmann::json& j);
BuilderRecord parse_builder(const nlohmann::json& j);

nlohmann::json to_json(const ArchitectRecord& r);
nlohmann::json to_json(const BuilderRecord& r);

struct VerifyResult {
  bool consistent = false;
  /// Grid produced by replaying the tape from the starting state.
  BlockGrid replayed;
  /// diff(recorded ending state, replayed): empty iff consistent.
  GridDelta mismatch;
  std::vector<std::string> warnings;
};

/// Replays r.tape from start and compares the block set with
/// r.world_ending_state. Propagates tape::ReplayDivergence.
VerifyResult verify_builder_record_detailed(const BuilderRecord& r, const WorldState& start);
bool verify_builder_record(const BuilderRecord& r, const WorldState& start);
/// Starts from an empty region.
bool verify_builder_record(const BuilderRecord& r);

/// Ending state of the latest earlier builder step of the same game, or an
/// empty region for the first step.
WorldState starting_state(const Corpus& corpus, const BuilderRecord& r);

struct ScanResult {
  Corpus corpus;
  std::vector<SchemaIssue> issues;
};

/// Reads a JSON array, a single record object, or newline-delimited records.
/// With no role, each entry's role is inferred from its fields. Every
/// malformed entry is reported; none are dropped silently.
ScanResult scan_records(const std::filesystem::path& path, std::optional<Role> role = std::nullopt);

/// Strict form: throws IoError or the first SchemaError.
Corpus load_records(const std::filesystem::path& path, std::optional<Role> role = std::nullopt);

/// Whitespace tokens with punctuation stripped at the edges; empty tokens
/// are dropped.
std::vector<std::string> tokenize(std::string_view text);
std::size_t word_count(std::string_view text);

enum class RejectReason { ShortInstruction, RepeatedInstructions, MissingQuestion };
std::string_view to_string(RejectReason r);

struct Rejection {
  Role role = Role::Architect;
  std::int64_t game_id = 0;
  std::int64_t step_id = 0;
  RejectReason reason = RejectReason::ShortInstruction;
};

struct CleanConfig {
  std::size_t min_words = 5;
  /// An annotator with this many identical instructions is dropped entirely.
  std::size_t repetition_threshold = 3;
};

struct CleanResult {
  Corpus kept;
  std::vector<Rejection> rejected;
};

CleanResult clean(const Corpus& corpus, const CleanConfig& config = {});

/// Builder record answering each instruction: the next builder step of the
/// same game. Keys are (gameId, architect stepId).
std::map<std::pair<std::int64_t, std::int64_t>, const BuilderRecord*> pair_instructions(const Corpus& corpus);

struct SplitCounts {
  std::size_t train = 0;
  std::size_t test = 0;
  friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

struct DatasetStats {
  std::size_t target_structures = 0;
  std::size_t completed_games = 0;
  std::size_t instruction_count = 0;
  std::size_t clarifying_question_count = 0;
  double median_game_duration_minutes = 0.0;
  double avg_turns_per_game = 0.0;
  double avg_instruction_words = 0.0;
  double avg_question_words = 0.0;
  double avg_questions_per_game = 0.0;
  std::size_t clear_count = 0;
  std::size_t ambiguous_count = 0;
  SplitCounts total_split;
  SplitCounts clear_split;
  SplitCounts ambiguous_split;
};

/// Game durations in minutes from the first and last record timestamps
/// (seconds); games without timestamps are absent.
std::map<std::int64_t, double> game_durations(const Corpus& corpus);

/// The median is taken over the supplied durations.
DatasetStats compute_stats(const Corpus& corpus, const std::map<std::int64_t, double>& durations_minutes);
DatasetStats compute_stats(const Corpus& corpus);

nlohmann::json to_json(const DatasetStats& s);
/// Two aligned blocks laid out like the seed and single-turn overview tables.
std::string render_stats_table(const DatasetStats& s);

enum class CQCategory { Color, NumberOfBlocks, DirectionOrientation, IdentifyBlocks, Other };
std::string_view to_string(CQCategory c);

/// Keyword families tried in the order Color, Number, Direction, Identify.
/// A keyword is a word or a space-separated phrase matched on whole tokens.
class QuestionCategorizer {
 public:
  static QuestionCategorizer defaults();
  /// {"color": [...], "number": [...], "direction": [...], "identify": [...]}
  static QuestionCategorizer from_json(const nlohmann::json& j);
  static QuestionCategorizer load(const std::filesystem::path& path);

  CQCategory categorize(std::string_view question) const;
  nlohmann::json to_json() const;

 private:
  using Phrase = std::vector<std::string>;
  std::vector<std::pair<CQCategory, std::vector<Phrase>>> families_;
};

CQCategory categorize_question(std::string_view question);

}  // namespace iglu::dataset
