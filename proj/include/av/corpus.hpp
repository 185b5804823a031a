#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace av {

enum class GuestLanguage { py, cpp };
enum class Label { correct, incorrect, unknown };
enum class Difficulty { easy, medium, hard };

std::string to_string(GuestLanguage lang);
GuestLanguage guest_language_from_string(const std::string& s);
std::string to_string(Label label);
Label label_from_string(const std::string& s);
std::string to_string(Difficulty d);
Difficulty difficulty_from_string(const std::string& s);

/// One test case: raw input bytes, optionally a normalized reference output.
struct TestCase {
  std::string input;
  std::optional<std::string> output;

  bool operator==(const TestCase&) const = default;
};

struct ValidatorProgram {
  std::string source;
  GuestLanguage guest_language = GuestLanguage::py;

  bool operator==(const ValidatorProgram&) const = default;
};

struct GeneratorProgram {
  std::string source;
  GuestLanguage guest_language = GuestLanguage::py;

  bool operator==(const GeneratorProgram&) const = default;
};

struct Problem {
  std::string id;
  std::string statement;
  std::int64_t time_limit_ms = 2000;
  std::int64_t memory_limit_kib = 262144;
  std::vector<TestCase> tests;
  std::optional<ValidatorProgram> validator;
  std::optional<Difficulty> difficulty;

  bool operator==(const Problem&) const = default;
};

struct CandidateSolution {
  std::string problem_id;
  std::string source;
  GuestLanguage guest_language = GuestLanguage::py;
  Label label = Label::unknown;

  bool operator==(const CandidateSolution&) const = default;
};

struct RunRecord {
  std::string run_id;
  std::string method;
  std::string problem_id;
  int selected_index = 0;
  std::vector<double> scores;
  std::uint64_t seed = 0;
  std::string timestamp;  // ISO-8601 UTC, assigned at store time if empty

  bool operator==(const RunRecord&) const = default;
};

// JSON wire forms. Bytes fields (input/output) are base64 strings.
nlohmann::json to_json(const TestCase& t);
nlohmann::json to_json(const ValidatorProgram& v);
nlohmann::json to_json(const GeneratorProgram& g);
nlohmann::json to_json(const Problem& p);
nlohmann::json to_json(const CandidateSolution& c);
nlohmann::json to_json(const RunRecord& r);

TestCase test_case_from_json(const nlohmann::json& j);
ValidatorProgram validator_from_json(const nlohmann::json& j);
GeneratorProgram generator_from_json(const nlohmann::json& j);
Problem problem_from_json(const nlohmann::json& j);
CandidateSolution candidate_from_json(const nlohmann::json& j);
RunRecord run_record_from_json(const nlohmann::json& j);

/// Checks the type invariants, throwing ConstraintError naming the
/// offending field.
void check(const Problem& p);
void check(const CandidateSolution& c);
void check(const RunRecord& r);

/// Loads a file holding exactly one problem record.
Problem load_problem(const std::filesystem::path& path);

/// Loads a problems.jsonl corpus file (one problem per line). Ids must
/// be unique within the file.
std::vector<Problem> load_problems(const std::filesystem::path& path);

/// Loads a candidate bundle; every record must carry the requested
/// problem_id. List order is file order and fixes the candidate
/// indices used by every selector.
std::vector<CandidateSolution> load_candidates(const std::filesystem::path& path,
                                               const std::string& problem_id);

std::vector<GeneratorProgram> load_generators(const std::filesystem::path& path);

void save_problems(std::span<const Problem> problems, const std::filesystem::path& path);
void save_candidates(std::span<const CandidateSolution> candidates,
                     const std::filesystem::path& path);

/// Serializes the record under <root>/runs/<run_id>.json, append-only:
/// an empty run_id gets a fresh unique one, an existing file is never
/// overwritten. Returns the final run_id.
std::string store_run(const RunRecord& record, const std::filesystem::path& root);
RunRecord load_run(const std::filesystem::path& root, const std::string& run_id);

/// Corpus layout helper rooted at a directory holding problems.jsonl,
/// candidates/<id>.jsonl, runs/ and trajectories/.
class Corpus {
 public:
  explicit Corpus(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path problems_path() const { return root_ / "problems.jsonl"; }
  std::filesystem::path candidates_path(const std::string& problem_id) const {
    return root_ / "candidates" / (problem_id + ".jsonl");
  }
  std::filesystem::path trajectories_dir() const { return root_ / "trajectories"; }

  std::vector<Problem> problems() const { return load_problems(problems_path()); }
  Problem problem(const std::string& id) const;
  std::vector<CandidateSolution> candidates(const std::string& problem_id) const {
    return load_candidates(candidates_path(problem_id), problem_id);
  }

 private:
  std::filesystem::path root_;
};

}  // namespace av
