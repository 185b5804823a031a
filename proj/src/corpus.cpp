#include "av/corpus.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "av/errors.hpp"
#include "av/util.hpp"

namespace av {

namespace {

using nlohmann::json;

std::string require_string(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || !it->is_string()) {
    throw ParseError(std::string("missing or non-string field: ") + field);
  }
  return it->get<std::string>();
}

std::int64_t require_int(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || !it->is_number_integer()) {
    throw ParseError(std::string("missing or non-integer field: ") + field);
  }
  return it->get<std::int64_t>();
}

json parse_line(const std::string& line, const std::filesystem::path& path, int lineno) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ParseError(path.string() + ":" + std::to_string(lineno) + ": malformed record");
  }
  return j;
}

/// Applies fn to each non-empty line of a jsonl file.
template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(parse_line(line, path, lineno), lineno);
  }
}

std::string fresh_run_id() {
  static std::atomic<std::uint64_t> counter{0};
  auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                 std::chrono::system_clock::now().time_since_epoch())
                 .count();
  std::random_device rd;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "r%013lld-%04llu-%04x",
                static_cast<long long>(now),
                static_cast<unsigned long long>(counter.fetch_add(1) % 10000),
                rd() & 0xFFFF);
  return buf;
}

std::string iso8601_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string to_string(GuestLanguage lang) {
  return lang == GuestLanguage::py ? "py" : "cpp";
}

GuestLanguage guest_language_from_string(const std::string& s) {
  if (s == "py") return GuestLanguage::py;
  if (s == "cpp") return GuestLanguage::cpp;
  throw ParseError("guest_language: expected py|cpp, got \"" + s + "\"");
}

std::string to_string(Label label) {
  switch (label) {
    case Label::correct: return "correct";
    case Label::incorrect: return "incorrect";
    default: return "unknown";
  }
}

Label label_from_string(const std::string& s) {
  if (s == "correct") return Label::correct;
  if (s == "incorrect") return Label::incorrect;
  if (s == "unknown") return Label::unknown;
  throw ParseError("label: expected correct|incorrect|unknown, got \"" + s + "\"");
}

std::string to_string(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "easy";
    case Difficulty::medium: return "medium";
    default: return "hard";
  }
}

Difficulty difficulty_from_string(const std::string& s) {
  if (s == "easy") return Difficulty::easy;
  if (s == "medium") return Difficulty::medium;
  if (s == "hard") return Difficulty::hard;
  throw ParseError("difficulty: expected easy|medium|hard, got \"" + s + "\"");
}

nlohmann::json to_json(const TestCase& t) {
  json j;
  j["input"] = base64_encode(t.input);
  if (t.output) j["output"] = base64_encode(*t.output);
  return j;
}

TestCase test_case_from_json(const json& j) {
  TestCase t;
  t.input = base64_decode(require_string(j, "input"));
  if (j.contains("output") && !j["output"].is_null()) {
    if (!j["output"].is_string()) throw ParseError("test output: expected string");
    t.output = base64_decode(j["output"].get<std::string>());
  }
  return t;
}

nlohmann::json to_json(const ValidatorProgram& v) {
  return json{{"source", v.source}, {"guest_language", to_string(v.guest_language)}};
}

ValidatorProgram validator_from_json(const json& j) {
  ValidatorProgram v;
  v.source = require_string(j, "source");
  v.guest_language = guest_language_from_string(require_string(j, "guest_language"));
  if (v.source.empty()) throw ConstraintError("validator source: must be non-empty");
  return v;
}

nlohmann::json to_json(const GeneratorProgram& g) {
  return json{{"source", g.source}, {"guest_language", to_string(g.guest_language)}};
}

GeneratorProgram generator_from_json(const json& j) {
  GeneratorProgram g;
  g.source = require_string(j, "source");
  g.guest_language = guest_language_from_string(require_string(j, "guest_language"));
  if (g.source.empty()) throw ConstraintError("generator source: must be non-empty");
  return g;
}

nlohmann::json to_json(const Problem& p) {
  json j;
  j["id"] = p.id;
  j["statement"] = p.statement;
  j["time_limit_ms"] = p.time_limit_ms;
  j["memory_limit_kib"] = p.memory_limit_kib;
  j["tests"] = json::array();
  for (const auto& t : p.tests) j["tests"].push_back(to_json(t));
  if (p.validator) j["validator"] = to_json(*p.validator);
  if (p.difficulty) j["difficulty"] = to_string(*p.difficulty);
  return j;
}

Problem problem_from_json(const json& j) {
  Problem p;
  p.id = require_string(j, "id");
  if (j.contains("statement")) p.statement = require_string(j, "statement");
  p.time_limit_ms = require_int(j, "time_limit_ms");
  p.memory_limit_kib = require_int(j, "memory_limit_kib");
  if (j.contains("tests")) {
    if (!j["tests"].is_array()) throw ParseError("tests: expected array");
    for (const auto& tj : j["tests"]) p.tests.push_back(test_case_from_json(tj));
  }
  if (j.contains("validator") && !j["validator"].is_null()) {
    p.validator = validator_from_json(j["validator"]);
  }
  if (j.contains("difficulty") && !j["difficulty"].is_null()) {
    p.difficulty = difficulty_from_string(j["difficulty"].get<std::string>());
  }
  check(p);
  return p;
}

nlohmann::json to_json(const CandidateSolution& c) {
  return json{{"problem_id", c.problem_id},
              {"source", c.source},
              {"guest_language", to_string(c.guest_language)},
              {"label", to_string(c.label)}};
}

CandidateSolution candidate_from_json(const json& j) {
  CandidateSolution c;
  c.problem_id = require_string(j, "problem_id");
  c.source = require_string(j, "source");
  c.guest_language = guest_language_from_string(require_string(j, "guest_language"));
  // absent label defaults to unknown; synthesis may overwrite later
  if (j.contains("label") && !j["label"].is_null()) {
    c.label = label_from_string(j["label"].get<std::string>());
  }
  check(c);
  return c;
}

nlohmann::json to_json(const RunRecord& r) {
  return json{{"run_id", r.run_id},       {"method", r.method},
              {"problem_id", r.problem_id}, {"selected_index", r.selected_index},
              {"scores", r.scores},       {"seed", r.seed},
              {"timestamp", r.timestamp}};
}

RunRecord run_record_from_json(const json& j) {
  RunRecord r;
  r.run_id = require_string(j, "run_id");
  r.method = require_string(j, "method");
  r.problem_id = require_string(j, "problem_id");
  r.selected_index = static_cast<int>(require_int(j, "selected_index"));
  if (j.contains("scores")) r.scores = j["scores"].get<std::vector<double>>();
  if (j.contains("seed")) r.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("timestamp")) r.timestamp = j["timestamp"].get<std::string>();
  return r;
}

void check(const Problem& p) {
  if (p.id.empty()) throw ConstraintError("id: must be non-empty");
  if (p.time_limit_ms < 1) throw ConstraintError("time_limit_ms");
  if (p.memory_limit_kib < 1) throw ConstraintError("memory_limit_kib");
}

void check(const CandidateSolution& c) {
  if (c.problem_id.empty()) throw ConstraintError("problem_id: must be non-empty");
  if (c.source.empty()) throw ConstraintError("source: must be non-empty");
}

void check(const RunRecord& r) {
  if (r.selected_index < 0) throw ConstraintError("selected_index");
}

Problem load_problem(const std::filesystem::path& path) {
  std::vector<Problem> all = load_problems(path);
  if (all.empty()) throw ParseError(path.string() + ": no problem record");
  if (all.size() > 1) {
    throw ParseError(path.string() + ": expected a single problem record, found " +
                     std::to_string(all.size()));
  }
  return std::move(all.front());
}

std::vector<Problem> load_problems(const std::filesystem::path& path) {
  std::vector<Problem> out;
  for_each_record(path, [&](const json& j, int lineno) {
    Problem p = problem_from_json(j);
    for (const auto& prev : out) {
      if (prev.id == p.id) {
        throw ConstraintError(path.string() + ":" + std::to_string(lineno) +
                              ": duplicate problem id \"" + p.id + "\"");
      }
    }
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<CandidateSolution> load_candidates(const std::filesystem::path& path,
                                               const std::string& problem_id) {
  std::vector<CandidateSolution> out;
  for_each_record(path, [&](const json& j, int lineno) {
    CandidateSolution c = candidate_from_json(j);
    if (c.problem_id != problem_id) {
      throw MismatchError(path.string() + ":" + std::to_string(lineno) +
                          ": bundle problem_id \"" + c.problem_id +
                          "\" does not match requested \"" + problem_id + "\"");
    }
    out.push_back(std::move(c));
  });
  return out;
}

std::vector<GeneratorProgram> load_generators(const std::filesystem::path& path) {
  std::vector<GeneratorProgram> out;
  for_each_record(path, [&](const json& j, int) { out.push_back(generator_from_json(j)); });
  return out;
}

void save_problems(std::span<const Problem> problems, const std::filesystem::path& path) {
  std::ostringstream ss;
  for (const auto& p : problems) ss << to_json(p).dump() << "\n";
  write_file(path, ss.str());
}

void save_candidates(std::span<const CandidateSolution> candidates,
                     const std::filesystem::path& path) {
  std::ostringstream ss;
  for (const auto& c : candidates) ss << to_json(c).dump() << "\n";
  write_file(path, ss.str());
}

std::string store_run(const RunRecord& record, const std::filesystem::path& root) {
  check(record);
  std::error_code ec;
  std::filesystem::create_directories(root / "runs", ec);
  if (ec) throw IoError("cannot create run store: " + (root / "runs").string());

  RunRecord r = record;
  if (r.timestamp.empty()) r.timestamp = iso8601_now();
  if (r.run_id.empty()) r.run_id = fresh_run_id();
  auto path = root / "runs" / (r.run_id + ".json");
  if (std::filesystem::exists(path)) {
    throw IoError("run store is append-only, refusing to overwrite: " + path.string());
  }
  write_file(path, to_json(r).dump(2) + "\n");
  return r.run_id;
}

RunRecord load_run(const std::filesystem::path& root, const std::string& run_id) {
  auto text = read_file(root / "runs" / (run_id + ".json"));
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError("malformed run record: " + run_id);
  return run_record_from_json(j);
}

Problem Corpus::problem(const std::string& id) const {
  for (auto& p : problems()) {
    if (p.id == id) return p;
  }
  throw ConfigError("problem not found in corpus: " + id);
}

}  // namespace av
