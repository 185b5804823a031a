#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "av/agent.hpp"
#include "av/baselines.hpp"
#include "av/corpus.hpp"
#include "av/sandbox.hpp"
#include "av/voting.hpp"

namespace av {

/// Candidates with frozen ground-truth correctness for one problem.
struct EvalPool {
  std::string problem_id;
  std::vector<bool> correct;

  int n() const { return static_cast<int>(correct.size()); }
};

/// Fraction of pool candidates that are correct.
double pass_at_1(const EvalPool& pool);

/// Picks a position within the drawn subset; `drawn` holds pool
/// indices in draw order.
using Selector =
    std::function<int(const EvalPool& pool, std::span<const int> drawn, std::uint64_t seed)>;

Selector vanilla_eval_selector();
/// Always picks a correct candidate when the draw contains one.
Selector oracle_eval_selector();

struct BestAtKReport {
  int k = 0;
  int repeats = 0;
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<int> selections;  // selected pool index per repeat
};

/// Each repeat draws k candidates uniformly without replacement,
/// applies the selector and scores 1 iff the pick is correct. k = n
/// collapses to the single full-pool draw.
BestAtKReport best_at_k(const EvalPool& pool, int k, int repeats, const Selector& selector,
                        std::uint64_t seed);

// ------------------------------------------------------------- methods

extern const std::vector<std::string> kMethodNames;  // CLI selector names

/// Everything a method needs, built once per problem: the inputs it
/// voted on and the full-pool matrices selectors restrict per draw.
struct MethodContext {
  std::string method;
  std::vector<std::string> inputs;             // voting / mbr inputs
  std::shared_ptr<OutcomeMatrix> matrix;       // N x M, voting-style methods
  std::shared_ptr<PassMatrix> pass;            // N x T, codet / coderm
  std::optional<AgenticSelection> agentic;     // provenance when method == agentic
  int generator_skips = 0;
};

/// Builds the per-problem context for a method. inputs_source is one
/// of: "suite", "file:<path>", "cases:<path>", "generators:<path>",
/// "script:<path>" or an http(s) backend URL. budget caps the number
/// of inputs (0 = no cap); for agentic it is the episode budget and
/// for generators the total draw budget.
MethodContext build_method_context(const Sandbox& sandbox, const Problem& problem,
                                   std::span<const CandidateSolution> candidates,
                                   const std::string& method, const std::string& inputs_source,
                                   int budget, std::uint64_t seed, const EpisodeConfig& episode);

/// Full-pool selection for a prepared context.
int select_full(const MethodContext& context, int candidate_count, std::uint64_t seed);

/// Method scores for reporting (votes, negated risks, rewards);
/// empty for vanilla.
std::vector<double> method_scores(const MethodContext& context, int candidate_count);

/// Selector restricting the context's matrices to each draw.
Selector make_method_selector(std::shared_ptr<const MethodContext> context);

// ------------------------------------------------------------- experiments

struct ExperimentConfig {
  std::filesystem::path corpus_root = ".";
  std::vector<std::string> problems;  // empty = every problem in the corpus
  std::string method = "vanilla";
  std::string inputs_source = "suite";
  int budget = 64;
  int k = 8;
  int repeats = 100;
  std::uint64_t seed = 0;
  int max_turns = 16;
  int judge_attempts = kDefaultJudgeAttempts;
  std::filesystem::path out_dir = "reports";
  std::filesystem::path prompts_dir;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

struct ProblemResult {
  std::string problem_id;
  std::optional<Difficulty> difficulty;
  double pool_pass_at_1 = 0.0;
  BestAtKReport report;
  int selected_full = -1;  // full-pool selection
  std::string run_id;
  int inputs_used = 0;
  int episodes_attempted = 0;
  int episodes_succeeded = 0;
  bool fallback_vanilla = false;
  std::string error;  // non-empty when this problem failed

  bool failed() const { return !error.empty(); }
};

struct DifficultyRow {
  std::string difficulty;  // easy | medium | hard | unlabeled
  int problems = 0;
  double mean = 0.0;
};

/// Per-difficulty mean of report means; problems lacking a difficulty
/// group under "unlabeled".
std::vector<DifficultyRow> difficulty_breakdown(std::span<const ProblemResult> rows);

struct ExperimentReport {
  std::vector<ProblemResult> rows;  // problem-id order
  std::vector<DifficultyRow> by_difficulty;
  std::filesystem::path summary_path;
};

nlohmann::json to_json(const BestAtKReport& report);
nlohmann::json to_json(const ProblemResult& row);

/// Runs the configured method over the corpus: labels candidates
/// against each problem's ground-truth suite, builds the method's
/// inputs, estimates Best@k, and persists RunRecords plus a summary.
/// Missing corpus fails fast; per-problem failures are recorded rows.
ExperimentReport run_experiment(const Sandbox& sandbox, const ExperimentConfig& config);

}  // namespace av
