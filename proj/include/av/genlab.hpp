#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "av/corpus.hpp"
#include "av/sandbox.hpp"

namespace av {

/// One verifier task: a problem plus a pair of its candidate solutions.
struct TaskInstance {
  Problem problem;
  int a = 0;
  int b = 1;
  CandidateSolution candidate_a;
  CandidateSolution candidate_b;
  ResourceLimits limits;
};

TaskInstance make_task(const Problem& problem, std::span<const CandidateSolution> candidates,
                       int a, int b, const ResourceLimits& limits);

struct GeneratorRun {
  enum class Failure { none, compile, exec, empty_output };

  std::string input;  // raw stdout bytes, un-normalized
  Failure failure = Failure::none;
  Verdict verdict = Verdict::ok;  // exec failure detail
  std::string diagnostic;

  bool ok() const { return failure == Failure::none; }
};

/// Executes the generator with the seed as its sole argv argument.
/// Any non-ok verdict or empty stdout is a failure, not an error.
GeneratorRun run_generator(const Sandbox& sandbox, const GeneratorProgram& generator,
                           std::uint64_t seed, const ResourceLimits& limits);

/// Validator protocol: input on stdin, exit 0 means valid. Any fault
/// (crash, timeout, nonzero exit, compile failure) means invalid.
bool validate_input(const Sandbox& sandbox, const ValidatorProgram& validator,
                    std::string_view input, const ResourceLimits& limits);

/// Distinguishing equality: two failures with the same verdict compare
/// equal (both crashing the same way is not a distinction), unlike the
/// voting relation where failures never agree.
bool equivalent_under_execution(const ExecutionOutcome& a, const ExecutionOutcome& b);

struct DistinguishResult {
  std::string input;
  bool valid = false;
  std::optional<ExecutionOutcome> outcome_a;
  std::optional<ExecutionOutcome> outcome_b;
  bool differs = false;  // defined only when valid
};

/// Validates the input (vacuously valid when the problem has no
/// validator), then executes both candidates on it.
DistinguishResult distinguishes(const Sandbox& sandbox, const TaskInstance& task,
                                std::string_view input);

/// Sparse outcome reward: -1 when the generator is absent, fails, or
/// yields an invalid input; 0 when outcomes are equivalent; 1 when the
/// input distinguishes the pair.
int reward(const Sandbox& sandbox, const TaskInstance& task,
           const std::optional<GeneratorProgram>& generator, std::uint64_t seed);

struct EpisodeVerdict {
  bool success = false;
  int best_reward = -1;
  std::optional<std::string> witness;  // first distinguishing input
  int attempts_run = 0;
};

constexpr int kDefaultJudgeAttempts = 10;

/// Runs the generator with seeds base_seed..base_seed+attempts-1;
/// success iff any attempt earns reward 1.
EpisodeVerdict judge_generator(const Sandbox& sandbox, const TaskInstance& task,
                               const GeneratorProgram& generator, int attempts,
                               std::uint64_t base_seed);

}  // namespace av
