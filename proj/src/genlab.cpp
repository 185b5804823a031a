#include "av/genlab.hpp"

#include <array>

#include "av/errors.hpp"

namespace av {

TaskInstance make_task(const Problem& problem, std::span<const CandidateSolution> candidates,
                       int a, int b, const ResourceLimits& limits) {
  if (a == b) throw ConstraintError("task pair: a and b must differ");
  if (a < 0 || b < 0 || a >= static_cast<int>(candidates.size()) ||
      b >= static_cast<int>(candidates.size())) {
    throw ConstraintError("task pair: candidate index out of range");
  }
  TaskInstance task;
  task.problem = problem;
  task.a = a;
  task.b = b;
  task.candidate_a = candidates[static_cast<std::size_t>(a)];
  task.candidate_b = candidates[static_cast<std::size_t>(b)];
  task.limits = limits;
  return task;
}

GeneratorRun run_generator(const Sandbox& sandbox, const GeneratorProgram& generator,
                           std::uint64_t seed, const ResourceLimits& limits) {
  GeneratorRun run;
  CompileResult compiled = sandbox.compile(generator.source, generator.guest_language, limits);
  if (!compiled.ok()) {
    run.failure = GeneratorRun::Failure::compile;
    run.verdict = Verdict::compile_error;
    run.diagnostic = compiled.diagnostic;
    return run;
  }
  std::array<std::string, 1> args = {std::to_string(seed)};
  ExecutionOutcome outcome = sandbox.execute(*compiled.artifact, {}, limits, args);
  if (outcome.failed()) {
    run.failure = GeneratorRun::Failure::exec;
    run.verdict = outcome.verdict;
    run.diagnostic = outcome.stderr_tail;
    return run;
  }
  if (outcome.raw_output.empty()) {
    run.failure = GeneratorRun::Failure::empty_output;
    return run;
  }
  run.input = std::move(outcome.raw_output);
  return run;
}

bool validate_input(const Sandbox& sandbox, const ValidatorProgram& validator,
                    std::string_view input, const ResourceLimits& limits) {
  CompileResult compiled = sandbox.compile(validator.source, validator.guest_language, limits);
  if (!compiled.ok()) return false;
  ExecutionOutcome outcome = sandbox.execute(*compiled.artifact, input, limits);
  return outcome.ok();  // ok implies exit code 0
}

bool equivalent_under_execution(const ExecutionOutcome& a, const ExecutionOutcome& b) {
  if (a.ok() && b.ok()) return a.output == b.output;
  return a.verdict == b.verdict;
}

namespace {

ExecutionOutcome run_candidate(const Sandbox& sandbox, const CandidateSolution& candidate,
                               std::string_view input, const ResourceLimits& limits) {
  CompileResult compiled = sandbox.compile(candidate.source, candidate.guest_language, limits);
  if (!compiled.ok()) {
    auto bottom = bottom_outcome(Verdict::compile_error);
    bottom.stderr_tail = compiled.diagnostic;
    return bottom;
  }
  return sandbox.execute(*compiled.artifact, input, limits);
}

}  // namespace

DistinguishResult distinguishes(const Sandbox& sandbox, const TaskInstance& task,
                                std::string_view input) {
  DistinguishResult result;
  result.input = std::string(input);
  result.valid = task.problem.validator
                     ? validate_input(sandbox, *task.problem.validator, input, task.limits)
                     : true;  // no validator: vacuously valid
  if (!result.valid) return result;

  result.outcome_a = run_candidate(sandbox, task.candidate_a, input, task.limits);
  result.outcome_b = run_candidate(sandbox, task.candidate_b, input, task.limits);
  result.differs = !equivalent_under_execution(*result.outcome_a, *result.outcome_b);
  return result;
}

int reward(const Sandbox& sandbox, const TaskInstance& task,
           const std::optional<GeneratorProgram>& generator, std::uint64_t seed) {
  if (!generator) return -1;  // G is empty
  GeneratorRun run = run_generator(sandbox, *generator, seed, task.limits);
  if (!run.ok()) return -1;
  DistinguishResult result = distinguishes(sandbox, task, run.input);
  if (!result.valid) return -1;
  return result.differs ? 1 : 0;
}

EpisodeVerdict judge_generator(const Sandbox& sandbox, const TaskInstance& task,
                               const GeneratorProgram& generator, int attempts,
                               std::uint64_t base_seed) {
  if (attempts < 1) throw ConfigError("judge_generator: attempts must be >= 1");
  EpisodeVerdict verdict;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    ++verdict.attempts_run;
    std::uint64_t seed = base_seed + static_cast<std::uint64_t>(attempt);
    GeneratorRun run = run_generator(sandbox, generator, seed, task.limits);
    int r = -1;
    if (run.ok()) {
      DistinguishResult result = distinguishes(sandbox, task, run.input);
      if (result.valid) r = result.differs ? 1 : 0;
      if (result.valid && result.differs && !verdict.witness) {
        verdict.witness = run.input;
      }
    }
    verdict.best_reward = std::max(verdict.best_reward, r);
    if (r == 1) {
      verdict.success = true;
      break;  // first witness decides; later seeds cannot improve
    }
  }
  return verdict;
}

}  // namespace av
