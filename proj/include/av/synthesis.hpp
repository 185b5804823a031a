#pragma once

#include <span>
#include <string>
#include <vector>

#include "av/corpus.hpp"
#include "av/genlab.hpp"
#include "av/sandbox.hpp"
#include "av/voting.hpp"

namespace av {

struct ConsensusConfig {
  double agreement_threshold = 0.8;  // tau, in (0, 1]
  int max_suite_size = 60;
};

/// Pure consensus core: given one input's outcomes across all
/// reference solutions, decide retention. Retained iff the largest
/// equal-output cluster of ok outcomes has size >= ceil(tau * refs);
/// the cluster's output (ties: earliest ref) becomes the reference
/// output.
struct ConsensusDecision {
  bool retained = false;
  std::string output;
  std::string reason;  // discard reason when not retained
};

ConsensusDecision consensus_decide(std::span<const ExecutionOutcome> ref_outcomes, double tau);

struct DiscardedInput {
  int input_index = 0;
  std::string reason;
};

struct SynthesisResult {
  std::vector<TestCase> tests;
  std::vector<DiscardedInput> discards;
  /// Set when refs failed consensus on at least half the raw inputs;
  /// such suites are excluded from the corpus.
  bool suspect_special_judge = false;
};

/// Executes every raw input on all reference solutions and keeps the
/// ones passing the consensus check, reference output attached.
SynthesisResult synthesize_tests(const Sandbox& sandbox, const Problem& problem,
                                 std::span<const CandidateSolution> refs,
                                 std::span<const std::string> raw_inputs,
                                 const ConsensusConfig& config);

/// Candidates with labels plus their per-test pass vectors and raw
/// outcomes against a suite.
struct LabeledPool {
  std::vector<CandidateSolution> candidates;
  std::vector<std::vector<bool>> passes;  // N x T
  OutcomeMatrix outcomes;                 // N x T

  int candidate_count() const { return static_cast<int>(candidates.size()); }
};

/// Greedy discriminative refinement: repeatedly take the test
/// rejecting the most still-unrejected incorrect solutions (ties:
/// earliest index), then pad with remaining tests in original order up
/// to max_size. Tests failed by any correct solution are dropped first.
std::vector<TestCase> refine_suite(std::span<const TestCase> suite, const LabeledPool& pool,
                                   int max_size);

/// True iff the validator accepts every input of the suite.
bool retain_validator(const Sandbox& sandbox, const ValidatorProgram& validator,
                      std::span<const TestCase> suite, const ResourceLimits& limits);

/// Runs every candidate against the suite; correct iff every test
/// executes ok with output equal to the reference output. All suite
/// tests must carry outputs.
LabeledPool label_candidates(const Sandbox& sandbox, const Problem& problem,
                             std::span<const CandidateSolution> candidates,
                             std::span<const TestCase> suite);

struct MinedPair {
  TaskInstance task;
  int distinguishing_input_count = 0;
};

/// All unordered candidate pairs separated by at least one suite test
/// under the execution-equivalence relation.
std::vector<MinedPair> mine_pairs(const LabeledPool& pool, std::span<const TestCase> suite,
                                  const Problem& problem, const ResourceLimits& limits);

struct CurriculumStats {
  double pass_rate = 0.0;
  int distinguishing_input_count = 0;
};

/// Hardest-first ordering: ascending (pass_rate, distinguishing_input_count),
/// stable on ties. Returns indices into the input span.
std::vector<int> curriculum_rank(std::span<const CurriculumStats> stats);

}  // namespace av
