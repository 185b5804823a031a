#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "av/corpus.hpp"
#include "av/sandbox.hpp"

namespace av {

/// N candidates x M inputs grid of execution outcomes; row/column
/// indices follow corpus candidate order and input order.
struct OutcomeMatrix {
  std::vector<std::vector<ExecutionOutcome>> outcomes;

  int candidate_count() const { return static_cast<int>(outcomes.size()); }
  int input_count() const {
    return outcomes.empty() ? 0 : static_cast<int>(outcomes.front().size());
  }
};

/// Agreement counts v[i][j]: size of candidate i's output cluster on
/// input j; 0 exactly when the outcome is a failure.
struct VoteMatrix {
  std::vector<std::vector<int>> agreement;
};

enum class TieBreak { lowest_index, seeded_random };

struct ScoreVector {
  std::vector<int> scores;
  TieBreak tie_break = TieBreak::lowest_index;
};

/// Voting equality: both outcomes ok and normalized outputs equal.
/// A failure agrees with nothing, not even another failure.
bool outputs_agree(const ExecutionOutcome& a, const ExecutionOutcome& b);

/// Compiles every candidate and executes each on each input. A
/// candidate that fails to compile contributes a whole row of failure
/// outcomes. Executions run in parallel per the sandbox contract.
OutcomeMatrix build_outcome_matrix(const Sandbox& sandbox,
                                   std::span<const CandidateSolution> candidates,
                                   std::span<const std::string> inputs,
                                   const ResourceLimits& limits);

VoteMatrix agreement_scores(const OutcomeMatrix& matrix);

/// s[i] = number of inputs where candidate i's agreement ties the
/// column maximum; all-failure columns award no votes.
ScoreVector aggregate_votes(const VoteMatrix& votes,
                            TieBreak tie_break = TieBreak::lowest_index);

/// Argmax score; ties resolved per the vector's tie_break policy.
int select_best(const ScoreVector& scores, std::uint64_t seed = 0);

}  // namespace av
