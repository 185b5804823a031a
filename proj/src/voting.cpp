#include "av/voting.hpp"

#include <algorithm>

#include "av/errors.hpp"
#include "av/util.hpp"

namespace av {

bool outputs_agree(const ExecutionOutcome& a, const ExecutionOutcome& b) {
  return a.ok() && b.ok() && a.output == b.output;
}

OutcomeMatrix build_outcome_matrix(const Sandbox& sandbox,
                                   std::span<const CandidateSolution> candidates,
                                   std::span<const std::string> inputs,
                                   const ResourceLimits& limits) {
  const std::size_t n = candidates.size();
  const std::size_t m = inputs.size();

  std::vector<CompileResult> compiled(n);
  parallel_for(n, sandbox.config().workers, [&](std::size_t i) {
    compiled[i] = sandbox.compile(candidates[i].source, candidates[i].guest_language, limits);
  });

  OutcomeMatrix matrix;
  matrix.outcomes.assign(n, std::vector<ExecutionOutcome>(m));
  parallel_for(n * m, sandbox.config().workers, [&](std::size_t cell) {
    std::size_t i = cell / m;
    std::size_t j = cell % m;
    if (!compiled[i].ok()) {
      auto bottom = bottom_outcome(Verdict::compile_error);
      bottom.stderr_tail = compiled[i].diagnostic;
      matrix.outcomes[i][j] = std::move(bottom);
    } else {
      matrix.outcomes[i][j] = sandbox.execute(*compiled[i].artifact, inputs[j], limits);
    }
  });
  return matrix;
}

VoteMatrix agreement_scores(const OutcomeMatrix& matrix) {
  const int n = matrix.candidate_count();
  const int m = matrix.input_count();
  VoteMatrix votes;
  votes.agreement.assign(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(m), 0));
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) {
      const auto& oi = matrix.outcomes[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (oi.failed()) continue;  // v = 0 for bottom
      int cluster = 0;
      for (int k = 0; k < n; ++k) {
        if (outputs_agree(matrix.outcomes[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)], oi)) {
          ++cluster;
        }
      }
      votes.agreement[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = cluster;
    }
  }
  return votes;
}

ScoreVector aggregate_votes(const VoteMatrix& votes, TieBreak tie_break) {
  ScoreVector result;
  result.tie_break = tie_break;
  const std::size_t n = votes.agreement.size();
  result.scores.assign(n, 0);
  if (n == 0) return result;
  const std::size_t m = votes.agreement.front().size();
  for (std::size_t j = 0; j < m; ++j) {
    int best = 0;
    for (std::size_t i = 0; i < n; ++i) best = std::max(best, votes.agreement[i][j]);
    if (best == 0) continue;  // all-failure column: no votes
    for (std::size_t i = 0; i < n; ++i) {
      if (votes.agreement[i][j] == best) ++result.scores[i];
    }
  }
  return result;
}

int select_best(const ScoreVector& scores, std::uint64_t seed) {
  if (scores.scores.empty()) throw EmptyPoolError("select_best: empty candidate pool");
  int best_score = *std::max_element(scores.scores.begin(), scores.scores.end());
  std::vector<int> winners;
  for (std::size_t i = 0; i < scores.scores.size(); ++i) {
    if (scores.scores[i] == best_score) winners.push_back(static_cast<int>(i));
  }
  if (scores.tie_break == TieBreak::lowest_index || winners.size() == 1) {
    return winners.front();
  }
  std::mt19937_64 rng(seed);
  return winners[uniform_below(rng, winners.size())];
}

}  // namespace av
