#include "av/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "av/errors.hpp"
#include "av/util.hpp"

namespace av {

ConsensusDecision consensus_decide(std::span<const ExecutionOutcome> ref_outcomes, double tau) {
  ConsensusDecision decision;
  const int refs = static_cast<int>(ref_outcomes.size());
  const int needed = static_cast<int>(std::ceil(tau * refs));

  // cluster ok outcomes by output; earliest ref owns its cluster
  int best_size = 0;
  int best_owner = -1;
  for (int i = 0; i < refs; ++i) {
    const auto& oi = ref_outcomes[static_cast<std::size_t>(i)];
    if (!oi.ok()) continue;
    bool seen_before = false;
    for (int k = 0; k < i; ++k) {
      const auto& ok = ref_outcomes[static_cast<std::size_t>(k)];
      if (ok.ok() && ok.output == oi.output) {
        seen_before = true;
        break;
      }
    }
    if (seen_before) continue;
    int size = 0;
    for (int k = 0; k < refs; ++k) {
      const auto& ok = ref_outcomes[static_cast<std::size_t>(k)];
      if (ok.ok() && ok.output == oi.output) ++size;
    }
    if (size > best_size) {  // strict: ties keep the earliest cluster
      best_size = size;
      best_owner = i;
    }
  }

  if (best_owner < 0) {
    decision.reason = "no_ok_output";
    return decision;
  }
  if (best_size < needed) {
    decision.reason = "below_threshold(" + std::to_string(best_size) + "/" +
                      std::to_string(needed) + ")";
    return decision;
  }
  decision.retained = true;
  decision.output = ref_outcomes[static_cast<std::size_t>(best_owner)].output;
  return decision;
}

SynthesisResult synthesize_tests(const Sandbox& sandbox, const Problem& problem,
                                 std::span<const CandidateSolution> refs,
                                 std::span<const std::string> raw_inputs,
                                 const ConsensusConfig& config) {
  if (refs.size() < 2) throw ConstraintError("synthesize_tests: need at least 2 reference solutions");
  if (raw_inputs.empty()) throw ConstraintError("synthesize_tests: raw_inputs must be non-empty");
  if (!(config.agreement_threshold > 0.0 && config.agreement_threshold <= 1.0)) {
    throw ConstraintError("agreement_threshold: must be in (0, 1]");
  }

  ResourceLimits limits;
  limits.time_limit_ms = problem.time_limit_ms;
  limits.memory_limit_kib = problem.memory_limit_kib;

  OutcomeMatrix matrix = build_outcome_matrix(sandbox, refs, raw_inputs, limits);

  SynthesisResult result;
  for (std::size_t j = 0; j < raw_inputs.size(); ++j) {
    std::vector<ExecutionOutcome> column;
    column.reserve(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) column.push_back(matrix.outcomes[i][j]);
    ConsensusDecision decision = consensus_decide(column, config.agreement_threshold);
    if (!decision.retained) {
      result.discards.push_back({static_cast<int>(j), decision.reason});
      continue;
    }
    if (static_cast<int>(result.tests.size()) < config.max_suite_size) {
      result.tests.push_back({std::string(raw_inputs[j]), decision.output});
    } else {
      result.discards.push_back({static_cast<int>(j), "suite_full"});
    }
  }
  // consensus failures on at least half the inputs usually mean a
  // special judge or mislabeled references
  std::size_t failed_consensus = 0;
  for (const auto& d : result.discards) {
    if (d.reason != "suite_full") ++failed_consensus;
  }
  result.suspect_special_judge = 2 * failed_consensus >= raw_inputs.size();
  return result;
}

std::vector<TestCase> refine_suite(std::span<const TestCase> suite, const LabeledPool& pool,
                                   int max_size) {
  const int n = pool.candidate_count();
  const int t_count = static_cast<int>(suite.size());

  std::vector<int> correct, incorrect;
  for (int i = 0; i < n; ++i) {
    if (pool.candidates[static_cast<std::size_t>(i)].label == Label::correct) correct.push_back(i);
    else if (pool.candidates[static_cast<std::size_t>(i)].label == Label::incorrect) incorrect.push_back(i);
  }

  // a test failed by any correct solution would break agreement; drop it
  std::vector<int> eligible;
  for (int t = 0; t < t_count; ++t) {
    bool keeps_correct = std::all_of(correct.begin(), correct.end(), [&](int i) {
      return pool.passes[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
    });
    if (keeps_correct) eligible.push_back(t);
  }

  auto rejects = [&](int t, int i) {
    return !pool.passes[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
  };

  std::vector<bool> covered(static_cast<std::size_t>(n), false);
  std::vector<bool> taken(static_cast<std::size_t>(t_count), false);
  std::vector<TestCase> refined;

  while (static_cast<int>(refined.size()) < max_size) {
    int best_test = -1;
    int best_gain = 0;
    for (int t : eligible) {
      if (taken[static_cast<std::size_t>(t)]) continue;
      int gain = 0;
      for (int i : incorrect) {
        if (!covered[static_cast<std::size_t>(i)] && rejects(t, i)) ++gain;
      }
      if (gain > best_gain) {  // ties keep the earliest index
        best_gain = gain;
        best_test = t;
      }
    }
    if (best_test < 0) break;  // nothing rejects an uncovered solution
    taken[static_cast<std::size_t>(best_test)] = true;
    refined.push_back(suite[static_cast<std::size_t>(best_test)]);
    for (int i : incorrect) {
      if (rejects(best_test, i)) covered[static_cast<std::size_t>(i)] = true;
    }
  }

  // pad with the remaining eligible tests in original order
  for (int t : eligible) {
    if (static_cast<int>(refined.size()) >= max_size) break;
    if (!taken[static_cast<std::size_t>(t)]) {
      taken[static_cast<std::size_t>(t)] = true;
      refined.push_back(suite[static_cast<std::size_t>(t)]);
    }
  }
  return refined;
}

bool retain_validator(const Sandbox& sandbox, const ValidatorProgram& validator,
                      std::span<const TestCase> suite, const ResourceLimits& limits) {
  for (const auto& test : suite) {
    if (!validate_input(sandbox, validator, test.input, limits)) return false;
  }
  return true;
}

LabeledPool label_candidates(const Sandbox& sandbox, const Problem& problem,
                             std::span<const CandidateSolution> candidates,
                             std::span<const TestCase> suite) {
  for (std::size_t t = 0; t < suite.size(); ++t) {
    if (!suite[t].output) {
      throw ConstraintError("label_candidates: test " + std::to_string(t) + " has no output");
    }
  }
  ResourceLimits limits;
  limits.time_limit_ms = problem.time_limit_ms;
  limits.memory_limit_kib = problem.memory_limit_kib;

  std::vector<std::string> inputs;
  inputs.reserve(suite.size());
  for (const auto& t : suite) inputs.push_back(t.input);

  LabeledPool pool;
  pool.candidates.assign(candidates.begin(), candidates.end());
  pool.outcomes = build_outcome_matrix(sandbox, candidates, inputs, limits);
  pool.passes.assign(candidates.size(), std::vector<bool>(suite.size(), false));
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    bool all_pass = true;
    for (std::size_t t = 0; t < suite.size(); ++t) {
      const auto& o = pool.outcomes.outcomes[i][t];
      bool pass = o.ok() && o.output == normalize_output(*suite[t].output);
      pool.passes[i][t] = pass;
      all_pass = all_pass && pass;
    }
    pool.candidates[i].label = all_pass ? Label::correct : Label::incorrect;
  }
  return pool;
}

std::vector<MinedPair> mine_pairs(const LabeledPool& pool, std::span<const TestCase> suite,
                                  const Problem& problem, const ResourceLimits& limits) {
  const int n = pool.candidate_count();
  std::vector<MinedPair> pairs;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      int count = 0;
      for (std::size_t t = 0; t < suite.size(); ++t) {
        const auto& oa = pool.outcomes.outcomes[static_cast<std::size_t>(a)][t];
        const auto& ob = pool.outcomes.outcomes[static_cast<std::size_t>(b)][t];
        if (!equivalent_under_execution(oa, ob)) ++count;
      }
      if (count > 0) {
        MinedPair mined;
        mined.task = make_task(problem, pool.candidates, a, b, limits);
        mined.distinguishing_input_count = count;
        pairs.push_back(std::move(mined));
      }
    }
  }
  return pairs;
}

std::vector<int> curriculum_rank(std::span<const CurriculumStats> stats) {
  std::vector<int> order(stats.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    const auto& sx = stats[static_cast<std::size_t>(x)];
    const auto& sy = stats[static_cast<std::size_t>(y)];
    if (sx.pass_rate != sy.pass_rate) return sx.pass_rate < sy.pass_rate;
    return sx.distinguishing_input_count < sy.distinguishing_input_count;
  });
  return order;
}

}  // namespace av
