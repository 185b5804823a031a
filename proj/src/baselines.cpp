#include "av/baselines.hpp"

#include <algorithm>
#include <map>

#include "av/errors.hpp"
#include "av/genlab.hpp"
#include "av/util.hpp"

namespace av {

int vanilla_select(int candidate_count, std::uint64_t seed) {
  if (candidate_count < 1) throw EmptyPoolError("vanilla_select: empty candidate pool");
  std::mt19937_64 rng(seed);
  return static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(candidate_count)));
}

std::vector<long long> mbr_exec_risks(const OutcomeMatrix& matrix, MbrMode mode) {
  const int n = matrix.candidate_count();
  const int m = matrix.input_count();
  std::vector<long long> risk(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      if (k == i) continue;
      int disagreements = 0;
      for (int j = 0; j < m; ++j) {
        const auto& oi = matrix.outcomes[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        const auto& ok = matrix.outcomes[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
        if (!outputs_agree(oi, ok)) ++disagreements;
      }
      if (mode == MbrMode::soft) {
        risk[static_cast<std::size_t>(i)] += disagreements;
      } else if (disagreements > 0) {
        risk[static_cast<std::size_t>(i)] += 1;  // any mismatch counts the pair once
      }
    }
  }
  return risk;
}

int mbr_exec_select(const OutcomeMatrix& matrix, MbrMode mode) {
  if (matrix.candidate_count() < 1) {
    throw EmptyPoolError("mbr_exec_select: empty candidate pool");
  }
  std::vector<long long> risk = mbr_exec_risks(matrix, mode);
  return static_cast<int>(std::min_element(risk.begin(), risk.end()) - risk.begin());
}

namespace {

std::vector<std::vector<int>> pattern_groups(const PassMatrix& pm) {
  std::map<std::vector<bool>, std::vector<int>> by_pattern;
  for (int i = 0; i < pm.candidate_count(); ++i) {
    by_pattern[pm.passes[static_cast<std::size_t>(i)]].push_back(i);
  }
  std::vector<std::vector<int>> groups;
  groups.reserve(by_pattern.size());
  for (auto& [pattern, members] : by_pattern) groups.push_back(std::move(members));
  return groups;
}

int row_passes(const PassMatrix& pm, int i) {
  const auto& row = pm.passes[static_cast<std::size_t>(i)];
  return static_cast<int>(std::count(row.begin(), row.end(), true));
}

}  // namespace

int codet_select(const PassMatrix& pm) {
  if (pm.candidate_count() < 1) throw EmptyPoolError("codet_select: empty candidate pool");
  long long best_score = -1;
  int best_index = 0;
  for (const auto& group : pattern_groups(pm)) {
    long long score = static_cast<long long>(group.size()) * row_passes(pm, group.front());
    int lowest = *std::min_element(group.begin(), group.end());
    if (score > best_score || (score == best_score && lowest < best_index)) {
      best_score = score;
      best_index = lowest;
    }
  }
  return best_index;
}

int coderm_select(const PassMatrix& pm) {
  const int n = pm.candidate_count();
  if (n < 1) throw EmptyPoolError("coderm_select: empty candidate pool");

  std::map<std::vector<bool>, int> group_size;
  for (int i = 0; i < n; ++i) ++group_size[pm.passes[static_cast<std::size_t>(i)]];

  int best = 0;
  for (int i = 1; i < n; ++i) {
    int ri = row_passes(pm, i);
    int rb = row_passes(pm, best);
    if (ri > rb) {
      best = i;
    } else if (ri == rb) {
      int gi = group_size[pm.passes[static_cast<std::size_t>(i)]];
      int gb = group_size[pm.passes[static_cast<std::size_t>(best)]];
      if (gi > gb) best = i;  // equal rewards: larger consensus group wins
    }
  }
  return best;
}

GeneratedInputs random_generator_inputs(const Sandbox& sandbox,
                                        std::span<const GeneratorProgram> generators,
                                        int per_generator, const ResourceLimits& limits,
                                        std::uint64_t seed) {
  if (per_generator < 1) {
    throw ConfigError("random_generator_inputs: per_generator must be >= 1");
  }
  const std::size_t total = generators.size() * static_cast<std::size_t>(per_generator);
  std::vector<GeneratorRun> runs(total);
  parallel_for(total, sandbox.config().workers, [&](std::size_t t) {
    std::size_t g = t / static_cast<std::size_t>(per_generator);
    std::size_t d = t % static_cast<std::size_t>(per_generator);
    runs[t] = run_generator(sandbox, generators[g], mix_seed(seed, t), limits);
    (void)d;
  });

  GeneratedInputs out;
  for (auto& run : runs) {
    if (run.ok()) out.inputs.push_back(std::move(run.input));
    else ++out.skipped;
  }
  return out;
}

PassMatrix build_pass_matrix(const Sandbox& sandbox,
                             std::span<const CandidateSolution> candidates,
                             std::span<const TestCase> tests, const ResourceLimits& limits) {
  for (std::size_t t = 0; t < tests.size(); ++t) {
    if (!tests[t].output) {
      throw ConstraintError("pass matrix requires test outputs; test " + std::to_string(t) +
                            " has none");
    }
  }
  std::vector<std::string> inputs;
  inputs.reserve(tests.size());
  for (const auto& t : tests) inputs.push_back(t.input);

  OutcomeMatrix matrix = build_outcome_matrix(sandbox, candidates, inputs, limits);
  PassMatrix pm;
  pm.passes.assign(candidates.size(), std::vector<bool>(tests.size(), false));
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    for (std::size_t t = 0; t < tests.size(); ++t) {
      const auto& o = matrix.outcomes[i][t];
      pm.passes[i][t] = o.ok() && o.output == normalize_output(*tests[t].output);
    }
  }
  return pm;
}

}  // namespace av
