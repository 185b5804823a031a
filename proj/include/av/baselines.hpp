#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "av/corpus.hpp"
#include "av/sandbox.hpp"
#include "av/voting.hpp"

namespace av {

/// N candidates x T generated tests; passes[i][t] means candidate i's
/// normalized output equals test t's asserted output.
struct PassMatrix {
  std::vector<std::vector<bool>> passes;

  int candidate_count() const { return static_cast<int>(passes.size()); }
  int test_count() const {
    return passes.empty() ? 0 : static_cast<int>(passes.front().size());
  }
};

/// Uniform random pick, reproducible under seed.
int vanilla_select(int candidate_count, std::uint64_t seed);

enum class MbrMode { hard, soft };

/// Per-candidate execution risk: soft sums pairwise output
/// disagreements over all inputs, hard counts candidates that disagree
/// anywhere.
std::vector<long long> mbr_exec_risks(const OutcomeMatrix& matrix, MbrMode mode);

/// Lowest risk wins, lowest-index ties.
int mbr_exec_select(const OutcomeMatrix& matrix, MbrMode mode);

/// Groups candidates by identical pass patterns; group score is
/// |group| x tests-passed-by-the-pattern; returns the lowest-index
/// member of the best group.
int codet_select(const PassMatrix& pm);

/// Reward = tests passed. Ties broken by larger identical-pass-pattern
/// group, then lowest index.
int coderm_select(const PassMatrix& pm);

struct GeneratedInputs {
  std::vector<std::string> inputs;  // (generator, draw) lexicographic order
  int skipped = 0;                  // failed generator runs
};

/// Runs each generator per_generator times with distinct derived seeds
/// (seed passed as argv[1]); failed runs are skipped and counted.
GeneratedInputs random_generator_inputs(const Sandbox& sandbox,
                                        std::span<const GeneratorProgram> generators,
                                        int per_generator, const ResourceLimits& limits,
                                        std::uint64_t seed);

/// Executes candidates on tests that carry outputs, using the
/// sandbox's normalized-equality relation.
PassMatrix build_pass_matrix(const Sandbox& sandbox,
                             std::span<const CandidateSolution> candidates,
                             std::span<const TestCase> tests, const ResourceLimits& limits);

}  // namespace av
