#include "av/harness.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "av/errors.hpp"
#include "av/synthesis.hpp"
#include "av/util.hpp"

namespace av {

namespace {

using nlohmann::json;

}  // namespace

double pass_at_1(const EvalPool& pool) {
  if (pool.n() < 1) throw EmptyPoolError("pass_at_1: empty candidate pool");
  int correct = static_cast<int>(std::count(pool.correct.begin(), pool.correct.end(), true));
  return static_cast<double>(correct) / pool.n();
}

Selector vanilla_eval_selector() {
  return [](const EvalPool&, std::span<const int> drawn, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return static_cast<int>(uniform_below(rng, drawn.size()));
  };
}

Selector oracle_eval_selector() {
  return [](const EvalPool& pool, std::span<const int> drawn, std::uint64_t) {
    for (std::size_t p = 0; p < drawn.size(); ++p) {
      if (pool.correct[static_cast<std::size_t>(drawn[p])]) return static_cast<int>(p);
    }
    return 0;
  };
}

BestAtKReport best_at_k(const EvalPool& pool, int k, int repeats, const Selector& selector,
                        std::uint64_t seed) {
  const int n = pool.n();
  if (n < 1) throw EmptyPoolError("best_at_k: empty candidate pool");
  if (k < 1 || k > n) {
    throw BadKError("best_at_k: k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  if (repeats < 1) throw BadKError("best_at_k: repeats must be >= 1");
  if (k == n) repeats = 1;  // the draw is the whole pool

  BestAtKReport report;
  report.k = k;
  report.repeats = repeats;
  report.selections.reserve(static_cast<std::size_t>(repeats));

  double sum = 0.0, sum_sq = 0.0;
  for (int r = 0; r < repeats; ++r) {
    std::vector<int> drawn;
    if (k == n) {
      drawn.resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) drawn[static_cast<std::size_t>(i)] = i;
    } else {
      std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
      drawn = sample_without_replacement(rng, n, k);
    }
    int pos = selector(pool, drawn, mix_seed(seed, 0x5e1ec700ULL + static_cast<std::uint64_t>(r)));
    if (pos < 0 || pos >= k) {
      throw Error(ErrorCode::internal, "selector returned position outside the draw");
    }
    int chosen = drawn[static_cast<std::size_t>(pos)];
    report.selections.push_back(chosen);
    double score = pool.correct[static_cast<std::size_t>(chosen)] ? 1.0 : 0.0;
    sum += score;
    sum_sq += score * score;
  }
  report.mean = sum / repeats;
  double variance = repeats > 1 ? (sum_sq - sum * sum / repeats) / (repeats - 1) : 0.0;
  report.stddev = std::sqrt(std::max(0.0, variance));
  return report;
}

// ------------------------------------------------------------- methods

const std::vector<std::string> kMethodNames = {
    "vanilla", "mbr-hard", "mbr-soft", "codet", "coderm", "randgen", "agentic"};

namespace {

OutcomeMatrix restrict_rows(const OutcomeMatrix& m, std::span<const int> rows) {
  OutcomeMatrix sub;
  sub.outcomes.reserve(rows.size());
  for (int r : rows) sub.outcomes.push_back(m.outcomes[static_cast<std::size_t>(r)]);
  return sub;
}

PassMatrix restrict_rows(const PassMatrix& m, std::span<const int> rows) {
  PassMatrix sub;
  sub.passes.reserve(rows.size());
  for (int r : rows) sub.passes.push_back(m.passes[static_cast<std::size_t>(r)]);
  return sub;
}

std::vector<TestCase> load_cases_file(const std::filesystem::path& path) {
  std::vector<TestCase> cases;
  std::istringstream in(read_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": malformed test case");
    }
    cases.push_back(test_case_from_json(j));
  }
  return cases;
}

ResourceLimits problem_limits(const Problem& problem) {
  ResourceLimits limits;
  limits.time_limit_ms = problem.time_limit_ms;
  limits.memory_limit_kib = problem.memory_limit_kib;
  return limits;
}

bool needs_pass_matrix(const std::string& method) {
  return method == "codet" || method == "coderm";
}

bool needs_outcome_matrix(const std::string& method) {
  return method == "mbr-hard" || method == "mbr-soft" || method == "randgen";
}

}  // namespace

MethodContext build_method_context(const Sandbox& sandbox, const Problem& problem,
                                   std::span<const CandidateSolution> candidates,
                                   const std::string& method, const std::string& inputs_source,
                                   int budget, std::uint64_t seed,
                                   const EpisodeConfig& episode) {
  if (std::find(kMethodNames.begin(), kMethodNames.end(), method) == kMethodNames.end()) {
    throw ConfigError("unknown method \"" + method + "\"");
  }
  MethodContext context;
  context.method = method;
  ResourceLimits limits = problem_limits(problem);

  if (method == "vanilla") return context;

  if (method == "agentic") {
    EpisodeConfig cfg = episode;
    if (!cfg.backend) {
      if (inputs_source.rfind("script:", 0) == 0 || inputs_source.rfind("http", 0) == 0) {
        cfg.backend = make_backend(inputs_source);
      } else {
        throw ConfigError("method agentic requires a backend inputs source "
                          "(script:<path> or http(s)://...)");
      }
    }
    cfg.seed = seed;
    int episodes = budget > 0 ? budget : 8;
    context.agentic = agentic_select(sandbox, problem, candidates, cfg, episodes);
    if (!context.agentic->inputs.empty()) {
      for (const auto& ci : context.agentic->inputs) context.inputs.push_back(ci.input);
      context.matrix = std::make_shared<OutcomeMatrix>(
          build_outcome_matrix(sandbox, candidates, context.inputs, limits));
    }
    return context;
  }

  // materialize tests / inputs for the offline methods
  std::vector<TestCase> cases;
  if (inputs_source == "suite") {
    cases = problem.tests;
  } else if (inputs_source.rfind("file:", 0) == 0) {
    cases = load_cases_file(inputs_source.substr(5));
  } else if (inputs_source.rfind("cases:", 0) == 0) {
    cases = load_cases_file(inputs_source.substr(6));
  } else if (inputs_source.rfind("generators:", 0) == 0) {
    auto generators = load_generators(inputs_source.substr(11));
    if (generators.empty()) throw ConfigError("generators file is empty");
    int per_generator =
        budget > 0 ? std::max(1, budget / static_cast<int>(generators.size())) : 8;
    GeneratedInputs generated =
        random_generator_inputs(sandbox, generators, per_generator, limits, seed);
    context.generator_skips = generated.skipped;
    for (auto& input : generated.inputs) cases.push_back({std::move(input), std::nullopt});
  } else {
    throw ConfigError("method " + method + " cannot use inputs source \"" + inputs_source + "\"");
  }

  if (method == "randgen" && inputs_source.rfind("generators:", 0) != 0) {
    throw ConfigError("method randgen requires inputs_source generators:<path>");
  }

  if (budget > 0 && static_cast<int>(cases.size()) > budget) {
    cases.resize(static_cast<std::size_t>(budget));
  }

  if (needs_pass_matrix(method)) {
    context.pass = std::make_shared<PassMatrix>(
        build_pass_matrix(sandbox, candidates, cases, limits));
    for (auto& c : cases) context.inputs.push_back(std::move(c.input));
    return context;
  }
  if (needs_outcome_matrix(method)) {
    for (auto& c : cases) context.inputs.push_back(std::move(c.input));
    context.matrix = std::make_shared<OutcomeMatrix>(
        build_outcome_matrix(sandbox, candidates, context.inputs, limits));
    return context;
  }
  throw ConfigError("unhandled method \"" + method + "\"");
}

int select_full(const MethodContext& context, int candidate_count, std::uint64_t seed) {
  if (candidate_count < 1) throw EmptyPoolError("select_full: empty candidate pool");
  if (context.method == "vanilla") return vanilla_select(candidate_count, seed);
  if (context.method == "mbr-hard") return mbr_exec_select(*context.matrix, MbrMode::hard);
  if (context.method == "mbr-soft") return mbr_exec_select(*context.matrix, MbrMode::soft);
  if (context.method == "codet") return codet_select(*context.pass);
  if (context.method == "coderm") return coderm_select(*context.pass);
  if (context.method == "randgen" || context.method == "agentic") {
    if (!context.matrix) return vanilla_select(candidate_count, seed);  // agentic fallback
    return select_best(aggregate_votes(agreement_scores(*context.matrix)), seed);
  }
  throw ConfigError("unknown method \"" + context.method + "\"");
}

std::vector<double> method_scores(const MethodContext& context, int candidate_count) {
  std::vector<double> scores;
  if (context.method == "vanilla") return scores;
  if (context.matrix && (context.method == "randgen" || context.method == "agentic")) {
    ScoreVector votes = aggregate_votes(agreement_scores(*context.matrix));
    scores.assign(votes.scores.begin(), votes.scores.end());
  } else if (context.pass) {
    for (int i = 0; i < context.pass->candidate_count(); ++i) {
      const auto& row = context.pass->passes[static_cast<std::size_t>(i)];
      scores.push_back(static_cast<double>(std::count(row.begin(), row.end(), true)));
    }
  } else if (context.matrix) {
    // mbr risks, negated so larger is better like every other score
    MbrMode mode = context.method == "mbr-soft" ? MbrMode::soft : MbrMode::hard;
    for (long long r : mbr_exec_risks(*context.matrix, mode)) {
      scores.push_back(-static_cast<double>(r));
    }
  }
  (void)candidate_count;
  return scores;
}

Selector make_method_selector(std::shared_ptr<const MethodContext> context) {
  return [context](const EvalPool&, std::span<const int> drawn, std::uint64_t seed) -> int {
    const std::string& method = context->method;
    if (method == "vanilla" ||
        ((method == "agentic" || method == "randgen") && !context->matrix)) {
      std::mt19937_64 rng(seed);
      return static_cast<int>(uniform_below(rng, drawn.size()));
    }
    if (method == "codet") return codet_select(restrict_rows(*context->pass, drawn));
    if (method == "coderm") return coderm_select(restrict_rows(*context->pass, drawn));
    OutcomeMatrix sub = restrict_rows(*context->matrix, drawn);
    if (method == "mbr-hard") return mbr_exec_select(sub, MbrMode::hard);
    if (method == "mbr-soft") return mbr_exec_select(sub, MbrMode::soft);
    return select_best(aggregate_votes(agreement_scores(sub)), seed);
  };
}

// ------------------------------------------------------------- experiments

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig cfg;
  if (!j.is_object()) throw ConfigError("experiment config: expected a JSON object");
  if (j.contains("corpus_root")) cfg.corpus_root = j["corpus_root"].get<std::string>();
  if (j.contains("problems")) cfg.problems = j["problems"].get<std::vector<std::string>>();
  if (j.contains("method")) cfg.method = j["method"].get<std::string>();
  if (j.contains("inputs")) cfg.inputs_source = j["inputs"].get<std::string>();
  if (j.contains("budget")) cfg.budget = j["budget"].get<int>();
  if (j.contains("k")) cfg.k = j["k"].get<int>();
  if (j.contains("repeats")) cfg.repeats = j["repeats"].get<int>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("max_turns")) cfg.max_turns = j["max_turns"].get<int>();
  if (j.contains("judge_attempts")) cfg.judge_attempts = j["judge_attempts"].get<int>();
  if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
  if (j.contains("prompts_dir")) cfg.prompts_dir = j["prompts_dir"].get<std::string>();
  if (std::find(kMethodNames.begin(), kMethodNames.end(), cfg.method) == kMethodNames.end()) {
    throw ConfigError("experiment config: unknown method \"" + cfg.method + "\"");
  }
  return cfg;
}

std::vector<DifficultyRow> difficulty_breakdown(std::span<const ProblemResult> rows) {
  const char* buckets[] = {"easy", "medium", "hard", "unlabeled"};
  std::vector<DifficultyRow> table;
  for (const char* bucket : buckets) {
    DifficultyRow row;
    row.difficulty = bucket;
    double sum = 0.0;
    for (const auto& r : rows) {
      if (r.failed()) continue;
      std::string key = r.difficulty ? to_string(*r.difficulty) : "unlabeled";
      if (key == bucket) {
        ++row.problems;
        sum += r.report.mean;
      }
    }
    if (row.problems > 0) {
      row.mean = sum / row.problems;
      table.push_back(row);
    }
  }
  return table;
}

json to_json(const BestAtKReport& report) {
  return json{{"k", report.k},
              {"repeats", report.repeats},
              {"mean", report.mean},
              {"stddev", report.stddev},
              {"selections", report.selections}};
}

json to_json(const ProblemResult& row) {
  json j;
  j["problem_id"] = row.problem_id;
  if (row.difficulty) j["difficulty"] = to_string(*row.difficulty);
  if (row.failed()) {
    j["error"] = row.error;
    return j;
  }
  j["pass_at_1"] = row.pool_pass_at_1;
  j["best_at_k"] = to_json(row.report);
  j["selected_full"] = row.selected_full;
  j["run_id"] = row.run_id;
  j["inputs_used"] = row.inputs_used;
  if (row.episodes_attempted > 0) {
    j["episodes_attempted"] = row.episodes_attempted;
    j["episodes_succeeded"] = row.episodes_succeeded;
    j["fallback_vanilla"] = row.fallback_vanilla;
  }
  return j;
}

ExperimentReport run_experiment(const Sandbox& sandbox, const ExperimentConfig& config) {
  Corpus corpus(config.corpus_root);
  if (!std::filesystem::exists(corpus.problems_path())) {
    throw ConfigError("corpus has no problems.jsonl under " + config.corpus_root.string());
  }
  std::vector<Problem> problems = corpus.problems();
  if (!config.problems.empty()) {
    std::set<std::string> want(config.problems.begin(), config.problems.end());
    std::erase_if(problems, [&](const Problem& p) { return !want.contains(p.id); });
    for (const auto& id : want) {
      if (std::none_of(problems.begin(), problems.end(),
                       [&](const Problem& p) { return p.id == id; })) {
        throw ConfigError("experiment references unknown problem \"" + id + "\"");
      }
    }
  }
  std::sort(problems.begin(), problems.end(),
            [](const Problem& a, const Problem& b) { return a.id < b.id; });

  ExperimentReport report;
  for (const Problem& problem : problems) {
    ProblemResult row;
    row.problem_id = problem.id;
    row.difficulty = problem.difficulty;
    try {
      auto candidates = corpus.candidates(problem.id);
      if (candidates.empty()) throw EmptyPoolError("no candidates for problem " + problem.id);
      if (problem.tests.empty()) {
        throw ConfigError("problem " + problem.id + " has no ground-truth suite");
      }
      LabeledPool labeled = label_candidates(sandbox, problem, candidates, problem.tests);
      EvalPool pool;
      pool.problem_id = problem.id;
      for (const auto& c : labeled.candidates) pool.correct.push_back(c.label == Label::correct);
      row.pool_pass_at_1 = pass_at_1(pool);

      EpisodeConfig episode;
      episode.max_turns = config.max_turns;
      episode.judge_attempts = config.judge_attempts;
      episode.prompts_dir = config.prompts_dir;
      episode.trajectory_dir = corpus.trajectories_dir();
      auto context = std::make_shared<MethodContext>(
          build_method_context(sandbox, problem, candidates, config.method,
                               config.inputs_source, config.budget, config.seed, episode));
      row.inputs_used = static_cast<int>(context->inputs.size());
      if (context->agentic) {
        row.episodes_attempted = context->agentic->episodes_attempted;
        row.episodes_succeeded = context->agentic->episodes_succeeded;
        row.fallback_vanilla = context->agentic->fallback_vanilla;
      }

      int k = std::min(config.k, pool.n());
      row.report = best_at_k(pool, k, config.repeats, make_method_selector(context), config.seed);
      row.selected_full = select_full(*context, pool.n(), config.seed);

      RunRecord record;
      record.method = config.method;
      record.problem_id = problem.id;
      record.selected_index = row.selected_full;
      record.scores = method_scores(*context, pool.n());
      record.seed = config.seed;
      row.run_id = store_run(record, config.corpus_root);
    } catch (const Error& e) {
      row.error = e.what();
    }
    report.rows.push_back(std::move(row));
  }

  report.by_difficulty = difficulty_breakdown(report.rows);

  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  json summary;
  summary["method"] = config.method;
  summary["inputs"] = config.inputs_source;
  summary["k"] = config.k;
  summary["repeats"] = config.repeats;
  summary["seed"] = config.seed;
  summary["problems"] = json::array();
  for (const auto& row : report.rows) summary["problems"].push_back(to_json(row));
  summary["by_difficulty"] = json::array();
  for (const auto& d : report.by_difficulty) {
    summary["by_difficulty"].push_back(
        json{{"difficulty", d.difficulty}, {"problems", d.problems}, {"mean", d.mean}});
  }
  report.summary_path = config.out_dir / "summary.json";
  write_file(report.summary_path, summary.dump(2) + "\n");
  return report;
}

}  // namespace av
