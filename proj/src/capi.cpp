#include "av/capi.h"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <json.hpp>

#include "av/agent.hpp"
#include "av/baselines.hpp"
#include "av/corpus.hpp"
#include "av/errors.hpp"
#include "av/genlab.hpp"
#include "av/harness.hpp"
#include "av/sandbox.hpp"
#include "av/synthesis.hpp"
#include "av/util.hpp"
#include "av/voting.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

struct av_engine {
  av::SandboxConfig sandbox_config;
  std::unique_ptr<av::Sandbox> sandbox;
  fs::path corpus_root = ".";
  fs::path prompts_dir;
  av::ResourceLimits limits;
  std::string last_error;
};

namespace {

thread_local std::string g_create_error;

av_status status_from(av::ErrorCode code) {
  switch (code) {
    case av::ErrorCode::parse: return AV_ERR_PARSE;
    case av::ErrorCode::constraint: return AV_ERR_CONSTRAINT;
    case av::ErrorCode::mismatch: return AV_ERR_MISMATCH;
    case av::ErrorCode::io: return AV_ERR_IO;
    case av::ErrorCode::sandbox: return AV_ERR_SANDBOX;
    case av::ErrorCode::config: return AV_ERR_CONFIG;
    case av::ErrorCode::empty_pool: return AV_ERR_EMPTY_POOL;
    case av::ErrorCode::pool_too_small: return AV_ERR_POOL_TOO_SMALL;
    case av::ErrorCode::bad_k: return AV_ERR_BAD_K;
    case av::ErrorCode::backend: return AV_ERR_BACKEND;
    case av::ErrorCode::internal: return AV_ERR_INTERNAL;
  }
  return AV_ERR_INTERNAL;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse_request(const char* request_json) {
  if (!request_json || !*request_json) return json::object();
  json j = json::parse(request_json, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw av::ParseError("request: malformed JSON object");
  return j;
}

/// Runs fn under the engine's error contract, mapping exceptions to
/// status codes and stashing the message.
template <typename Fn>
av_status guarded(av_engine* engine, char** out_json, Fn&& fn) {
  if (!engine) return AV_ERR_CONFIG;
  engine->last_error.clear();
  try {
    json result = fn();
    if (out_json) *out_json = dup_string(result.dump(2));
    return AV_OK;
  } catch (const av::Error& e) {
    engine->last_error = e.what();
    return status_from(e.code());
  } catch (const std::exception& e) {
    engine->last_error = e.what();
    return AV_ERR_INTERNAL;
  }
}

av::EvalPool pool_from_json(const json& j) {
  av::EvalPool pool;
  if (!j.is_object() || !j.contains("correct") || !j["correct"].is_array()) {
    throw av::ParseError("pool: expected {\"problem_id\", \"correct\": [...]}");
  }
  pool.problem_id = j.value("problem_id", "");
  for (const auto& v : j["correct"]) pool.correct.push_back(v.get<bool>());
  return pool;
}

std::vector<std::string> load_raw_inputs(const fs::path& path) {
  std::vector<std::string> inputs;
  std::istringstream in(av::read_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("input")) {
      throw av::ParseError(path.string() + ":" + std::to_string(lineno) +
                           ": expected {\"input\": <base64>}");
    }
    inputs.push_back(av::base64_decode(j["input"].get<std::string>()));
  }
  return inputs;
}

}  // namespace

extern "C" {

const char* av_version(void) { return "0.1.0"; }

const char* av_status_name(av_status status) {
  switch (status) {
    case AV_OK: return "ok";
    case AV_ERR_PARSE: return "parse_error";
    case AV_ERR_CONSTRAINT: return "constraint_error";
    case AV_ERR_MISMATCH: return "mismatch_error";
    case AV_ERR_IO: return "io_error";
    case AV_ERR_SANDBOX: return "sandbox_error";
    case AV_ERR_CONFIG: return "config_error";
    case AV_ERR_EMPTY_POOL: return "empty_pool";
    case AV_ERR_POOL_TOO_SMALL: return "pool_too_small";
    case AV_ERR_BAD_K: return "bad_k";
    case AV_ERR_BACKEND: return "backend_error";
    case AV_ERR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

av_status av_engine_create(const char* config_json, av_engine** out_engine) {
  if (!out_engine) return AV_ERR_CONFIG;
  *out_engine = nullptr;
  g_create_error.clear();
  try {
    json cfg = parse_request(config_json);
    auto engine = std::make_unique<av_engine>();
    if (cfg.contains("corpus_root")) engine->corpus_root = cfg["corpus_root"].get<std::string>();
    if (cfg.contains("prompts_dir")) engine->prompts_dir = cfg["prompts_dir"].get<std::string>();
    auto& sc = engine->sandbox_config;
    if (cfg.contains("python")) sc.python_path = cfg["python"].get<std::string>();
    if (cfg.contains("cxx")) sc.cxx_path = cfg["cxx"].get<std::string>();
    if (cfg.contains("cxx_flags")) sc.cxx_flags = cfg["cxx_flags"].get<std::vector<std::string>>();
    if (cfg.contains("env_allowlist"))
      sc.env_allowlist = cfg["env_allowlist"].get<std::vector<std::string>>();
    if (cfg.contains("scratch_root")) sc.scratch_root = cfg["scratch_root"].get<std::string>();
    if (cfg.contains("workers")) sc.workers = cfg["workers"].get<int>();
    if (cfg.contains("drop_privileges")) sc.drop_privileges = cfg["drop_privileges"].get<bool>();
    if (cfg.contains("isolate_network")) sc.isolate_network = cfg["isolate_network"].get<bool>();
    if (cfg.contains("limits")) {
      const json& lim = cfg["limits"];
      auto& l = engine->limits;
      if (lim.contains("time_limit_ms")) l.time_limit_ms = lim["time_limit_ms"].get<std::int64_t>();
      if (lim.contains("memory_limit_kib"))
        l.memory_limit_kib = lim["memory_limit_kib"].get<std::int64_t>();
      if (lim.contains("output_limit_bytes"))
        l.output_limit_bytes = lim["output_limit_bytes"].get<std::int64_t>();
      if (lim.contains("compile_time_limit_ms"))
        l.compile_time_limit_ms = lim["compile_time_limit_ms"].get<std::int64_t>();
      if (l.time_limit_ms < 1 || l.memory_limit_kib < 1 || l.output_limit_bytes < 1 ||
          l.compile_time_limit_ms < 1) {
        throw av::ConstraintError("limits: all limits must be positive");
      }
    }
    engine->sandbox = std::make_unique<av::Sandbox>(sc);
    *out_engine = engine.release();
    return AV_OK;
  } catch (const av::Error& e) {
    g_create_error = e.what();
    return status_from(e.code());
  } catch (const std::exception& e) {
    g_create_error = e.what();
    return AV_ERR_INTERNAL;
  }
}

void av_engine_destroy(av_engine* engine) { delete engine; }

const char* av_engine_last_error(const av_engine* engine) {
  return engine ? engine->last_error.c_str() : g_create_error.c_str();
}

void av_string_free(char* s) { std::free(s); }

av_status av_ingest(av_engine* engine, const char* problems_path, const char* candidates_dir,
                    char** out_json) {
  return guarded(engine, out_json, [&]() -> json {
    if (!problems_path) throw av::ConfigError("ingest: problems path required");
    auto problems = av::load_problems(problems_path);
    std::error_code ec;
    fs::create_directories(engine->corpus_root, ec);
    av::save_problems(problems, engine->corpus_root / "problems.jsonl");

    int bundles = 0;
    std::size_t total = 0;
    if (candidates_dir && *candidates_dir) {
      fs::create_directories(engine->corpus_root / "candidates", ec);
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(candidates_dir)) {
        if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& file : files) {
        std::string id = file.stem().string();
        bool known = std::any_of(problems.begin(), problems.end(),
                                 [&](const av::Problem& p) { return p.id == id; });
        if (!known) {
          throw av::ConstraintError("candidate bundle " + file.string() +
                                    " references unknown problem \"" + id + "\"");
        }
        auto candidates = av::load_candidates(file, id);
        av::save_candidates(candidates, engine->corpus_root / "candidates" / (id + ".jsonl"));
        total += candidates.size();
        ++bundles;
      }
    }
    return json{{"problems", problems.size()}, {"bundles", bundles}, {"candidates", total}};
  });
}

av_status av_judge(av_engine* engine, const char* problem_id, const char* suite,
                   char** out_json) {
  return guarded(engine, out_json, [&]() -> json {
    if (!problem_id) throw av::ConfigError("judge: problem id required");
    std::string suite_name = suite ? suite : "ground-truth";
    if (suite_name != "ground-truth") {
      throw av::ConfigError("judge: unsupported suite \"" + suite_name +
                            "\" (expected ground-truth)");
    }
    av::Corpus corpus(engine->corpus_root);
    av::Problem problem = corpus.problem(problem_id);
    if (problem.tests.empty()) {
      throw av::ConfigError("judge: problem \"" + problem.id + "\" has no ground-truth suite");
    }
    auto candidates = corpus.candidates(problem_id);
    if (candidates.empty()) throw av::EmptyPoolError("judge: empty candidate bundle");

    av::LabeledPool pool =
        av::label_candidates(*engine->sandbox, problem, candidates, problem.tests);
    av::save_candidates(pool.candidates, corpus.candidates_path(problem_id));

    int correct = 0;
    json labels = json::array();
    for (const auto& c : pool.candidates) {
      labels.push_back(av::to_string(c.label));
      if (c.label == av::Label::correct) ++correct;
    }
    return json{{"problem", problem.id},
                {"n", pool.candidates.size()},
                {"correct", correct},
                {"pass_at_1", static_cast<double>(correct) / pool.candidates.size()},
                {"labels", labels}};
  });
}

av_status av_select(av_engine* engine, const char* request_json, char** out_json) {
  return guarded(engine, out_json, [&]() -> json {
    json req = parse_request(request_json);
    std::string method = req.value("method", "");
    std::string problem_id = req.value("problem", "");
    if (method.empty() || problem_id.empty()) {
      throw av::ConfigError("select: method and problem are required");
    }
    std::string inputs_source = req.value("inputs", "suite");
    int budget = req.value("budget", 0);
    auto seed = req.value("seed", std::uint64_t{0});

    av::Corpus corpus(engine->corpus_root);
    av::Problem problem = corpus.problem(problem_id);
    auto candidates = corpus.candidates(problem_id);
    if (candidates.empty()) throw av::EmptyPoolError("select: empty candidate bundle");

    av::EpisodeConfig episode;
    episode.max_turns = req.value("max_turns", 16);
    episode.judge_attempts = req.value("judge_attempts", av::kDefaultJudgeAttempts);
    episode.prompts_dir = engine->prompts_dir;
    episode.trajectory_dir = corpus.trajectories_dir();

    av::MethodContext context =
        av::build_method_context(*engine->sandbox, problem, candidates, method, inputs_source,
                                 budget, seed, episode);
    int n = static_cast<int>(candidates.size());
    int selected = av::select_full(context, n, seed);
    std::vector<double> scores = av::method_scores(context, n);

    av::RunRecord record;
    record.method = method;
    record.problem_id = problem_id;
    record.selected_index = selected;
    record.scores = scores;
    record.seed = seed;
    std::string run_id = av::store_run(record, engine->corpus_root);

    json out{{"method", method},     {"problem", problem_id},
             {"n", n},               {"selected_index", selected},
             {"scores", scores},     {"seed", seed},
             {"run_id", run_id},     {"inputs_used", context.inputs.size()}};
    if (context.generator_skips > 0) out["generator_skips"] = context.generator_skips;
    if (context.agentic) {
      json provenance = json::array();
      for (const auto& ci : context.agentic->inputs) {
        provenance.push_back(json{{"episode", ci.episode_id},
                                  {"pair", json::array({ci.pair_a, ci.pair_b})},
                                  {"input", av::base64_encode(ci.input)}});
      }
      out["provenance"] = provenance;
      out["episodes_attempted"] = context.agentic->episodes_attempted;
      out["episodes_succeeded"] = context.agentic->episodes_succeeded;
      out["fallback_vanilla"] = context.agentic->fallback_vanilla;
    }
    return out;
  });
}

av_status av_synth(av_engine* engine, const char* request_json, char** out_json) {
  return guarded(engine, out_json, [&]() -> json {
    json req = parse_request(request_json);
    std::string problem_id = req.value("problem", "");
    std::string refs_path = req.value("refs", "");
    std::string raw_inputs_path = req.value("raw_inputs", "");
    if (problem_id.empty() || refs_path.empty() || raw_inputs_path.empty()) {
      throw av::ConfigError("synth: problem, refs and raw_inputs are required");
    }
    av::ConsensusConfig cfg;
    cfg.agreement_threshold = req.value("tau", 0.8);
    cfg.max_suite_size = req.value("max_suite", 60);
    bool write_back = req.value("write_back", true);

    av::Corpus corpus(engine->corpus_root);
    std::vector<av::Problem> problems = corpus.problems();
    auto it = std::find_if(problems.begin(), problems.end(),
                           [&](const av::Problem& p) { return p.id == problem_id; });
    if (it == problems.end()) throw av::ConfigError("synth: unknown problem \"" + problem_id + "\"");

    auto refs = av::load_candidates(refs_path, problem_id);
    auto raw_inputs = load_raw_inputs(raw_inputs_path);
    av::SynthesisResult result =
        av::synthesize_tests(*engine->sandbox, *it, refs, raw_inputs, cfg);

    bool written = false;
    if (write_back && !result.suspect_special_judge && !result.tests.empty()) {
      it->tests = result.tests;
      av::save_problems(problems, corpus.problems_path());
      written = true;
    }

    json discards = json::array();
    for (const auto& d : result.discards) {
      discards.push_back(json{{"input_index", d.input_index}, {"reason", d.reason}});
    }
    json report{{"problem", problem_id},
                {"refs", refs.size()},
                {"raw_inputs", raw_inputs.size()},
                {"retained", result.tests.size()},
                {"discards", discards},
                {"suspect_special_judge", result.suspect_special_judge},
                {"written", written}};
    // append-only synthesis log beside the corpus
    std::ofstream log(engine->corpus_root / "synthesis-report.jsonl", std::ios::app);
    log << report.dump() << "\n";
    return report;
  });
}

av_status av_agent_run(av_engine* engine, const char* task_json, const char* backend,
                       int max_turns, char** out_json) {
  return guarded(engine, out_json, [&]() -> json {
    json task_spec = parse_request(task_json);
    if (!backend || !*backend) throw av::ConfigError("agent run: backend descriptor required");
    std::string problem_id = task_spec.value("problem_id", "");
    if (problem_id.empty()) throw av::ConfigError("agent run: task needs problem_id");
    int a = task_spec.value("a", 0);
    int b = task_spec.value("b", 1);

    av::Corpus corpus(engine->corpus_root);
    av::Problem problem = corpus.problem(problem_id);
    auto candidates = corpus.candidates(problem_id);

    av::ResourceLimits limits = engine->limits;
    limits.time_limit_ms = problem.time_limit_ms;
    limits.memory_limit_kib = problem.memory_limit_kib;
    av::TaskInstance task = av::make_task(problem, candidates, a, b, limits);

    av::EpisodeConfig cfg;
    cfg.backend = av::make_backend(backend);
    cfg.max_turns = max_turns > 0 ? max_turns : 16;
    cfg.judge_attempts = task_spec.value("judge_attempts", av::kDefaultJudgeAttempts);
    cfg.seed = task_spec.value("seed", std::uint64_t{0});
    cfg.prompts_dir = engine->prompts_dir;
    cfg.trajectory_dir = corpus.trajectories_dir();

    av::Trajectory trajectory = av::run_episode(*engine->sandbox, task, cfg);
    json out{{"task_id", trajectory.task_id},
             {"turns", trajectory.turn_count()},
             {"success", trajectory.verdict.success},
             {"best_reward", trajectory.verdict.best_reward},
             {"attempts_run", trajectory.verdict.attempts_run},
             {"backend_failed", trajectory.backend_failed}};
    if (trajectory.verdict.witness) {
      out["witness"] = av::base64_encode(*trajectory.verdict.witness);
    }
    return out;
  });
}

av_status av_best_at_k(av_engine* engine, const char* request_json, char** out_json) {
  return guarded(engine, out_json, [&]() -> json {
    json req = parse_request(request_json);
    av::EvalPool pool;
    if (req.contains("pool_inline")) {
      pool = pool_from_json(req["pool_inline"]);
    } else if (req.contains("pool")) {
      json j = json::parse(av::read_file(req["pool"].get<std::string>()), nullptr, false);
      if (j.is_discarded()) throw av::ParseError("pool file: malformed JSON");
      pool = pool_from_json(j);
    } else {
      throw av::ConfigError("best-at-k: pool or pool_inline required");
    }
    int k = req.value("k", 8);
    int repeats = req.value("repeats", 100);
    auto seed = req.value("seed", std::uint64_t{0});
    std::string method = req.value("method", "vanilla");
    av::Selector selector;
    if (method == "vanilla") selector = av::vanilla_eval_selector();
    else if (method == "oracle") selector = av::oracle_eval_selector();
    else throw av::ConfigError("best-at-k: method must be vanilla or oracle");

    av::BestAtKReport report = av::best_at_k(pool, k, repeats, selector, seed);
    json out = av::to_json(report);
    out["pass_at_1"] = av::pass_at_1(pool);
    out["method"] = method;
    return out;
  });
}

av_status av_experiment(av_engine* engine, const char* config_path, char** out_json) {
  return guarded(engine, out_json, [&]() -> json {
    if (!config_path) throw av::ConfigError("experiment: config path required");
    json j = json::parse(av::read_file(config_path), nullptr, false);
    if (j.is_discarded()) throw av::ParseError("experiment config: malformed JSON");
    av::ExperimentConfig cfg = av::experiment_config_from_json(j);
    if (!j.contains("corpus_root")) cfg.corpus_root = engine->corpus_root;
    if (!j.contains("prompts_dir")) cfg.prompts_dir = engine->prompts_dir;

    av::ExperimentReport report = av::run_experiment(*engine->sandbox, cfg);
    json rows = json::array();
    for (const auto& row : report.rows) rows.push_back(av::to_json(row));
    json by_difficulty = json::array();
    for (const auto& d : report.by_difficulty) {
      by_difficulty.push_back(
          json{{"difficulty", d.difficulty}, {"problems", d.problems}, {"mean", d.mean}});
    }
    return json{{"summary_path", report.summary_path.string()},
                {"problems", rows},
                {"by_difficulty", by_difficulty}};
  });
}

}  // extern "C"
