#include "av/agent.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "av/errors.hpp"
#include "av/util.hpp"

namespace av {

namespace {

using nlohmann::json;

constexpr const char* kDefaultSystemPrompt = R"(You are a test-input verifier for competitive programming. Given a problem and two candidate solutions that both claim to solve it, your goal is to find a valid test input on which the two solutions behave differently.

You interact with a code execution sandbox through tools:
- execute_code: run a program (guest_language "py" or "cpp") on a chosen stdin and inspect verdict and output.
- submit_generator: submit your final input generator program and end the episode. The generator receives a random seed as its first command-line argument and must print exactly one test input to stdout.

Work step by step: study both solutions, form hypotheses about where they diverge, probe them with execute_code, then submit a generator that samples such inputs. Generated inputs must satisfy the problem's input constraints.)";

constexpr const char* kDefaultTaskPrompt = R"(Problem statement:
{{statement}}

Time limit: {{time_limit_ms}} ms. Memory limit: {{memory_limit_kib}} KiB.

Candidate solution A ({{language_a}}):
---
{{candidate_a}}
---

Candidate solution B ({{language_b}}):
---
{{candidate_b}}
---

Find a valid input on which A and B produce different results, then submit an input generator program that prints such inputs.)";

std::string replace_all(std::string text, const std::string& needle, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), value);
    pos += value.size();
  }
  return text;
}

std::string load_template(const std::filesystem::path& dir, const char* file,
                          const char* fallback) {
  if (!dir.empty()) {
    auto path = dir / file;
    if (std::filesystem::exists(path)) return read_file(path);
  }
  return fallback;
}

std::string render_task_prompt(const std::string& tmpl, const TaskInstance& task) {
  std::string text = tmpl;
  text = replace_all(text, "{{statement}}", task.problem.statement);
  text = replace_all(text, "{{time_limit_ms}}", std::to_string(task.problem.time_limit_ms));
  text = replace_all(text, "{{memory_limit_kib}}", std::to_string(task.problem.memory_limit_kib));
  text = replace_all(text, "{{candidate_a}}", task.candidate_a.source);
  text = replace_all(text, "{{candidate_b}}", task.candidate_b.source);
  text = replace_all(text, "{{language_a}}", to_string(task.candidate_a.guest_language));
  text = replace_all(text, "{{language_b}}", to_string(task.candidate_b.guest_language));
  return text;
}

/// Parses a chat-completion assistant message (tool_calls optional;
/// arguments either a JSON object or a JSON-encoded string).
ChatMessage assistant_from_wire(const json& m) {
  ChatMessage msg;
  msg.role = "assistant";
  if (m.contains("content") && m["content"].is_string()) {
    msg.content = m["content"].get<std::string>();
  }
  if (m.contains("tool_calls") && m["tool_calls"].is_array() && !m["tool_calls"].empty()) {
    const json& tc = m["tool_calls"].front();
    ToolCall call;
    call.id = tc.value("id", "call_0");
    if (tc.contains("function")) {
      call.tool = tc["function"].value("name", "");
      const json& args = tc["function"].contains("arguments") ? tc["function"]["arguments"] : json::object();
      if (args.is_string()) {
        json parsed = json::parse(args.get<std::string>(), nullptr, false);
        call.arguments = parsed.is_discarded() ? json::object() : parsed;
      } else if (args.is_object()) {
        call.arguments = args;
      }
    }
    msg.tool_call = std::move(call);
  }
  return msg;
}

json assistant_to_wire(const ChatMessage& msg) {
  json m;
  m["role"] = "assistant";
  m["content"] = msg.content;
  if (msg.tool_call) {
    m["tool_calls"] = json::array({json{
        {"id", msg.tool_call->id},
        {"type", "function"},
        {"function",
         json{{"name", msg.tool_call->tool}, {"arguments", msg.tool_call->arguments.dump()}}}}});
  }
  return m;
}

json tools_definition() {
  json execute_code = {
      {"type", "function"},
      {"function",
       {{"name", "execute_code"},
        {"description",
         "Compile and run a program in the sandbox. Returns verdict and captured output."},
        {"parameters",
         {{"type", "object"},
          {"properties",
           {{"guest_language", {{"type", "string"}, {"enum", {"py", "cpp"}}}},
            {"source", {{"type", "string"}}},
            {"stdin", {{"type", "string"}}},
            {"time_limit_ms", {{"type", "integer"}}}}},
          {"required", {"guest_language", "source"}}}}}}};
  json submit_generator = {
      {"type", "function"},
      {"function",
       {{"name", "submit_generator"},
        {"description",
         "Submit the final input generator program; the episode ends and the generator is judged."},
        {"parameters",
         {{"type", "object"},
          {"properties",
           {{"guest_language", {{"type", "string"}, {"enum", {"py", "cpp"}}}},
            {"source", {{"type", "string"}}}}},
          {"required", {"guest_language", "source"}}}}}}};
  return json::array({execute_code, submit_generator});
}

}  // namespace

// ---------------------------------------------------------------- backends

ScriptedBackend::ScriptedBackend(const std::filesystem::path& transcript_path)
    : ScriptedBackend([&] {
        json j = json::parse(read_file(transcript_path), nullptr, false);
        if (j.is_discarded()) {
          throw ParseError("scripted transcript: malformed JSON in " + transcript_path.string());
        }
        return j;
      }()) {}

ScriptedBackend::ScriptedBackend(nlohmann::json transcript) {
  if (!transcript.is_array()) {
    throw ParseError("scripted transcript: expected a JSON array of assistant messages");
  }
  for (const auto& m : transcript) responses_.push_back(assistant_from_wire(m));
}

ChatMessage ScriptedBackend::next(const std::vector<ChatMessage>& conversation) {
  std::size_t turn = 0;
  for (const auto& m : conversation) {
    if (m.role == "assistant") ++turn;
  }
  if (turn >= responses_.size()) {
    throw BackendError("scripted transcript exhausted after " + std::to_string(turn) +
                       " responses");
  }
  return responses_[turn];
}

HttpChatBackend::HttpChatBackend(std::string base_url, std::string model,
                                 std::string api_key_env)
    : base_url_(std::move(base_url)), model_(std::move(model)),
      api_key_env_(std::move(api_key_env)) {}

ChatMessage HttpChatBackend::next(const std::vector<ChatMessage>& conversation) {
  // split "scheme://host[:port]/prefix" into client root and path prefix
  std::string root = base_url_;
  std::string prefix;
  auto scheme_end = root.find("://");
  if (scheme_end != std::string::npos) {
    auto path_start = root.find('/', scheme_end + 3);
    if (path_start != std::string::npos) {
      prefix = root.substr(path_start);
      root = root.substr(0, path_start);
    }
  }
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

  json body;
  body["model"] = model_;
  body["tools"] = tools_definition();
  body["messages"] = json::array();
  for (const auto& m : conversation) {
    if (m.role == "assistant") {
      body["messages"].push_back(assistant_to_wire(m));
    } else if (m.role == "tool") {
      body["messages"].push_back(
          json{{"role", "tool"}, {"tool_call_id", m.tool_call_id}, {"content", m.content}});
    } else {
      body["messages"].push_back(json{{"role", m.role}, {"content", m.content}});
    }
  }

  httplib::Client client(root);
  client.set_connection_timeout(30);
  client.set_read_timeout(600);
  httplib::Headers headers;
  if (const char* key = std::getenv(api_key_env_.c_str())) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  auto res = client.Post(prefix + "/chat/completions", headers, body.dump(),
                         "application/json");
  if (!res) {
    throw BackendError("chat backend unreachable: " + base_url_);
  }
  if (res->status != 200) {
    throw BackendError("chat backend returned status " + std::to_string(res->status));
  }
  json reply = json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty()) {
    throw BackendError("chat backend returned a malformed completion");
  }
  return assistant_from_wire(reply["choices"].front()["message"]);
}

std::shared_ptr<ChatBackend> make_backend(const std::string& descriptor) {
  if (descriptor.rfind("script:", 0) == 0) {
    return std::make_shared<ScriptedBackend>(std::filesystem::path(descriptor.substr(7)));
  }
  if (descriptor.rfind("http://", 0) == 0 || descriptor.rfind("https://", 0) == 0) {
    std::string url = descriptor;
    std::string model = "default";
    auto hash = url.find('#');
    if (hash != std::string::npos) {
      model = url.substr(hash + 1);
      url = url.substr(0, hash);
    }
    return std::make_shared<HttpChatBackend>(url, model);
  }
  throw ConfigError("backend descriptor: expected script:<path> or http(s)://... , got \"" +
                    descriptor + "\"");
}

// ---------------------------------------------------------------- episode loop

ToolResult handle_tool_call(const Sandbox& sandbox, const ToolCall& call,
                            const TaskInstance& task, const ResourceLimits& limits,
                            int output_cap_bytes) {
  ToolResult result;
  auto finish = [&](std::string text) {
    if (text.size() > static_cast<std::size_t>(output_cap_bytes)) {
      text.resize(static_cast<std::size_t>(output_cap_bytes));
      result.truncated = true;
    }
    result.content = std::move(text);
    return result;
  };

  if (call.tool != "execute_code") {
    return finish("error: unsupported tool \"" + call.tool + "\"");
  }
  if (!call.arguments.contains("source") || !call.arguments["source"].is_string()) {
    return finish("error: missing field: source");
  }
  if (!call.arguments.contains("guest_language") ||
      !call.arguments["guest_language"].is_string()) {
    return finish("error: missing field: guest_language");
  }
  GuestLanguage lang;
  try {
    lang = guest_language_from_string(call.arguments["guest_language"].get<std::string>());
  } catch (const ParseError& e) {
    return finish(std::string("error: ") + e.what());
  }

  ResourceLimits run_limits = limits;
  if (call.arguments.contains("time_limit_ms") &&
      call.arguments["time_limit_ms"].is_number_integer()) {
    auto requested = call.arguments["time_limit_ms"].get<std::int64_t>();
    if (requested >= 1) run_limits.time_limit_ms = std::min(requested, limits.time_limit_ms * 4);
  }
  std::string stdin_bytes = call.arguments.value("stdin", "");

  CompileResult compiled =
      sandbox.compile(call.arguments["source"].get<std::string>(), lang, run_limits);
  if (!compiled.ok()) {
    return finish("verdict: compile_error\n" + compiled.diagnostic);
  }
  ExecutionOutcome outcome = sandbox.execute(*compiled.artifact, stdin_bytes, run_limits);

  std::ostringstream text;
  text << "verdict: " << to_string(outcome.verdict) << "\n";
  if (outcome.exit_code) text << "exit_code: " << *outcome.exit_code << "\n";
  if (outcome.ok()) {
    text << "output:\n" << outcome.output << "\n";
  }
  if (!outcome.stderr_tail.empty()) {
    text << "stderr:\n" << outcome.stderr_tail << "\n";
  }
  return finish(text.str());
}

namespace {

std::optional<GeneratorProgram> parse_submission(const ToolCall& call) {
  if (!call.arguments.contains("source") || !call.arguments["source"].is_string() ||
      !call.arguments.contains("guest_language") ||
      !call.arguments["guest_language"].is_string()) {
    return std::nullopt;
  }
  GeneratorProgram g;
  g.source = call.arguments["source"].get<std::string>();
  if (g.source.empty()) return std::nullopt;
  try {
    g.guest_language = guest_language_from_string(call.arguments["guest_language"].get<std::string>());
  } catch (const ParseError&) {
    return std::nullopt;
  }
  return g;
}

}  // namespace

Trajectory run_episode(const Sandbox& sandbox, const TaskInstance& task,
                       const EpisodeConfig& config, const std::string& task_id) {
  if (!config.backend) throw ConfigError("run_episode: no chat backend configured");
  if (config.max_turns < 1) throw ConfigError("run_episode: max_turns must be >= 1");

  Trajectory trajectory;
  trajectory.task_id = task_id.empty()
                           ? task.problem.id + "-a" + std::to_string(task.a) + "-b" +
                                 std::to_string(task.b)
                           : task_id;
  trajectory.verdict.best_reward = -1;

  std::string system_prompt =
      load_template(config.prompts_dir, "verifier_system.txt", kDefaultSystemPrompt);
  std::string task_prompt = render_task_prompt(
      load_template(config.prompts_dir, "verifier_task.txt", kDefaultTaskPrompt), task);

  std::vector<ChatMessage> conversation;
  conversation.push_back({"system", system_prompt, std::nullopt, ""});
  conversation.push_back({"user", task_prompt, std::nullopt, ""});

  for (int turn = 0; turn < config.max_turns; ++turn) {
    ChatMessage message;
    try {
      message = config.backend->next(conversation);
    } catch (const BackendError& e) {
      trajectory.backend_failed = true;
      trajectory.backend_error = e.what();
      break;
    }
    conversation.push_back(message);

    TrajectoryTurn record;
    record.assistant = message;

    if (message.tool_call && message.tool_call->tool == "submit_generator") {
      auto generator = parse_submission(*message.tool_call);
      if (generator) {
        trajectory.final_generator = generator;
        trajectory.verdict = judge_generator(sandbox, task, *generator,
                                             config.judge_attempts, config.seed);
        record.tool_result = ToolResult{"generator received", false};
      } else {
        // malformed submission terminates the episode as an empty G
        record.tool_result = ToolResult{"error: malformed submission", false};
      }
      trajectory.turns.push_back(std::move(record));
      break;
    }

    if (message.tool_call) {
      ToolResult result = handle_tool_call(sandbox, *message.tool_call, task, task.limits,
                                           config.tool_output_cap_bytes);
      conversation.push_back({"tool", result.content, std::nullopt, message.tool_call->id});
      record.tool_result = std::move(result);
    } else {
      conversation.push_back(
          {"user", "Reply with exactly one tool call: execute_code or submit_generator.",
           std::nullopt, ""});
    }
    trajectory.turns.push_back(std::move(record));
  }

  if (!config.trajectory_dir.empty()) {
    write_trajectory(trajectory, config.trajectory_dir);
  }
  return trajectory;
}

std::vector<std::pair<int, int>> pair_sampling_schedule(int candidate_count, int budget,
                                                        std::uint64_t seed) {
  if (candidate_count < 2) {
    throw PoolTooSmallError("pair_sampling_schedule: need at least 2 candidates");
  }
  if (budget < 1) throw ConfigError("pair_sampling_schedule: budget must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(budget));
  for (int m = 0; m < budget; ++m) {
    int a = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(candidate_count)));
    int b = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(candidate_count - 1)));
    if (b >= a) ++b;
    pairs.emplace_back(std::min(a, b), std::max(a, b));
  }
  return pairs;
}

AgenticSelection agentic_select(const Sandbox& sandbox, const Problem& problem,
                                std::span<const CandidateSolution> candidates,
                                const EpisodeConfig& config, int budget) {
  const int n = static_cast<int>(candidates.size());
  if (n < 2) throw PoolTooSmallError("agentic_select: need at least 2 candidates");

  ResourceLimits limits;
  limits.time_limit_ms = problem.time_limit_ms;
  limits.memory_limit_kib = problem.memory_limit_kib;

  auto pairs = pair_sampling_schedule(n, budget, config.seed);

  AgenticSelection selection;
  int backend_failures = 0;
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    auto [a, b] = pairs[e];
    TaskInstance task = make_task(problem, candidates, a, b, limits);
    EpisodeConfig episode_config = config;
    episode_config.seed = mix_seed(config.seed, e);
    std::string episode_id = problem.id + "-e" + std::to_string(e) + "-a" +
                             std::to_string(a) + "-b" + std::to_string(b);
    Trajectory trajectory = run_episode(sandbox, task, episode_config, episode_id);
    ++selection.episodes_attempted;
    if (trajectory.backend_failed) ++backend_failures;
    if (trajectory.verdict.success && trajectory.verdict.witness) {
      ++selection.episodes_succeeded;
      selection.inputs.push_back({*trajectory.verdict.witness, a, b, episode_id});
    }
  }
  if (backend_failures == static_cast<int>(pairs.size())) {
    throw BackendError("all " + std::to_string(pairs.size()) + " episodes aborted");
  }

  if (selection.inputs.empty()) {
    selection.fallback_vanilla = true;
    selection.scores.scores.assign(static_cast<std::size_t>(n), 0);
    selection.selected = vanilla_select(n, config.seed);
    return selection;
  }

  std::vector<std::string> inputs;
  inputs.reserve(selection.inputs.size());
  for (const auto& ci : selection.inputs) inputs.push_back(ci.input);
  OutcomeMatrix matrix = build_outcome_matrix(sandbox, candidates, inputs, limits);
  selection.scores = aggregate_votes(agreement_scores(matrix));
  selection.selected = select_best(selection.scores, config.seed);
  return selection;
}

// ---------------------------------------------------------------- persistence

namespace {

json tool_call_to_json(const ToolCall& call) {
  return json{{"id", call.id}, {"tool", call.tool}, {"arguments", call.arguments}};
}

}  // namespace

void write_trajectory(const Trajectory& trajectory, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create trajectory dir: " + dir.string());

  std::ostringstream out;
  for (std::size_t i = 0; i < trajectory.turns.size(); ++i) {
    const auto& turn = trajectory.turns[i];
    json line;
    line["turn"] = i;
    line["assistant"] = json{{"content", turn.assistant.content}};
    if (turn.assistant.tool_call) {
      line["assistant"]["tool_call"] = tool_call_to_json(*turn.assistant.tool_call);
    }
    if (turn.tool_result) {
      line["tool_result"] =
          json{{"content", turn.tool_result->content}, {"truncated", turn.tool_result->truncated}};
    }
    out << line.dump() << "\n";
  }
  json verdict_line;
  verdict_line["task_id"] = trajectory.task_id;
  verdict_line["verdict"] = json{{"success", trajectory.verdict.success},
                                 {"best_reward", trajectory.verdict.best_reward},
                                 {"attempts_run", trajectory.verdict.attempts_run}};
  if (trajectory.verdict.witness) {
    verdict_line["verdict"]["witness"] = base64_encode(*trajectory.verdict.witness);
  }
  if (trajectory.final_generator) {
    verdict_line["final_generator"] = to_json(*trajectory.final_generator);
  }
  if (trajectory.backend_failed) {
    verdict_line["backend_error"] = trajectory.backend_error;
  }
  out << verdict_line.dump() << "\n";

  write_file(dir / (trajectory.task_id + ".jsonl"), out.str());
}

}  // namespace av
