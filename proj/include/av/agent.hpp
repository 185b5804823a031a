#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "av/corpus.hpp"
#include "av/genlab.hpp"
#include "av/sandbox.hpp"
#include "av/voting.hpp"

namespace av {

struct ToolCall {
  std::string id;
  std::string tool;  // execute_code | submit_generator
  nlohmann::json arguments;
};

struct ToolResult {
  std::string content;
  bool truncated = false;
};

struct ChatMessage {
  std::string role;  // system | user | assistant | tool
  std::string content;
  std::optional<ToolCall> tool_call;  // assistant messages
  std::string tool_call_id;           // tool messages
};

/// Produces the next assistant message for a conversation. Implemented
/// by an HTTP chat-completion client or a scripted transcript.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatMessage next(const std::vector<ChatMessage>& conversation) = 0;
  virtual std::string name() const = 0;
};

/// Replays a recorded transcript: response k answers the k-th
/// assistant turn of a conversation, so identical prefixes always get
/// identical replies. Transcript file: JSON array of assistant
/// messages in chat-completion shape.
class ScriptedBackend : public ChatBackend {
 public:
  explicit ScriptedBackend(const std::filesystem::path& transcript_path);
  explicit ScriptedBackend(nlohmann::json transcript);

  ChatMessage next(const std::vector<ChatMessage>& conversation) override;
  std::string name() const override { return "script"; }

 private:
  std::vector<ChatMessage> responses_;
};

/// Chat-completion HTTP client. The auth token is read from an
/// environment variable so it never lands in config files.
class HttpChatBackend : public ChatBackend {
 public:
  HttpChatBackend(std::string base_url, std::string model,
                  std::string api_key_env = "AV_API_KEY");

  ChatMessage next(const std::vector<ChatMessage>& conversation) override;
  std::string name() const override { return "http:" + model_; }

 private:
  std::string base_url_;
  std::string model_;
  std::string api_key_env_;
};

/// Backend factory for descriptor strings: "script:<path>" or an
/// http(s) base URL, optionally "<url>#<model>".
std::shared_ptr<ChatBackend> make_backend(const std::string& descriptor);

struct EpisodeConfig {
  int max_turns = 16;
  int tool_output_cap_bytes = 4096;
  std::shared_ptr<ChatBackend> backend;
  int judge_attempts = kDefaultJudgeAttempts;
  std::uint64_t seed = 0;
  std::filesystem::path prompts_dir;      // optional template overrides
  std::filesystem::path trajectory_dir;   // empty = do not persist
};

struct TrajectoryTurn {
  ChatMessage assistant;
  std::optional<ToolResult> tool_result;
};

struct Trajectory {
  std::string task_id;
  std::vector<TrajectoryTurn> turns;
  std::optional<GeneratorProgram> final_generator;
  EpisodeVerdict verdict;
  bool backend_failed = false;
  std::string backend_error;

  int turn_count() const { return static_cast<int>(turns.size()); }
};

/// Runs one multi-turn verifier episode: the conversation starts from
/// the verifier prompt, execute_code calls run in the sandbox with
/// feedback appended, and submit_generator ends the episode with a
/// judged verdict. Exhausting max_turns without a submission fails the
/// episode with reward -1.
Trajectory run_episode(const Sandbox& sandbox, const TaskInstance& task,
                       const EpisodeConfig& config, const std::string& task_id = "");

/// Executes one tool call. Malformed arguments produce an error-shaped
/// result instead of aborting the episode.
ToolResult handle_tool_call(const Sandbox& sandbox, const ToolCall& call,
                            const TaskInstance& task, const ResourceLimits& limits,
                            int output_cap_bytes);

/// Budget scheduler: M unordered pairs (a != b) drawn uniformly with
/// replacement, reproducible under seed.
std::vector<std::pair<int, int>> pair_sampling_schedule(int candidate_count, int budget,
                                                        std::uint64_t seed);

struct CollectedInput {
  std::string input;
  int pair_a = 0;
  int pair_b = 0;
  std::string episode_id;
};

struct AgenticSelection {
  int selected = 0;
  ScoreVector scores;
  std::vector<CollectedInput> inputs;  // voting columns, in order
  bool fallback_vanilla = false;
  int episodes_attempted = 0;
  int episodes_succeeded = 0;
};

/// Full inference path: schedule pairs, run an episode per pair,
/// collect witness inputs from successful episodes, vote. With zero
/// collected inputs the choice falls back to vanilla selection under
/// the same seed.
AgenticSelection agentic_select(const Sandbox& sandbox, const Problem& problem,
                                std::span<const CandidateSolution> candidates,
                                const EpisodeConfig& config, int budget);

void write_trajectory(const Trajectory& trajectory, const std::filesystem::path& dir);

}  // namespace av
