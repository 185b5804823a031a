#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "av/corpus.hpp"

namespace av {

struct ResourceLimits {
  std::int64_t time_limit_ms = 2000;
  std::int64_t memory_limit_kib = 262144;
  std::int64_t output_limit_bytes = 16 * 1024 * 1024;
  std::int64_t compile_time_limit_ms = 30000;
};

enum class Verdict {
  ok,
  runtime_error,
  timeout,
  memory_exceeded,
  output_exceeded,
  compile_error,
};

const char* to_string(Verdict v);

/// Result of one guest execution. Any verdict other than ok is the
/// distinguished failure value for all voting math; output is defined
/// only for ok.
struct ExecutionOutcome {
  Verdict verdict = Verdict::runtime_error;
  std::string output;      // normalized text, ok only
  std::string raw_output;  // captured stdout bytes, ok only
  std::int64_t wall_ms = 0;
  std::optional<int> exit_code;
  std::string stderr_tail;  // diagnostics only, never part of output equality

  bool ok() const { return verdict == Verdict::ok; }
  bool failed() const { return verdict != Verdict::ok; }
};

/// Failure value used when a candidate never ran (compile failure rows
/// in an outcome matrix, absent artifacts, ...).
ExecutionOutcome bottom_outcome(Verdict verdict);

/// Decodes as UTF-8 with lossy replacement, folds CRLF to LF, strips
/// trailing whitespace on each line and trailing blank lines. Defines
/// the output-equality relation used everywhere downstream.
std::string normalize_output(std::string_view raw);

struct SandboxConfig {
  std::string python_path = "python3";
  std::string cxx_path = "c++";
  std::vector<std::string> cxx_flags = {"-O2", "-std=c++17", "-pipe"};
  /// Host environment variables passed through to guests; everything
  /// else is cleared (PATH and HOME are always set).
  std::vector<std::string> env_allowlist;
  std::filesystem::path scratch_root;  // empty = system temp dir
  int workers = 0;                     // 0 = hardware concurrency
  bool drop_privileges = true;         // setuid(nobody) when running as root
  bool isolate_network = true;         // unshare(CLONE_NEWNET) when permitted
};

/// Handle to a compiled guest image. Copies share the on-disk image;
/// the backing scratch directory is removed when the last copy dies.
class CompiledArtifact {
 public:
  GuestLanguage guest_language() const;
  const std::string& digest() const;

  struct Image;
  explicit CompiledArtifact(std::shared_ptr<const Image> image) : image_(std::move(image)) {}
  const Image& image() const { return *image_; }

 private:
  std::shared_ptr<const Image> image_;
};

struct CompileResult {
  std::optional<CompiledArtifact> artifact;
  std::string diagnostic;  // tool output, truncated to output_limit_bytes

  bool ok() const { return artifact.has_value(); }
};

/// Compiles and executes untrusted guest programs under enforced
/// time/memory/output limits. Thread-safe; executions may run in
/// parallel, each in a private scratch directory.
class Sandbox {
 public:
  explicit Sandbox(SandboxConfig config = {});
  ~Sandbox();

  Sandbox(const Sandbox&) = delete;
  Sandbox& operator=(const Sandbox&) = delete;

  /// For py a syntax check constitutes compilation; for cpp a native
  /// build within compile_time_limit_ms. Identical source yields an
  /// identical digest (and a cached image).
  CompileResult compile(const std::string& source, GuestLanguage lang,
                        const ResourceLimits& limits) const;

  /// Runs the artifact with stdin fed wholesale and stdout captured.
  /// Guest failures are verdicts; SandboxError is raised only for host
  /// faults. extra_args are appended to the guest argv.
  ExecutionOutcome execute(const CompiledArtifact& artifact, std::string_view stdin_bytes,
                           const ResourceLimits& limits,
                           std::span<const std::string> extra_args = {}) const;

  const SandboxConfig& config() const { return config_; }

 private:
  SandboxConfig config_;
  struct Cache;
  std::unique_ptr<Cache> cache_;
};

}  // namespace av
