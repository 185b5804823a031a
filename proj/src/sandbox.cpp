#include "av/sandbox.hpp"

#include <fcntl.h>
#include <grp.h>
#include <poll.h>
#include <sched.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <map>
#include <mutex>
#include <utility>

#include "av/errors.hpp"
#include "av/util.hpp"

extern char** environ;

namespace av {

namespace fs = std::filesystem;

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::ok: return "ok";
    case Verdict::runtime_error: return "runtime_error";
    case Verdict::timeout: return "timeout";
    case Verdict::memory_exceeded: return "memory_exceeded";
    case Verdict::output_exceeded: return "output_exceeded";
    case Verdict::compile_error: return "compile_error";
  }
  return "unknown";
}

ExecutionOutcome bottom_outcome(Verdict verdict) {
  ExecutionOutcome o;
  o.verdict = verdict;
  return o;
}

// ---------------------------------------------------------------- normalize

namespace {

bool is_line_trailing_ws(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v';
}

/// Replaces invalid UTF-8 sequences with U+FFFD.
std::string utf8_lossy(std::string_view raw) {
  static const char kReplacement[] = "\xEF\xBF\xBD";
  std::string out;
  out.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    unsigned char c = static_cast<unsigned char>(raw[i]);
    std::size_t len;
    if (c < 0x80) len = 1;
    else if ((c >> 5) == 0x6) len = 2;
    else if ((c >> 4) == 0xE) len = 3;
    else if ((c >> 3) == 0x1E) len = 4;
    else {
      out += kReplacement;
      ++i;
      continue;
    }
    if (i + len > raw.size()) {
      out += kReplacement;
      ++i;
      continue;
    }
    bool valid = true;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(raw[i + k]) >> 6) != 0x2) {
        valid = false;
        break;
      }
    }
    // reject overlong encodings and out-of-range code points
    if (valid && len == 2 && c < 0xC2) valid = false;
    if (valid && len == 3 && c == 0xE0 && static_cast<unsigned char>(raw[i + 1]) < 0xA0)
      valid = false;
    if (valid && len == 3 && c == 0xED && static_cast<unsigned char>(raw[i + 1]) >= 0xA0)
      valid = false;  // surrogates
    if (valid && len == 4 && (c > 0xF4 || (c == 0xF0 && static_cast<unsigned char>(raw[i + 1]) < 0x90) ||
                              (c == 0xF4 && static_cast<unsigned char>(raw[i + 1]) >= 0x90)))
      valid = false;
    if (valid) {
      out.append(raw.substr(i, len));
      i += len;
    } else {
      out += kReplacement;
      ++i;
    }
  }
  return out;
}

}  // namespace

std::string normalize_output(std::string_view raw) {
  std::string text = utf8_lossy(raw);
  std::string out;
  out.reserve(text.size());
  std::size_t line_start = 0;
  auto flush_line = [&](std::size_t end) {
    // fold CRLF: a '\r' immediately before the newline is trailing ws anyway
    std::size_t e = end;
    while (e > line_start && is_line_trailing_ws(text[e - 1])) --e;
    out.append(text, line_start, e - line_start);
    out.push_back('\n');
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\n') {
      flush_line(i);
      line_start = i + 1;
    }
  }
  if (line_start < text.size()) flush_line(text.size());
  // every line was rstripped, so trailing blank lines (and the final
  // newline) are exactly the trailing '\n' run
  while (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

// ---------------------------------------------------------------- process runner

namespace {

constexpr int kNobodyUid = 65534;
constexpr std::int64_t kCompileMemoryKib = 4LL * 1024 * 1024;  // 4 GiB for toolchains

struct RunSpec {
  std::vector<std::string> argv;
  fs::path cwd;
  std::string_view stdin_bytes;
  std::int64_t time_limit_ms = 2000;
  std::int64_t memory_limit_kib = 262144;
  std::int64_t output_limit_bytes = 16 * 1024 * 1024;
  std::int64_t stderr_cap_bytes = 65536;
  bool stderr_keep_head = false;  // compilers: head; guests: tail
};

struct RawResult {
  bool timed_out = false;
  bool output_capped = false;
  int status = 0;
  long max_rss_kib = 0;
  std::int64_t wall_ms = 0;
  std::string stdout_bytes;
  std::string stderr_bytes;
};

void ignore_sigpipe_once() {
  static std::once_flag flag;
  std::call_once(flag, [] { ::signal(SIGPIPE, SIG_IGN); });
}

void set_nonblocking(int fd) {
  int flags = fcntl(fd, F_GETFL, 0);
  fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

void set_rlimit(int resource, rlim_t soft, rlim_t hard) {
  struct rlimit rl{soft, hard};
  setrlimit(resource, &rl);  // failures are non-fatal backstops
}

/// Everything the child needs, materialized before fork so the child
/// never allocates.
struct ChildPlan {
  std::vector<std::string> argv_store;
  std::vector<std::string> env_store;
  std::vector<char*> argv;
  std::vector<char*> envp;
  std::string cwd;
  std::string exec_path;  // resolved binary
  rlim_t cpu_soft = 0;
  rlim_t as_bytes = 0;
  rlim_t fsize_bytes = 0;
  bool drop = false;
  bool isolate_network = false;
};

std::string resolve_executable(const std::string& name) {
  if (name.find('/') != std::string::npos) return name;
  const char* dirs[] = {"/usr/local/bin", "/usr/bin", "/bin"};
  for (const char* d : dirs) {
    std::string cand = std::string(d) + "/" + name;
    if (access(cand.c_str(), X_OK) == 0) return cand;
  }
  return name;  // let execve report the failure
}

ChildPlan make_plan(const RunSpec& spec, const SandboxConfig& cfg) {
  ChildPlan plan;
  plan.argv_store = spec.argv;
  plan.exec_path = resolve_executable(spec.argv.front());
  plan.cwd = spec.cwd.string();
  plan.env_store.push_back("PATH=/usr/local/bin:/usr/bin:/bin");
  plan.env_store.push_back("HOME=" + plan.cwd);
  for (const auto& name : cfg.env_allowlist) {
    if (name == "PATH" || name == "HOME") continue;
    if (const char* v = getenv(name.c_str())) plan.env_store.push_back(name + "=" + v);
  }
  for (auto& s : plan.argv_store) plan.argv.push_back(s.data());
  plan.argv.push_back(nullptr);
  for (auto& s : plan.env_store) plan.envp.push_back(s.data());
  plan.envp.push_back(nullptr);
  plan.cpu_soft = static_cast<rlim_t>(spec.time_limit_ms / 1000 + 2);
  // Backstop on address space; actual memory accounting is RSS-based in
  // the parent, so interpreters with large virtual mappings still start.
  plan.as_bytes = static_cast<rlim_t>(spec.memory_limit_kib) * 1024 * 2 +
                  256ULL * 1024 * 1024;
  plan.fsize_bytes = static_cast<rlim_t>(spec.output_limit_bytes) + (1 << 20);
  plan.drop = cfg.drop_privileges && geteuid() == 0;
  plan.isolate_network = cfg.isolate_network;
  return plan;
}

void child_note(int fd, const char* msg) {
  ssize_t ignored = write(fd, msg, strlen(msg));
  (void)ignored;
}

// Runs between fork and execve: only async-signal-safe calls.
[[noreturn]] void child_exec(const ChildPlan& plan, int in_fd, int out_fd, int err_fd) {
  ::setsid();
  if (plan.isolate_network) {
    unshare(CLONE_NEWNET);  // best effort; requires privilege
  }

  set_rlimit(RLIMIT_CPU, plan.cpu_soft, plan.cpu_soft + 2);
  set_rlimit(RLIMIT_AS, plan.as_bytes, plan.as_bytes);
  set_rlimit(RLIMIT_FSIZE, plan.fsize_bytes, plan.fsize_bytes);
  set_rlimit(RLIMIT_CORE, 0, 0);

  if (chdir(plan.cwd.c_str()) != 0) {
    child_note(err_fd, "av-exec: chdir failed\n");
    _exit(127);
  }

  if (plan.drop) {
    // shared nobody uid: NPROC bounds runaway forks across all guests
    set_rlimit(RLIMIT_NPROC, 512, 512);
    if (setgid(kNobodyUid) != 0 || setgroups(0, nullptr) != 0 ||
        setuid(kNobodyUid) != 0) {
      child_note(err_fd, "av-exec: privilege drop failed\n");
      _exit(127);
    }
  }

  dup2(in_fd, 0);
  dup2(out_fd, 1);
  dup2(err_fd, 2);
  for (int fd = 3; fd < 256; ++fd) close(fd);

  execve(plan.exec_path.c_str(), plan.argv.data(), plan.envp.data());
  child_note(2, "av-exec: cannot execute guest binary\n");
  _exit(127);
}

RawResult run_process(const RunSpec& spec, const SandboxConfig& cfg) {
  ignore_sigpipe_once();

  ChildPlan plan = make_plan(spec, cfg);

  int in_pipe[2], out_pipe[2], err_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0 || pipe(err_pipe) != 0) {
    throw SandboxError(std::string("pipe: ") + strerror(errno));
  }

  auto start = std::chrono::steady_clock::now();
  pid_t pid = fork();
  if (pid < 0) throw SandboxError(std::string("fork: ") + strerror(errno));
  if (pid == 0) {
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(err_pipe[0]);
    child_exec(plan, in_pipe[0], out_pipe[1], err_pipe[1]);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  close(err_pipe[1]);

  int in_fd = in_pipe[1], out_fd = out_pipe[0], err_fd = err_pipe[0];
  set_nonblocking(in_fd);
  set_nonblocking(out_fd);
  set_nonblocking(err_fd);

  RawResult res;
  std::size_t stdin_off = 0;
  if (spec.stdin_bytes.empty()) {
    close(in_fd);
    in_fd = -1;
  }
  const auto deadline = start + std::chrono::milliseconds(spec.time_limit_ms);
  char buf[65536];

  auto kill_group = [&] { ::kill(-pid, SIGKILL); };

  while (in_fd >= 0 || out_fd >= 0 || err_fd >= 0) {
    auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      res.timed_out = true;
      kill_group();
      break;
    }
    auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
    struct pollfd fds[3];
    int nfds = 0;
    int idx_in = -1, idx_out = -1, idx_err = -1;
    if (in_fd >= 0) { fds[nfds] = {in_fd, POLLOUT, 0}; idx_in = nfds++; }
    if (out_fd >= 0) { fds[nfds] = {out_fd, POLLIN, 0}; idx_out = nfds++; }
    if (err_fd >= 0) { fds[nfds] = {err_fd, POLLIN, 0}; idx_err = nfds++; }
    int rc = poll(fds, static_cast<nfds_t>(nfds),
                  static_cast<int>(remaining > 0 ? remaining : 1));
    if (rc < 0) {
      if (errno == EINTR) continue;
      kill_group();
      waitpid(pid, nullptr, 0);
      throw SandboxError(std::string("poll: ") + strerror(errno));
    }
    if (rc == 0) continue;  // deadline re-checked at loop head

    if (idx_in >= 0 && (fds[idx_in].revents & (POLLOUT | POLLERR | POLLHUP))) {
      ssize_t n = write(in_fd, spec.stdin_bytes.data() + stdin_off,
                        spec.stdin_bytes.size() - stdin_off);
      if (n > 0) stdin_off += static_cast<std::size_t>(n);
      bool done = stdin_off >= spec.stdin_bytes.size();
      bool broken = n < 0 && errno != EAGAIN && errno != EINTR;
      if (done || broken || (fds[idx_in].revents & (POLLERR | POLLHUP))) {
        if (!done && !broken) {
          // HUP with pending data and no write progress: peer is gone
          if (n <= 0) { close(in_fd); in_fd = -1; }
        } else {
          close(in_fd);
          in_fd = -1;
        }
      }
    }
    if (idx_out >= 0 && (fds[idx_out].revents & (POLLIN | POLLHUP | POLLERR))) {
      ssize_t n = read(out_fd, buf, sizeof(buf));
      if (n > 0) {
        std::size_t keep = static_cast<std::size_t>(n);
        if (res.stdout_bytes.size() + keep >
            static_cast<std::size_t>(spec.output_limit_bytes)) {
          res.output_capped = true;
          keep = static_cast<std::size_t>(spec.output_limit_bytes) -
                 std::min(res.stdout_bytes.size(),
                          static_cast<std::size_t>(spec.output_limit_bytes));
          res.stdout_bytes.append(buf, keep);
          kill_group();
          break;
        }
        res.stdout_bytes.append(buf, keep);
      } else if (n == 0 || (n < 0 && errno != EAGAIN && errno != EINTR)) {
        close(out_fd);
        out_fd = -1;
      }
    }
    if (idx_err >= 0 && (fds[idx_err].revents & (POLLIN | POLLHUP | POLLERR))) {
      ssize_t n = read(err_fd, buf, sizeof(buf));
      if (n > 0) {
        res.stderr_bytes.append(buf, static_cast<std::size_t>(n));
        auto cap = static_cast<std::size_t>(spec.stderr_cap_bytes);
        if (res.stderr_bytes.size() > cap) {
          if (spec.stderr_keep_head) res.stderr_bytes.resize(cap);
          else res.stderr_bytes.erase(0, res.stderr_bytes.size() - cap);
        }
      } else if (n == 0 || (n < 0 && errno != EAGAIN && errno != EINTR)) {
        close(err_fd);
        err_fd = -1;
      }
    }
  }

  if (in_fd >= 0) close(in_fd);
  if (out_fd >= 0) close(out_fd);
  if (err_fd >= 0) close(err_fd);

  struct rusage ru{};
  int status = 0;
  if (wait4(pid, &status, 0, &ru) < 0) {
    throw SandboxError(std::string("wait4: ") + strerror(errno));
  }
  kill_group();  // sweep any stragglers left in the group
  res.status = status;
  res.max_rss_kib = ru.ru_maxrss;
  res.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  return res;
}

/// Private scratch directory, removed on destruction.
class ScratchDir {
 public:
  ScratchDir(const fs::path& root, bool world_writable) {
    fs::path base = root.empty() ? fs::temp_directory_path() : root;
    std::error_code ec;
    fs::create_directories(base, ec);
    std::string tmpl = (base / "av-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) {
      throw SandboxError("mkdtemp failed under " + base.string() + ": " + strerror(errno));
    }
    path_ = tmpl;
    if (world_writable) ::chmod(path_.c_str(), 0777);
  }
  ~ScratchDir() {
    if (!path_.empty()) {
      std::error_code ec;
      fs::remove_all(path_, ec);
    }
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  ScratchDir(ScratchDir&& other) noexcept : path_(std::exchange(other.path_, {})) {}

  const fs::path& path() const { return path_; }
  fs::path release() { return std::exchange(path_, {}); }

 private:
  fs::path path_;
};

}  // namespace

// ---------------------------------------------------------------- artifacts

struct CompiledArtifact::Image {
  GuestLanguage lang = GuestLanguage::py;
  fs::path dir;        // owns this directory
  std::string entry;   // file name inside dir
  std::string digest;
  std::string python_path;

  ~Image() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

GuestLanguage CompiledArtifact::guest_language() const { return image_->lang; }
const std::string& CompiledArtifact::digest() const { return image_->digest; }

struct Sandbox::Cache {
  std::mutex mu;
  // digest -> compiled image or failure diagnostic
  std::map<std::string, CompileResult> entries;
};

Sandbox::Sandbox(SandboxConfig config)
    : config_(std::move(config)), cache_(std::make_unique<Cache>()) {
  ignore_sigpipe_once();
}

Sandbox::~Sandbox() = default;

CompileResult Sandbox::compile(const std::string& source, GuestLanguage lang,
                               const ResourceLimits& limits) const {
  std::string digest = fnv1a64_hex(to_string(lang) + ":" + source);
  {
    std::lock_guard<std::mutex> lock(cache_->mu);
    auto it = cache_->entries.find(digest);
    if (it != cache_->entries.end()) return it->second;
  }

  ScratchDir scratch(config_.scratch_root, config_.drop_privileges);
  const char* src_name = lang == GuestLanguage::py ? "src.py" : "src.cpp";
  write_file(scratch.path() / src_name, source);
  ::chmod((scratch.path() / src_name).c_str(), 0644);

  RunSpec spec;
  spec.cwd = scratch.path();
  spec.time_limit_ms = limits.compile_time_limit_ms;
  spec.memory_limit_kib = kCompileMemoryKib;
  spec.output_limit_bytes = limits.output_limit_bytes;
  spec.stderr_cap_bytes = limits.output_limit_bytes;
  spec.stderr_keep_head = true;
  if (lang == GuestLanguage::py) {
    spec.argv = {config_.python_path, "-m", "py_compile", src_name};
  } else {
    spec.argv = {config_.cxx_path};
    spec.argv.insert(spec.argv.end(), config_.cxx_flags.begin(), config_.cxx_flags.end());
    spec.argv.insert(spec.argv.end(), {"-o", "prog", src_name});
  }

  RawResult raw = run_process(spec, config_);

  CompileResult result;
  if (raw.stderr_bytes.rfind("av-exec: cannot execute", 0) == 0) {
    throw SandboxError("toolchain missing: " + raw.stderr_bytes);
  }
  if (raw.timed_out) {
    result.diagnostic = "compilation timed out after " +
                        std::to_string(limits.compile_time_limit_ms) + " ms";
  } else if (!WIFEXITED(raw.status) || WEXITSTATUS(raw.status) != 0) {
    result.diagnostic = raw.stderr_bytes.empty()
                            ? "compiler exited with status " + std::to_string(raw.status)
                            : raw.stderr_bytes;
    if (result.diagnostic.size() > static_cast<std::size_t>(limits.output_limit_bytes)) {
      result.diagnostic.resize(static_cast<std::size_t>(limits.output_limit_bytes));
    }
  } else {
    auto image = std::make_shared<CompiledArtifact::Image>();
    image->lang = lang;
    image->entry = lang == GuestLanguage::py ? "src.py" : "prog";
    image->digest = digest;
    image->python_path = config_.python_path;
    if (lang == GuestLanguage::cpp) {
      ::chmod((scratch.path() / "prog").c_str(), 0755);
    }
    image->dir = scratch.release();
    result.artifact = CompiledArtifact(std::move(image));
  }

  std::lock_guard<std::mutex> lock(cache_->mu);
  return cache_->entries.emplace(digest, result).first->second;
}

ExecutionOutcome Sandbox::execute(const CompiledArtifact& artifact,
                                  std::string_view stdin_bytes,
                                  const ResourceLimits& limits,
                                  std::span<const std::string> extra_args) const {
  const auto& image = artifact.image();
  ScratchDir scratch(config_.scratch_root, config_.drop_privileges);

  RunSpec spec;
  spec.cwd = scratch.path();
  spec.stdin_bytes = stdin_bytes;
  spec.time_limit_ms = limits.time_limit_ms;
  spec.memory_limit_kib = limits.memory_limit_kib;
  spec.output_limit_bytes = limits.output_limit_bytes;
  if (image.lang == GuestLanguage::py) {
    spec.argv = {image.python_path, (image.dir / image.entry).string()};
  } else {
    spec.argv = {(image.dir / image.entry).string()};
  }
  spec.argv.insert(spec.argv.end(), extra_args.begin(), extra_args.end());

  RawResult raw = run_process(spec, config_);

  ExecutionOutcome out;
  out.wall_ms = raw.wall_ms;
  out.stderr_tail = raw.stderr_bytes;

  bool cpu_killed = WIFSIGNALED(raw.status) && WTERMSIG(raw.status) == SIGXCPU;
  if (raw.timed_out || cpu_killed) {
    out.verdict = Verdict::timeout;
  } else if (raw.output_capped) {
    out.verdict = Verdict::output_exceeded;
  } else if (raw.max_rss_kib > limits.memory_limit_kib) {
    out.verdict = Verdict::memory_exceeded;
  } else if (WIFSIGNALED(raw.status)) {
    out.verdict = Verdict::runtime_error;
  } else if (WEXITSTATUS(raw.status) != 0) {
    out.verdict = Verdict::runtime_error;
    out.exit_code = WEXITSTATUS(raw.status);
  } else {
    out.verdict = Verdict::ok;
    out.exit_code = 0;
    out.raw_output = std::move(raw.stdout_bytes);
    out.output = normalize_output(out.raw_output);
  }
  return out;
}

}  // namespace av
