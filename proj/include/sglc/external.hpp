#pragma once

#include <sglc/error.hpp>
#include <sglc/image.hpp>
#include <sglc/parallel.hpp>
#include <sglc/processor.hpp>
#include <sglc/tensor.hpp>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

extern char** environ;

namespace sglc {

class ExternalProcessError : public Error {
 public:
  enum class Kind { spawn_failed, nonzero_exit, malformed_tensor, shape_mismatch, timeout };

  ExternalProcessError(Kind kind, const std::string& message, std::string stderr_text, int exit_status = 0)
      : Error(message + (stderr_text.empty() ? "" : "; stderr: " + stderr_text)),
        kind_(kind),
        stderr_(std::move(stderr_text)),
        exit_status_(exit_status) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& stderr_text() const noexcept { return stderr_; }
  int exit_status() const noexcept { return exit_status_; }

 private:
  Kind kind_;
  std::string stderr_;
  int exit_status_;
};

struct ExternalCommand {
  std::vector<std::string> argv;           // program and leading arguments
  std::filesystem::path workdir;           // tensor files go here; empty = temp dir
  double timeout_seconds = 300.0;
  std::size_t max_concurrent = 1;
};

/// Splits a command line on whitespace. Single and double quotes group words.
inline std::vector<std::string> split_command_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool have = false;
  char quote = 0;
  for (char ch : line) {
    if (quote) {
      if (ch == quote) {
        quote = 0;
      } else {
        cur += ch;
      }
    } else if (ch == '\'' || ch == '"') {
      quote = ch;
      have = true;
    } else if (ch == ' ' || ch == '\t' || ch == '\n') {
      if (have) out.push_back(std::move(cur));
      cur.clear();
      have = false;
    } else {
      cur += ch;
      have = true;
    }
  }
  if (quote) throw InvalidArgument("unterminated quote in command line");
  if (have) out.push_back(std::move(cur));
  return out;
}

namespace detail {

// Process-wide so concurrent processors never share tensor file names.
inline std::uint64_t next_file_id() {
  static std::atomic<std::uint64_t> counter{0};
  return counter.fetch_add(1);
}

class FileRemover {
 public:
  explicit FileRemover(std::filesystem::path p) : path_(std::move(p)) {}
  ~FileRemover() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  FileRemover(const FileRemover&) = delete;
  FileRemover& operator=(const FileRemover&) = delete;

 private:
  std::filesystem::path path_;
};

class Fd {
 public:
  explicit Fd(int fd = -1) : fd_(fd) {}
  ~Fd() { reset(); }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  int get() const noexcept { return fd_; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_;
};

struct ChildResult {
  int status = 0;
  bool timed_out = false;
  std::string stderr_text;
};

// Runs argv with stdout discarded and stderr captured; kills it after timeout.
inline ChildResult run_child(const std::vector<std::string>& argv, double timeout_seconds) {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) {
    throw ExternalProcessError(ExternalProcessError::Kind::spawn_failed,
                               std::string("pipe failed: ") + std::strerror(errno), "");
  }
  Fd read_end(fds[0]);
  Fd write_end(fds[1]);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, "/dev/null", O_WRONLY, 0);
  posix_spawn_file_actions_adddup2(&actions, write_end.get(), STDERR_FILENO);

  std::vector<char*> args;
  args.reserve(argv.size() + 1);
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_t pid = 0;
  const int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  write_end.reset();
  if (rc != 0) {
    throw ExternalProcessError(ExternalProcessError::Kind::spawn_failed,
                               "cannot start '" + argv[0] + "': " + std::strerror(rc), "");
  }

  ChildResult result;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
  bool exited = false;
  char buf[4096];
  while (!exited) {
    pollfd pfd{read_end.get(), POLLIN, 0};
    if (read_end.get() >= 0 && ::poll(&pfd, 1, 20) > 0) {
      const ssize_t n = ::read(read_end.get(), buf, sizeof buf);
      if (n > 0) {
        result.stderr_text.append(buf, static_cast<std::size_t>(n));
      } else if (n == 0) {
        read_end.reset();
      }
    } else if (read_end.get() < 0) {
      ::usleep(20000);
    }
    const pid_t w = ::waitpid(pid, &result.status, WNOHANG);
    if (w == pid) {
      exited = true;
    } else if (std::chrono::steady_clock::now() > deadline) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &result.status, 0);
      result.timed_out = true;
      exited = true;
    }
  }
  // Drain whatever the child wrote before exiting.
  while (read_end.get() >= 0) {
    pollfd pfd{read_end.get(), POLLIN, 0};
    if (::poll(&pfd, 1, 0) <= 0) break;
    const ssize_t n = ::read(read_end.get(), buf, sizeof buf);
    if (n <= 0) break;
    result.stderr_text.append(buf, static_cast<std::size_t>(n));
  }
  return result;
}

}  // namespace detail

/**
 * Hands each patch to an external program through tensor files.
 *
 * The program is invoked as `argv... <input.tensor> <output.tensor>` and must
 * write a tensor of the same shape. Samples travel as float32, so the result
 * is the float32-rounded image even for a pure copy.
 */
class ExternalProcessor final : public PatchProcessor {
 public:
  explicit ExternalProcessor(ExternalCommand cmd)
      : cmd_(std::move(cmd)), slots_(std::make_unique<Semaphore>(cmd_.max_concurrent)) {
    if (cmd_.argv.empty()) throw InvalidArgument("external processor needs a command");
    if (!(cmd_.timeout_seconds > 0.0)) throw InvalidArgument("external processor timeout must be positive");
    if (cmd_.workdir.empty()) cmd_.workdir = std::filesystem::temp_directory_path();
  }

  ImageBuffer process(const ImageBuffer& patch) const override {
    SemaphoreGuard slot(*slots_);
    const std::string stem = "sglc-" + std::to_string(::getpid()) + "-" + std::to_string(detail::next_file_id());
    const auto in_path = cmd_.workdir / (stem + "-in.tensor");
    const auto out_path = cmd_.workdir / (stem + "-out.tensor");
    detail::FileRemover remove_in(in_path), remove_out(out_path);
    write_tensor(patch, in_path);

    std::vector<std::string> argv = cmd_.argv;
    argv.push_back(in_path.string());
    argv.push_back(out_path.string());
    const detail::ChildResult child = detail::run_child(argv, cmd_.timeout_seconds);

    using Kind = ExternalProcessError::Kind;
    if (child.timed_out) {
      std::ostringstream msg;
      msg << "'" << cmd_.argv[0] << "' timed out after " << cmd_.timeout_seconds << " s";
      throw ExternalProcessError(Kind::timeout, msg.str(), child.stderr_text);
    }
    if (!WIFEXITED(child.status) || WEXITSTATUS(child.status) != 0) {
      const int code = WIFEXITED(child.status) ? WEXITSTATUS(child.status) : 128 + WTERMSIG(child.status);
      throw ExternalProcessError(Kind::nonzero_exit,
                                 "'" + cmd_.argv[0] + "' exited with status " + std::to_string(code),
                                 child.stderr_text, code);
    }
    ImageBuffer out = [&] {
      try {
        return read_tensor(out_path);
      } catch (const Error& e) {
        throw ExternalProcessError(Kind::malformed_tensor, "'" + cmd_.argv[0] + "' output: " + e.what(),
                                   child.stderr_text);
      }
    }();
    if (!out.same_shape(patch)) {
      throw ExternalProcessError(Kind::shape_mismatch,
                                 "'" + cmd_.argv[0] + "' returned " + out.shape_string() + " for a " +
                                     patch.shape_string() + " patch",
                                 child.stderr_text);
    }
    return out;
  }

  std::string name() const override { return "external:" + cmd_.argv[0]; }
  const ExternalCommand& command() const noexcept { return cmd_; }

 private:
  ExternalCommand cmd_;
  std::unique_ptr<Semaphore> slots_;
};

}  // namespace sglc
