// Copyright 2026 The Moldscan Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "moldscan/subprocess.h"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fmt/format.h>

#include "moldscan/error.h"

namespace moldscan {

namespace {

int remaining_ms(std::chrono::steady_clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
      deadline - std::chrono::steady_clock::now());
  return left.count() < 0 ? 0 : static_cast<int>(left.count());
}

}  // namespace

ChildProcess::ChildProcess(std::vector<std::string> argv) {
  if (argv.empty()) throw ContractError("external backend command is empty");
  int in_pipe[2], out_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0) throw ContractError("pipe() failed");
  if (pipe2(out_pipe, O_CLOEXEC) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw ContractError("pipe() failed");
  }
  std::vector<char*> args;
  for (auto& a : argv) args.push_back(a.data());
  args.push_back(nullptr);

  const pid_t pid = fork();
  if (pid < 0) throw ContractError("fork() failed");
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    execvp(args[0], args.data());
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  fcntl(to_child_, F_SETFL, fcntl(to_child_, F_GETFL) | O_NONBLOCK);
  fcntl(from_child_, F_SETFL, fcntl(from_child_, F_GETFL) | O_NONBLOCK);
}

ChildProcess::~ChildProcess() { kill_child(); }

void ChildProcess::kill_child() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    kill(pid_, SIGKILL);
    waitpid(pid_, nullptr, 0);
  }
  pid_ = -1;
}

void ChildProcess::write_all(const std::string& data,
                             std::chrono::steady_clock::time_point deadline) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = write(to_child_, data.data() + off, data.size() - off);
    if (n > 0) {
      off += static_cast<std::size_t>(n);
      continue;
    }
    if (n < 0 && errno != EAGAIN && errno != EINTR) {
      kill_child();
      throw ContractError(fmt::format("write to backend failed: {}", std::strerror(errno)));
    }
    pollfd pfd{to_child_, POLLOUT, 0};
    const int ms = remaining_ms(deadline);
    if (ms == 0 || poll(&pfd, 1, ms) == 0) {
      kill_child();
      throw ContractError("backend timed out reading the request");
    }
  }
}

std::string ChildProcess::round_trip(const std::string& line,
                                     std::chrono::milliseconds timeout) {
  if (!alive()) throw ContractError("backend process is not running");
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  // SIGPIPE would kill us if the child dies mid-write.
  signal(SIGPIPE, SIG_IGN);
  write_all(line + "\n", deadline);
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string out = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return out;
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int ms = remaining_ms(deadline);
    const int ready = ms == 0 ? 0 : poll(&pfd, 1, ms);
    if (ready == 0) {
      kill_child();
      buffer_.clear();
      throw ContractError(fmt::format("backend timed out after {} ms", timeout.count()));
    }
    if (ready < 0 && errno == EINTR) continue;
    char chunk[65536];
    const ssize_t n = read(from_child_, chunk, sizeof(chunk));
    if (n > 0) {
      buffer_.append(chunk, static_cast<std::size_t>(n));
    } else if (n == 0 || (errno != EAGAIN && errno != EINTR)) {
      kill_child();
      buffer_.clear();
      throw ContractError("backend closed its output");
    }
  }
}

ProcessPool::ProcessPool(std::vector<std::string> argv, int size,
                         std::chrono::milliseconds timeout)
    : argv_(std::move(argv)), timeout_(timeout) {
  if (size < 1) throw ConfigError("external backend pool size must be at least 1");
  if (argv_.empty()) throw ConfigError("external backend command is empty");
  slots_.resize(static_cast<std::size_t>(size));
  busy_.assign(static_cast<std::size_t>(size), false);
}

std::string ProcessPool::request(const std::string& line) {
  std::size_t slot = 0;
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] {
      for (std::size_t i = 0; i < busy_.size(); ++i) {
        if (!busy_[i]) {
          slot = i;
          return true;
        }
      }
      return false;
    });
    busy_[slot] = true;
  }
  struct Release {
    ProcessPool* pool;
    std::size_t slot;
    ~Release() {
      std::lock_guard lock(pool->mu_);
      pool->busy_[slot] = false;
      pool->cv_.notify_one();
    }
  } release{this, slot};

  auto& child = slots_[slot];
  if (!child || !child->alive()) child = std::make_unique<ChildProcess>(argv_);
  return child->round_trip(line, timeout_);
}

}  // namespace moldscan
