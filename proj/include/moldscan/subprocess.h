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

#ifndef MOLDSCAN_SUBPROCESS_H_
#define MOLDSCAN_SUBPROCESS_H_

#include <sys/types.h>

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace moldscan {

// A child process spoken to over line-delimited stdin/stdout.
class ChildProcess {
 public:
  // Throws ContractError when the program cannot be started.
  explicit ChildProcess(std::vector<std::string> argv);
  ~ChildProcess();
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  // Sends one line (a newline is appended) and waits for one response line.
  // Throws ContractError on timeout, EOF or a broken pipe; the process is
  // killed in that case and must be replaced.
  std::string round_trip(const std::string& line, std::chrono::milliseconds timeout);

  bool alive() const { return pid_ > 0; }

 private:
  void write_all(const std::string& data, std::chrono::steady_clock::time_point deadline);
  void kill_child();

  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

// A fixed number of interchangeable children. Dead children are respawned
// on the next acquire.
class ProcessPool {
 public:
  ProcessPool(std::vector<std::string> argv, int size, std::chrono::milliseconds timeout);

  std::size_t size() const { return slots_.size(); }

  // Runs one request on a free child; blocks while all are busy.
  std::string request(const std::string& line);

 private:
  std::vector<std::string> argv_;
  std::chrono::milliseconds timeout_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::unique_ptr<ChildProcess>> slots_;
  std::vector<bool> busy_;
};

}  // namespace moldscan

#endif  // MOLDSCAN_SUBPROCESS_H_
