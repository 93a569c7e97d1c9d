// Copyright 2026 The Continuous Analysis Authors
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

#include "ca/executor.hpp"

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>

#include "ca/error.hpp"
#include "ca/io.hpp"

namespace ca {

std::string StepRequest::task_name() const {
  if (merge) return step + "[merge]";
  if (partition_index) return step + "[" + std::to_string(*partition_index) + "]";
  return step;
}

Blob render_env_snapshot(const std::map<std::string, std::string>& env) {
  Blob out;
  for (const auto& [key, value] : env) {
    out += key;
    out += '=';
    out += value;
    out += '\n';
  }
  out += "engine=";
  out += kEngineVersion;
  out += '\n';
  return out;
}

StepResult ProcessExecutor::run(const StepRequest& request) {
  if (request.command.empty()) throw Error(Errc::invalid_argument, "empty command");

  const std::string workdir = request.workdir.string();
  const std::string log_path = workdir + ".log";

  std::map<std::string, std::string> env = request.env;
  if (!env.contains("PATH")) {
    const char* path = std::getenv("PATH");
    env["PATH"] = path ? path : "/usr/local/bin:/usr/bin:/bin";
  }
  std::vector<std::string> env_strings;
  for (const auto& [k, v] : env) env_strings.push_back(k + "=" + v);
  std::vector<char*> envp;
  for (auto& s : env_strings) envp.push_back(s.data());
  envp.push_back(nullptr);

  std::string shell = "/bin/sh", flag = "-c", command = request.command;
  char* argv[] = {shell.data(), flag.data(), command.data(), nullptr};

  int status_pipe[2];
  if (::pipe2(status_pipe, O_CLOEXEC) != 0) {
    throw Error(Errc::spawn_failure, std::string("pipe: ") + std::strerror(errno));
  }

  pid_t pid = ::fork();
  if (pid < 0) {
    int err = errno;
    ::close(status_pipe[0]);
    ::close(status_pipe[1]);
    throw Error(Errc::spawn_failure, std::string("fork: ") + std::strerror(err));
  }
  if (pid == 0) {
    // child: async-signal-safe calls only
    ::close(status_pipe[0]);
    int err = 0;
    int log_fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    int null_fd = ::open("/dev/null", O_RDONLY);
    if (log_fd < 0 || null_fd < 0 || ::chdir(workdir.c_str()) != 0 ||
        ::dup2(null_fd, 0) < 0 || ::dup2(log_fd, 1) < 0 || ::dup2(log_fd, 2) < 0) {
      err = errno;
    } else {
      ::execve(argv[0], argv, envp.data());
      err = errno;
    }
    [[maybe_unused]] auto n = ::write(status_pipe[1], &err, sizeof err);
    ::_exit(127);
  }

  ::close(status_pipe[1]);
  int child_errno = 0;
  ssize_t got;
  do {
    got = ::read(status_pipe[0], &child_errno, sizeof child_errno);
  } while (got < 0 && errno == EINTR);
  ::close(status_pipe[0]);

  int wstatus = 0;
  while (::waitpid(pid, &wstatus, 0) < 0) {
    if (errno != EINTR) throw Error(Errc::spawn_failure, std::string("waitpid: ") + std::strerror(errno));
  }
  if (got > 0) {
    ::unlink(log_path.c_str());
    throw Error(Errc::spawn_failure,
                "could not start '" + request.task_name() + "': " + std::strerror(child_errno));
  }

  StepResult result;
  if (WIFEXITED(wstatus)) {
    result.exit_code = WEXITSTATUS(wstatus);
  } else if (WIFSIGNALED(wstatus)) {
    result.exit_code = 128 + WTERMSIG(wstatus);
  } else {
    result.exit_code = 1;
  }
  result.log = io::try_read_file(log_path).value_or("");
  ::unlink(log_path.c_str());
  result.env_snapshot = render_env_snapshot(request.env);

  for (const auto& slot : request.outputs) {
    if (auto bytes = io::try_read_file(request.workdir / "out" / slot)) {
      result.outputs.emplace(slot, *std::move(bytes));
    } else if (result.exit_code == 0) {
      throw Error(Errc::missing_output,
                  request.task_name() + " exited 0 without writing output '" + slot + "'\n" + result.log);
    }
  }
  return result;
}

void RecordingExecutor::script(const std::string& task, StepResult result) {
  script(task, [result = std::move(result)](const StepRequest&) { return result; });
}

void RecordingExecutor::script(const std::string& task, Script fn) {
  std::lock_guard guard(mu_);
  scripts_[task] = std::move(fn);
}

StepResult RecordingExecutor::run(const StepRequest& request) {
  Script fn;
  {
    std::lock_guard guard(mu_);
    calls_.push_back(request.task_name());
    auto it = scripts_.find(request.task_name());
    if (it == scripts_.end()) it = scripts_.find(request.step);
    if (it == scripts_.end()) {
      throw Error(Errc::spawn_failure, "no script for task '" + request.task_name() + "'");
    }
    fn = it->second;
  }
  StepResult result = fn(request);
  if (result.env_snapshot.empty()) result.env_snapshot = render_env_snapshot(request.env);
  if (result.exit_code == 0) {
    for (const auto& slot : request.outputs) {
      if (!result.outputs.contains(slot)) {
        throw Error(Errc::missing_output,
                    "script for '" + request.task_name() + "' has no output '" + slot + "'");
      }
    }
  }
  return result;
}

std::vector<std::string> RecordingExecutor::calls() const {
  std::lock_guard guard(mu_);
  return calls_;
}

}  // namespace ca
