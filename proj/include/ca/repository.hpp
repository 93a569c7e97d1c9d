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

#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

namespace ca {

namespace fs = std::filesystem;

/// Exclusive advisory lock on a lock file. Serializes threads of this process
/// through a process-wide timed mutex and other processes through flock(2).
/// Throws Error{lock_held} when `timeout` elapses.
class WriteLock {
 public:
  WriteLock(const fs::path& lock_file, std::chrono::milliseconds timeout);
  ~WriteLock();

  WriteLock(WriteLock&& other) noexcept;
  WriteLock& operator=(WriteLock&&) = delete;
  WriteLock(const WriteLock&) = delete;
  WriteLock& operator=(const WriteLock&) = delete;

 private:
  std::shared_ptr<std::timed_mutex> local_;
  bool owns_local_ = false;
  int fd_ = -1;
};

/// A `.ca/` directory. Cheap to copy: only paths and options.
///
/// Layout:
///   objects/<hh>/<62 hex>   blob bytes
///   index.jsonl             artifact records
///   runs/<run-id>.json      run records
///   counters.json           tuple-hash prefix -> last sequence
///   events.jsonl plans.jsonl promotions.jsonl pins.json
///   lineage.jsonl
///   config.json gates.json (optional)
///   work/                   per-run scratch directories
///   locks/                  write + branch locks
class Repository {
 public:
  /// Creates whatever is missing; never touches existing files.
  static Repository init(const fs::path& root);
  /// Throws Error{repo_not_initialized} unless the skeleton exists.
  static Repository open(const fs::path& root);
  static bool is_initialized(const fs::path& root);

  const fs::path& root() const noexcept { return root_; }

  fs::path objects_dir() const { return root_ / "objects"; }
  fs::path index_path() const { return root_ / "index.jsonl"; }
  fs::path runs_dir() const { return root_ / "runs"; }
  fs::path counters_path() const { return root_ / "counters.json"; }
  fs::path events_path() const { return root_ / "events.jsonl"; }
  fs::path plans_path() const { return root_ / "plans.jsonl"; }
  fs::path pins_path() const { return root_ / "pins.json"; }
  fs::path promotions_path() const { return root_ / "promotions.jsonl"; }
  fs::path lineage_path() const { return root_ / "lineage.jsonl"; }
  fs::path config_path() const { return root_ / "config.json"; }
  fs::path gates_path() const { return root_ / "gates.json"; }
  fs::path work_dir() const { return root_ / "work"; }

  std::chrono::milliseconds lock_timeout() const noexcept { return lock_timeout_; }
  void set_lock_timeout(std::chrono::milliseconds t) noexcept { lock_timeout_ = t; }

  /// Repository-wide writer lock.
  WriteLock lock() const;
  /// One pipeline run per branch at a time.
  WriteLock lock_branch(const std::string& branch) const;

 private:
  explicit Repository(fs::path root) : root_(std::move(root)) {}

  fs::path root_;
  std::chrono::milliseconds lock_timeout_{30000};
};

}  // namespace ca
