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

#include "ca/repository.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <map>
#include <thread>

#include "ca/error.hpp"
#include "ca/hash.hpp"
#include "ca/io.hpp"

namespace ca {
namespace {

std::shared_ptr<std::timed_mutex> local_mutex_for(const fs::path& lock_file) {
  static std::mutex registry_mu;
  static std::map<std::string, std::shared_ptr<std::timed_mutex>> registry;
  std::error_code ec;
  auto key = fs::weakly_canonical(lock_file, ec).string();
  if (ec) key = fs::absolute(lock_file).string();
  std::lock_guard guard(registry_mu);
  auto& slot = registry[key];
  if (!slot) slot = std::make_shared<std::timed_mutex>();
  return slot;
}

void touch(const fs::path& path, std::string_view initial) {
  if (!fs::exists(path)) io::write_file_atomic(path, initial);
}

}  // namespace

WriteLock::WriteLock(const fs::path& lock_file, std::chrono::milliseconds timeout)
    : local_(local_mutex_for(lock_file)) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  if (!local_->try_lock_until(deadline)) {
    throw Error(Errc::lock_held, "timed out waiting for " + lock_file.string());
  }
  owns_local_ = true;

  fd_ = ::open(lock_file.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    local_->unlock();
    owns_local_ = false;
    throw Error(Errc::storage_io,
                "open lock '" + lock_file.string() + "': " + std::strerror(errno));
  }
  auto backoff = std::chrono::milliseconds(1);
  while (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    if (errno != EWOULDBLOCK && errno != EINTR) {
      ::close(fd_);
      local_->unlock();
      owns_local_ = false;
      throw Error(Errc::storage_io, "flock '" + lock_file.string() + "': " + std::strerror(errno));
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      ::close(fd_);
      local_->unlock();
      owns_local_ = false;
      throw Error(Errc::lock_held, "lock held by another process: " + lock_file.string());
    }
    std::this_thread::sleep_for(backoff);
    backoff = std::min(backoff * 2, std::chrono::milliseconds(50));
  }
}

WriteLock::WriteLock(WriteLock&& other) noexcept
    : local_(std::move(other.local_)), owns_local_(other.owns_local_), fd_(other.fd_) {
  other.owns_local_ = false;
  other.fd_ = -1;
}

WriteLock::~WriteLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  if (owns_local_) local_->unlock();
}

bool Repository::is_initialized(const fs::path& root) {
  return fs::is_directory(root / "objects") && fs::is_directory(root / "runs") &&
         fs::exists(root / "index.jsonl");
}

Repository Repository::init(const fs::path& root) {
  std::error_code ec;
  for (const char* dir : {"", "objects", "runs", "work", "locks"}) {
    fs::create_directories(root / dir, ec);
    if (ec) throw Error(Errc::storage_io, "mkdir '" + (root / dir).string() + "': " + ec.message());
  }
  Repository repo(root);
  for (const auto& p : {repo.index_path(), repo.events_path(), repo.plans_path(),
                        repo.promotions_path(), repo.lineage_path()}) {
    touch(p, "");
  }
  touch(repo.counters_path(), "{}\n");
  touch(repo.pins_path(), "{}\n");
  touch(repo.config_path(),
        "{\n  \"parallelism\": 4,\n  \"subset_fraction\": 0.1,\n  \"subset_seed\": 0\n}\n");
  return repo;
}

Repository Repository::open(const fs::path& root) {
  if (!is_initialized(root)) {
    throw Error(Errc::repo_not_initialized, "no repository at '" + root.string() + "'");
  }
  return Repository(root);
}

WriteLock Repository::lock() const { return WriteLock(root_ / "locks" / "write.lock", lock_timeout_); }

WriteLock Repository::lock_branch(const std::string& branch) const {
  // branch names contain '/', so the lock file is keyed by a digest
  const auto digest = ContentHash::of(branch);
  return WriteLock(root_ / "locks" / ("branch-" + std::string(digest.prefix(16)) + ".lock"), lock_timeout_);
}

}  // namespace ca
