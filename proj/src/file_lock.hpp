//
// Copyright 2026 The Sheetguard Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// flock-based locking and appends shared by the on-disk stores.

#pragma once

#include <filesystem>
#include <string>

namespace sheetguard::detail {

// flock on a dedicated file; one open file description per instance, so it
// excludes other threads of this process as well as other processes.
// Throws StorageFailure.
class FileLock {
 public:
  FileLock(const std::filesystem::path& path, bool exclusive);
  ~FileLock();
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

// Appends `line` plus '\n' with O_APPEND. Throws StorageFailure.
void append_line(const std::filesystem::path& file, const std::string& line, bool sync = false);

}  // namespace sheetguard::detail
