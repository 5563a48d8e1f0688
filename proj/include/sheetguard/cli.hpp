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

// The sheetguard command line, as a library so tests can drive it.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sheetguard/audit.hpp"

namespace sheetguard::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kOperationalError = 1;
inline constexpr int kUsageError = 2;

// Settings read from the JSON config named by --config or SHEETGUARD_CONFIG.
// Keys: store_root, risk_config, outbox, bind, workflow_log, subscriptions
// ([{"user": ..., "filter": ...}]) and, for serve, users. Relative paths are
// resolved against the config file's directory.
struct CliConfig {
  std::filesystem::path file;  // empty when no config was given
  std::filesystem::path store_root;
  std::optional<std::filesystem::path> risk_config;
  std::filesystem::path outbox;
  std::string bind = "127.0.0.1:8080";
  std::filesystem::path workflow_log;  // default <store_root>/workflow.jsonl
  std::vector<audit::Subscription> subscriptions;
  std::string text;  // raw file contents
};

// Throws InvalidConfig, including for a risk_config file that is missing or
// invalid.
CliConfig load_config(const std::filesystem::path& file);

// Runs one command line (without the program name). Machine-readable
// output goes to `out`, diagnostics to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sheetguard::cli
