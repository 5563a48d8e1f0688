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

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sheetguard {

enum class ErrorCode {
  // grid-model
  MalformedAddress,
  MalformedFormula,
  // ooxml-io
  NotAPackage,
  NotASpreadsheet,
  CorruptPart,
  // discovery
  RootNotFound,
  SyntaxError,
  UnknownField,
  // risk-analysis
  InvalidConfig,
  // migration
  EmptySelection,
  InvalidPlan,
  RepositoryUnreachable,
  // change-audit
  OutboxUnwritable,
  // workflow
  UnknownVersion,
  NoChange,
  DuplicateId,
  UnknownRequest,
  IllegalTransition,
  SeparationOfDuties,
  BadSignature,
  MissingSignature,
  CorruptLog,
  // repo-store
  Locked,
  BadToken,
  InvalidPath,
  NotFound,
  GoneVersion,
  InvalidPolicy,
  StorageFailure,
  // shared
  IoError,
  InvalidArgument,
};

std::string_view error_code_name(ErrorCode code);

// Every operational failure in the library surfaces as an Error. `offset` is
// meaningful for parse errors (byte offset into the input), npos otherwise.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::size_t offset = std::string::npos)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        offset_(offset) {}

  ErrorCode code() const noexcept { return code_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  ErrorCode code_;
  std::size_t offset_;
};

}  // namespace sheetguard
