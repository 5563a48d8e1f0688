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

// Change-request workflow over an append-only, hash-chained event log.
//
// Legal transitions:
//   Draft      --Submit-->       Submitted
//   Submitted  --StartReview-->  InReview
//   InReview   --Approve-->      Approved   (signature, approver != requester)
//   InReview   --Reject-->       Rejected   (signature, approver != requester)
//   Rejected   --Rework-->       Draft
//   Draft, Submitted, InReview --Withdraw--> Withdrawn
// Submit, Rework and Withdraw belong to the requester. When a reviewer is
// assigned, only that reviewer may start the review and decide.
//
// Each event is hashed in a canonical form: newline-separated key=value lines
// in the fixed order request_id, seq, action, actor, timestamp, payload_hash.
// chain_hash(n) = SHA-256(chain_hash(n-1) + canonical(n)), chain_hash(0) = 64
// zeros. The payload is canonicalized as key=value lines sorted by key, with
// '\\', '\n' and '\r' in values escaped as \\, \n and \r.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sheetguard/repo.hpp"
#include "sheetguard/util.hpp"

namespace sheetguard::workflow {

enum class State { Draft, Submitted, InReview, Approved, Rejected, Withdrawn };
enum class Action { Create, Submit, StartReview, Approve, Reject, Rework, Withdraw };

std::string_view state_name(State s);
std::string_view action_name(Action a);
std::optional<State> parse_state(std::string_view name);
std::optional<Action> parse_action(std::string_view name);

// The state table alone, without actor or signature rules. Create has no
// source state and always yields nullopt here.
std::optional<State> next_state(State from, Action action);

struct Signature {
  std::string actor;
  Timestamp timestamp{};
  std::string content_hash;  // SHA-256 hex of the signed version's bytes
  std::string statement;     // "approved" or "rejected"

  bool operator==(const Signature&) const = default;
};

// Signature over `content` for an Approve or Reject decision.
Signature sign(std::string_view actor, std::string_view content, Action decision, Timestamp when);

struct ChangeRequest {
  std::string id;
  std::string resource_path;
  std::string requester;
  std::string reviewer;  // empty: anyone but the requester
  std::string title;
  std::string description;
  int base_version = 0;
  int proposed_version = 0;
  State state = State::Draft;

  bool operator==(const ChangeRequest&) const = default;
};

struct TransitionEvent {
  std::string request_id;
  std::int64_t seq = 0;
  Action action = Action::Create;
  std::string actor;
  Timestamp timestamp{};
  std::map<std::string, std::string> payload;
  std::string payload_hash;
  std::string chain_hash;

  bool operator==(const TransitionEvent&) const = default;
};

inline constexpr std::string_view kGenesisHash =
    "0000000000000000000000000000000000000000000000000000000000000000";

std::string canonical_payload(const std::map<std::string, std::string>& payload);
// Every field except chain_hash, in the fixed order.
std::string canonical_encoding(const TransitionEvent& e);
// Sets payload_hash and chain_hash from the payload and the previous hash.
void seal(TransitionEvent& e, std::string_view prev_chain_hash);

// One JSON object, no trailing newline. decode_event throws CorruptLog for
// anything that is not exactly what encode_event would produce.
std::string encode_event(const TransitionEvent& e);
TransitionEvent decode_event(std::string_view line);

struct LogVerdict {
  bool ok = true;
  std::int64_t first_bad_seq = 0;  // position in the log, from 1; 0 when ok

  bool operator==(const LogVerdict&) const = default;
};

// Checks sequence numbers, payload hashes and the hash chain.
LogVerdict verify_log(const std::vector<TransitionEvent>& events);
// Same over the raw JSON-lines text, so a byte change that still decodes to
// an equal event is caught too.
LogVerdict verify_log_text(std::string_view jsonl);

// Rebuilds one request from its events. Throws CorruptLog on any step the
// live rules would have refused (content hashes are not rechecked).
ChangeRequest replay(const std::vector<TransitionEvent>& events);
State current_state(const std::vector<TransitionEvent>& events);

struct CreateParams {
  std::string id;  // empty: the next free "CR-<n>"
  std::string resource_path;
  std::string requester;
  std::string reviewer;
  std::string title;
  std::string description;
  int base_version = 0;
  int proposed_version = 0;
};

struct Options {
  bool sync = true;  // fdatasync each append
};

// Log appends are serialized with an exclusive flock on "<log>.lock"; reads
// take it shared. Several instances may share one log.
class Workflow {
 public:
  Workflow(std::filesystem::path log_path, repo::Store& store, Clock clock = system_clock(),
           Options options = {});

  // Throws UnknownVersion, NoChange, DuplicateId, InvalidArgument.
  ChangeRequest create_request(const CreateParams& params);

  // Throws UnknownRequest, IllegalTransition, SeparationOfDuties,
  // MissingSignature, BadSignature. Approve also annotates the approved
  // version in the store's audit trail.
  ChangeRequest transition(std::string_view id, Action action, std::string_view actor,
                           const std::optional<Signature>& signature = std::nullopt);

  // Throws UnknownRequest.
  ChangeRequest get(std::string_view id);
  std::vector<ChangeRequest> requests();
  std::vector<TransitionEvent> events();
  std::vector<TransitionEvent> events_for(std::string_view id);

  const std::filesystem::path& log_path() const { return log_path_; }

 private:
  void refresh();
  std::string proposed_hash(const ChangeRequest& cr) const;
  TransitionEvent append(TransitionEvent e);

  std::filesystem::path log_path_;
  std::filesystem::path lock_path_;
  repo::Store& store_;
  Clock clock_;
  Options options_;
  std::mutex mu_;

  // Cache of the log prefix already read and verified. A file replaced
  // under the same name (new inode) is reread in full.
  std::pair<std::uintmax_t, std::uintmax_t> file_id_{};
  std::uintmax_t offset_ = 0;
  std::string last_chain_{kGenesisHash};
  std::vector<TransitionEvent> events_;
  std::map<std::string, ChangeRequest, std::less<>> requests_;
};

}  // namespace sheetguard::workflow
