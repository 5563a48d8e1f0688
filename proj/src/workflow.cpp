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

#include "sheetguard/workflow.hpp"

#include <sys/stat.h>

#include <algorithm>
#include <fstream>
#include <functional>

#include "file_lock.hpp"
#include "json.hpp"
#include "sheetguard/error.hpp"

namespace sheetguard::workflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kStates[] = {"Draft",    "Submitted", "InReview",
                                        "Approved", "Rejected",  "Withdrawn"};
constexpr std::string_view kActions[] = {"Create", "Submit", "StartReview", "Approve",
                                         "Reject", "Rework", "Withdraw"};

bool is_hex64(std::string_view s) {
  return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

void check_text(std::string_view what, std::string_view s) {
  if (s.empty()) throw Error(ErrorCode::InvalidArgument, std::string(what) + " is empty");
  for (unsigned char c : s) {
    if (c < 0x20 || c == 0x7f) {
      throw Error(ErrorCode::InvalidArgument, std::string(what) + " contains a control character");
    }
  }
}

std::string_view statement_for(Action a) { return a == Action::Approve ? "approved" : "rejected"; }

// Actor and signature rules on top of the state table. `content_hash`
// supplies the proposed version's hash; null skips that comparison.
State check_step(const ChangeRequest& cr, Action action, std::string_view actor,
                 const std::optional<Signature>& sig,
                 const std::function<std::string()>& content_hash) {
  const auto next = next_state(cr.state, action);
  if (!next) {
    throw Error(ErrorCode::IllegalTransition, std::string(action_name(action)) + " is not allowed in " +
                                                  std::string(state_name(cr.state)));
  }
  switch (action) {
    case Action::Submit:
    case Action::Rework:
    case Action::Withdraw:
      if (actor != cr.requester) {
        throw Error(ErrorCode::IllegalTransition,
                    std::string(action_name(action)) + " is reserved to the requester");
      }
      break;
    case Action::StartReview:
      if (!cr.reviewer.empty() && actor != cr.reviewer) {
        throw Error(ErrorCode::IllegalTransition, "review is assigned to " + cr.reviewer);
      }
      break;
    case Action::Approve:
    case Action::Reject:
      if (actor == cr.requester) {
        throw Error(ErrorCode::SeparationOfDuties, "the requester cannot decide their own request");
      }
      if (!cr.reviewer.empty() && actor != cr.reviewer) {
        throw Error(ErrorCode::IllegalTransition, "review is assigned to " + cr.reviewer);
      }
      if (!sig) throw Error(ErrorCode::MissingSignature, "a signature is required");
      if (sig->actor != actor) throw Error(ErrorCode::BadSignature, "signed by " + sig->actor);
      if (sig->statement != statement_for(action)) {
        throw Error(ErrorCode::BadSignature, "statement '" + sig->statement + "' does not match");
      }
      if (!is_hex64(sig->content_hash)) throw Error(ErrorCode::BadSignature, "malformed content hash");
      if (content_hash && sig->content_hash != content_hash()) {
        throw Error(ErrorCode::BadSignature, "content hash does not match version " +
                                                 std::to_string(cr.proposed_version));
      }
      break;
    case Action::Create:
      break;
  }
  return *next;
}

std::map<std::string, std::string> signature_payload(const Signature& s) {
  return {{"signer", s.actor},
          {"signed_at", format_timestamp(s.timestamp)},
          {"content_hash", s.content_hash},
          {"statement", s.statement}};
}

const std::string& field(const TransitionEvent& e, const std::string& key) {
  const auto it = e.payload.find(key);
  if (it == e.payload.end()) {
    throw Error(ErrorCode::CorruptLog, "event " + std::to_string(e.seq) + " lacks payload " + key);
  }
  return it->second;
}

int int_field(const TransitionEvent& e, const std::string& key) {
  const auto& s = field(e, key);
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size() && std::to_string(v) == s) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::CorruptLog, "event " + std::to_string(e.seq) + " has a bad " + key);
}

// Applies one event to the request map; every failure is CorruptLog.
void apply_event(std::map<std::string, ChangeRequest, std::less<>>& reqs, const TransitionEvent& e) {
  const std::string at = "event " + std::to_string(e.seq) + ": ";
  if (e.action == Action::Create) {
    if (reqs.count(e.request_id)) throw Error(ErrorCode::CorruptLog, at + "duplicate request " + e.request_id);
    ChangeRequest cr;
    cr.id = e.request_id;
    cr.resource_path = field(e, "resource_path");
    cr.requester = field(e, "requester");
    cr.reviewer = field(e, "reviewer");
    cr.title = field(e, "title");
    cr.description = field(e, "description");
    cr.base_version = int_field(e, "base_version");
    cr.proposed_version = int_field(e, "proposed_version");
    if (cr.requester != e.actor) throw Error(ErrorCode::CorruptLog, at + "created by someone else");
    if (cr.proposed_version <= cr.base_version || cr.base_version < 1) {
      throw Error(ErrorCode::CorruptLog, at + "bad version pair");
    }
    reqs.emplace(cr.id, std::move(cr));
    return;
  }
  const auto it = reqs.find(e.request_id);
  if (it == reqs.end()) throw Error(ErrorCode::CorruptLog, at + "unknown request " + e.request_id);
  std::optional<Signature> sig;
  if (e.action == Action::Approve || e.action == Action::Reject) {
    if (e.payload.count("signer")) {
      const auto when = parse_timestamp(field(e, "signed_at"));
      if (!when) throw Error(ErrorCode::CorruptLog, at + "bad signature time");
      sig = Signature{field(e, "signer"), *when, field(e, "content_hash"), field(e, "statement")};
    }
  }
  try {
    it->second.state = check_step(it->second, e.action, e.actor, sig, nullptr);
  } catch (const Error& err) {
    throw Error(ErrorCode::CorruptLog, at + err.what());
  }
}

}  // namespace

std::string_view state_name(State s) { return kStates[static_cast<int>(s)]; }
std::string_view action_name(Action a) { return kActions[static_cast<int>(a)]; }

std::optional<State> parse_state(std::string_view name) {
  for (int i = 0; i < 6; ++i) {
    if (iequals(kStates[i], name)) return static_cast<State>(i);
  }
  return std::nullopt;
}

std::optional<Action> parse_action(std::string_view name) {
  for (int i = 0; i < 7; ++i) {
    if (iequals(kActions[i], name)) return static_cast<Action>(i);
  }
  return std::nullopt;
}

std::optional<State> next_state(State from, Action action) {
  switch (action) {
    case Action::Submit:
      if (from == State::Draft) return State::Submitted;
      break;
    case Action::StartReview:
      if (from == State::Submitted) return State::InReview;
      break;
    case Action::Approve:
      if (from == State::InReview) return State::Approved;
      break;
    case Action::Reject:
      if (from == State::InReview) return State::Rejected;
      break;
    case Action::Rework:
      if (from == State::Rejected) return State::Draft;
      break;
    case Action::Withdraw:
      if (from == State::Draft || from == State::Submitted || from == State::InReview) {
        return State::Withdrawn;
      }
      break;
    case Action::Create:
      break;
  }
  return std::nullopt;
}

Signature sign(std::string_view actor, std::string_view content, Action decision, Timestamp when) {
  if (decision != Action::Approve && decision != Action::Reject) {
    throw Error(ErrorCode::InvalidArgument, "only Approve and Reject are signed");
  }
  return {std::string(actor), when, sha256_hex(content), std::string(statement_for(decision))};
}

std::string canonical_payload(const std::map<std::string, std::string>& payload) {
  std::string out;
  for (const auto& [k, v] : payload) {
    if (!out.empty()) out += '\n';
    out += k;
    out += '=';
    for (char c : v) {
      switch (c) {
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        default: out += c;
      }
    }
  }
  return out;
}

std::string canonical_encoding(const TransitionEvent& e) {
  std::string out;
  out += "request_id=" + e.request_id + '\n';
  out += "seq=" + std::to_string(e.seq) + '\n';
  out += "action=" + std::string(action_name(e.action)) + '\n';
  out += "actor=" + e.actor + '\n';
  out += "timestamp=" + format_timestamp(e.timestamp) + '\n';
  out += "payload_hash=" + e.payload_hash;
  return out;
}

void seal(TransitionEvent& e, std::string_view prev_chain_hash) {
  e.payload_hash = sha256_hex(canonical_payload(e.payload));
  e.chain_hash = sha256_hex(std::string(prev_chain_hash) + canonical_encoding(e));
}

std::string encode_event(const TransitionEvent& e) {
  json payload = json::object();
  for (const auto& [k, v] : e.payload) payload[k] = v;
  const json j{{"request_id", e.request_id},
               {"seq", e.seq},
               {"action", action_name(e.action)},
               {"actor", e.actor},
               {"timestamp", format_timestamp(e.timestamp)},
               {"payload", payload},
               {"payload_hash", e.payload_hash},
               {"chain_hash", e.chain_hash}};
  try {
    return j.dump();
  } catch (const json::exception&) {
    throw Error(ErrorCode::InvalidArgument, "event text is not valid UTF-8");
  }
}

TransitionEvent decode_event(std::string_view line) {
  const auto bad = [](const std::string& why) { return Error(ErrorCode::CorruptLog, why); };
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception&) {
    throw bad("unparseable event");
  }
  if (!j.is_object() || j.size() != 8) throw bad("unexpected event shape");
  TransitionEvent e;
  try {
    e.request_id = j.at("request_id").get<std::string>();
    e.seq = j.at("seq").get<std::int64_t>();
    const auto action = parse_action(j.at("action").get<std::string>());
    if (!action) throw bad("unknown action");
    e.action = *action;
    e.actor = j.at("actor").get<std::string>();
    const auto ts = parse_timestamp(j.at("timestamp").get<std::string>());
    if (!ts) throw bad("bad timestamp");
    e.timestamp = *ts;
    const auto& payload = j.at("payload");
    if (!payload.is_object()) throw bad("payload is not an object");
    for (const auto& [k, v] : payload.items()) e.payload[k] = v.get<std::string>();
    e.payload_hash = j.at("payload_hash").get<std::string>();
    e.chain_hash = j.at("chain_hash").get<std::string>();
  } catch (const json::exception&) {
    throw bad("missing or mistyped event field");
  }
  if (!j.at("seq").is_number_integer()) throw bad("seq is not an integer");
  std::string again;
  try {
    again = encode_event(e);
  } catch (const Error&) {
    throw bad("event text is not valid UTF-8");
  }
  if (again != line) throw bad("event is not in canonical form");
  return e;
}

LogVerdict verify_log(const std::vector<TransitionEvent>& events) {
  std::string prev(kGenesisHash);
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    const auto pos = static_cast<std::int64_t>(i + 1);
    TransitionEvent again = e;
    seal(again, prev);
    if (e.seq != pos || again.payload_hash != e.payload_hash || again.chain_hash != e.chain_hash) {
      return {false, pos};
    }
    prev = e.chain_hash;
  }
  return {};
}

LogVerdict verify_log_text(std::string_view jsonl) {
  std::vector<TransitionEvent> events;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    const auto nl = jsonl.find('\n', pos);
    const auto n = static_cast<std::int64_t>(events.size() + 1);
    if (nl == std::string_view::npos) return {false, n};  // torn last line
    try {
      events.push_back(decode_event(jsonl.substr(pos, nl - pos)));
    } catch (const Error&) {
      return {false, n};
    }
    pos = nl + 1;
  }
  return verify_log(events);
}

ChangeRequest replay(const std::vector<TransitionEvent>& events) {
  if (events.empty()) throw Error(ErrorCode::CorruptLog, "no events");
  std::map<std::string, ChangeRequest, std::less<>> reqs;
  for (const auto& e : events) {
    if (e.request_id != events.front().request_id) {
      throw Error(ErrorCode::CorruptLog, "events belong to several requests");
    }
    apply_event(reqs, e);
  }
  return reqs.begin()->second;
}

State current_state(const std::vector<TransitionEvent>& events) { return replay(events).state; }

Workflow::Workflow(fs::path log_path, repo::Store& store, Clock clock, Options options)
    : log_path_(std::move(log_path)),
      lock_path_(log_path_.string() + ".lock"),
      store_(store),
      clock_(std::move(clock)),
      options_(options) {
  std::error_code ec;
  if (log_path_.has_parent_path()) fs::create_directories(log_path_.parent_path(), ec);
}

void Workflow::refresh() {
  struct stat st {};
  if (::stat(log_path_.c_str(), &st) != 0) {
    if (offset_ > 0) throw Error(ErrorCode::CorruptLog, "log disappeared");
    return;
  }
  const std::pair<std::uintmax_t, std::uintmax_t> identity{st.st_dev, st.st_ino};
  if (offset_ > 0 && identity != file_id_) {
    // Replaced rather than appended to: verify from the start.
    offset_ = 0;
    last_chain_ = kGenesisHash;
    events_.clear();
    requests_.clear();
  }
  file_id_ = identity;
  const auto size = static_cast<std::uintmax_t>(st.st_size);
  if (size < offset_) throw Error(ErrorCode::CorruptLog, "log was truncated");
  if (size == offset_) return;
  std::ifstream in(log_path_, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(offset_));
  std::string tail(size - offset_, '\0');
  if (!in.read(tail.data(), static_cast<std::streamsize>(tail.size()))) {
    throw Error(ErrorCode::StorageFailure, "cannot read " + log_path_.string());
  }
  std::size_t pos = 0;
  while (pos < tail.size()) {
    const auto nl = tail.find('\n', pos);
    const auto n = static_cast<std::int64_t>(events_.size() + 1);
    const std::string where = "log entry " + std::to_string(n) + ": ";
    if (nl == std::string::npos) throw Error(ErrorCode::CorruptLog, where + "incomplete line");
    TransitionEvent e;
    try {
      e = decode_event(std::string_view(tail).substr(pos, nl - pos));
    } catch (const Error& err) {
      throw Error(ErrorCode::CorruptLog, where + err.what());
    }
    TransitionEvent again = e;
    seal(again, last_chain_);
    if (e.seq != n || again.chain_hash != e.chain_hash || again.payload_hash != e.payload_hash) {
      throw Error(ErrorCode::CorruptLog, where + "hash chain broken");
    }
    apply_event(requests_, e);
    last_chain_ = e.chain_hash;
    events_.push_back(std::move(e));
    offset_ += nl - pos + 1;
    pos = nl + 1;
  }
}

TransitionEvent Workflow::append(TransitionEvent e) {
  e.seq = static_cast<std::int64_t>(events_.size() + 1);
  e.timestamp = clock_();
  seal(e, last_chain_);
  const auto line = encode_event(e);
  auto next = requests_;
  apply_event(next, e);  // defensive: never write what replay would refuse
  detail::append_line(log_path_, line, options_.sync);
  requests_ = std::move(next);
  offset_ += line.size() + 1;
  last_chain_ = e.chain_hash;
  events_.push_back(e);
  return e;
}

std::string Workflow::proposed_hash(const ChangeRequest& cr) const {
  std::vector<repo::VersionRecord> hist;
  try {
    hist = store_.history(cr.resource_path);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NotFound) throw;
  }
  for (const auto& rec : hist) {
    if (rec.version == cr.proposed_version && !rec.purged) return rec.sha256;
  }
  throw Error(ErrorCode::UnknownVersion,
              cr.resource_path + " version " + std::to_string(cr.proposed_version) + " is unavailable");
}

ChangeRequest Workflow::create_request(const CreateParams& params) {
  check_text("requester", params.requester);
  if (!params.reviewer.empty()) check_text("reviewer", params.reviewer);
  const auto path = repo::normalize_path(params.resource_path);
  if (path.empty()) throw Error(ErrorCode::InvalidPath, "the root is not a resource");

  std::lock_guard guard(mu_);
  detail::FileLock lock(lock_path_, true);
  refresh();

  std::string id = params.id;
  if (id.empty()) {
    for (std::size_t n = requests_.size() + 1;; ++n) {
      id = "CR-" + std::to_string(n);
      if (!requests_.count(id)) break;
    }
  }
  check_text("request id", id);
  if (requests_.count(id)) throw Error(ErrorCode::DuplicateId, id);
  if (params.base_version == params.proposed_version) {
    throw Error(ErrorCode::NoChange, "base and proposed versions are both " +
                                         std::to_string(params.base_version));
  }

  std::vector<repo::VersionRecord> hist;
  try {
    hist = store_.history(path);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NotFound) throw;
  }
  for (int v : {params.base_version, params.proposed_version}) {
    const bool ok = std::any_of(hist.begin(), hist.end(), [&](const repo::VersionRecord& r) {
      return r.version == v && !r.purged;
    });
    if (!ok) throw Error(ErrorCode::UnknownVersion, path + " has no version " + std::to_string(v));
  }
  if (params.proposed_version < params.base_version) {
    throw Error(ErrorCode::InvalidArgument, "the proposed version must be newer than the base");
  }

  TransitionEvent e;
  e.request_id = id;
  e.action = Action::Create;
  e.actor = params.requester;
  e.payload = {{"resource_path", path},
               {"requester", params.requester},
               {"reviewer", params.reviewer},
               {"title", params.title},
               {"description", params.description},
               {"base_version", std::to_string(params.base_version)},
               {"proposed_version", std::to_string(params.proposed_version)}};
  append(std::move(e));
  return requests_.at(id);
}

ChangeRequest Workflow::transition(std::string_view id, Action action, std::string_view actor,
                                   const std::optional<Signature>& signature) {
  check_text("actor", actor);
  std::lock_guard guard(mu_);
  detail::FileLock lock(lock_path_, true);
  refresh();

  const auto it = requests_.find(id);
  if (it == requests_.end()) throw Error(ErrorCode::UnknownRequest, std::string(id));
  if (action == Action::Create) throw Error(ErrorCode::IllegalTransition, "request already exists");
  const ChangeRequest cr = it->second;
  check_step(cr, action, actor, signature, [&] { return proposed_hash(cr); });

  TransitionEvent e;
  e.request_id = cr.id;
  e.action = action;
  e.actor = std::string(actor);
  if (signature && (action == Action::Approve || action == Action::Reject)) {
    e.payload = signature_payload(*signature);
  }
  append(std::move(e));
  if (action == Action::Approve) {
    store_.annotate(cr.resource_path, cr.proposed_version, actor,
                    "approved change request " + cr.id);
  }
  return requests_.at(cr.id);
}

ChangeRequest Workflow::get(std::string_view id) {
  std::lock_guard guard(mu_);
  detail::FileLock lock(lock_path_, false);
  refresh();
  const auto it = requests_.find(id);
  if (it == requests_.end()) throw Error(ErrorCode::UnknownRequest, std::string(id));
  return it->second;
}

std::vector<ChangeRequest> Workflow::requests() {
  std::lock_guard guard(mu_);
  detail::FileLock lock(lock_path_, false);
  refresh();
  std::vector<ChangeRequest> out;
  for (const auto& [id, cr] : requests_) out.push_back(cr);
  return out;
}

std::vector<TransitionEvent> Workflow::events() {
  std::lock_guard guard(mu_);
  detail::FileLock lock(lock_path_, false);
  refresh();
  return events_;
}

std::vector<TransitionEvent> Workflow::events_for(std::string_view id) {
  std::vector<TransitionEvent> out;
  for (auto& e : events()) {
    if (e.request_id == id) out.push_back(std::move(e));
  }
  return out;
}

}  // namespace sheetguard::workflow
