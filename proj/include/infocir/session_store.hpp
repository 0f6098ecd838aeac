#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"

namespace infocir {

inline constexpr const char* kEventQueryIssued = "query_issued";
inline constexpr const char* kEventIdealsSelected = "ideals_selected";
inline constexpr const char* kEventVariantsEvaluated = "variants_evaluated";
inline constexpr const char* kEventAttributionRequested = "attribution_requested";

bool is_event_type(const std::string& type);

struct SessionEvent {
  std::string type;
  std::int64_t ts_us = 0;  // microseconds since the epoch, strictly increasing per session
  std::uint64_t seq = 0;   // 0-based position in the file
  nlohmann::json payload;

  nlohmann::json to_json() const;
  static SessionEvent from_json(const nlohmann::json& j);
};

struct Session {
  std::string id;
  std::int64_t created_at_us = 0;
  std::vector<SessionEvent> events;

  /// Last event of the given type, or nullptr.
  const SessionEvent* last(const std::string& type) const;
};

/// Session ids are 1-64 characters from [A-Za-z0-9_-].
bool valid_session_id(const std::string& id);
std::string new_session_id();

/// One JSON-lines file per session: <dir>/<id>.jsonl. Lines are only ever
/// appended, each write is fsync'ed before append() returns.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir);

  /// Appends one event, creating the session file on first use. Refuses to
  /// write after a truncated final line.
  SessionEvent append(const std::string& session_id, const std::string& type, nlohmann::json payload);

  /// Errors: kNotFound for a missing file, kFormat for an empty file
  /// ("no events"), an unparsable line or a final line without a newline
  /// (the message names the 1-based line number).
  Session load(const std::string& session_id) const;

  bool exists(const std::string& session_id) const;
  std::filesystem::path path_for(const std::string& session_id) const;
  const std::filesystem::path& dir() const { return dir_; }

  /// Per-session lock held by writers so each session has a single writer.
  /// Recursive: callers may hold it across append().
  std::shared_ptr<std::recursive_mutex> session_mutex(const std::string& session_id);

 private:
  struct Tail {
    std::int64_t ts_us = 0;
    std::uint64_t next_seq = 0;
  };

  Tail tail_of(const std::string& session_id) const;

  std::filesystem::path dir_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<std::recursive_mutex>> locks_;
  std::map<std::string, Tail> tails_;
};

}  // namespace infocir
