#include "infocir/session_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "infocir/error.hpp"

namespace infocir {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::int64_t now_us() {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void write_all(int fd, const std::string& data, const fs::path& path) {
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(ErrorKind::kIo, "write failed for " + path.string() + ": " + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

bool is_event_type(const std::string& type) {
  return type == kEventQueryIssued || type == kEventIdealsSelected || type == kEventVariantsEvaluated ||
         type == kEventAttributionRequested;
}

json SessionEvent::to_json() const {
  return {{"type", type}, {"ts_us", ts_us}, {"seq", seq}, {"payload", payload}};
}

SessionEvent SessionEvent::from_json(const json& j) {
  SessionEvent e;
  e.type = j.at("type").get<std::string>();
  if (!is_event_type(e.type)) throw std::invalid_argument("unknown event type \"" + e.type + "\"");
  e.ts_us = j.at("ts_us").get<std::int64_t>();
  e.seq = j.at("seq").get<std::uint64_t>();
  e.payload = j.at("payload");
  return e;
}

const SessionEvent* Session::last(const std::string& type) const {
  for (auto it = events.rbegin(); it != events.rend(); ++it) {
    if (it->type == type) return &*it;
  }
  return nullptr;
}

bool valid_session_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
  }
  return true;
}

std::string new_session_id() {
  static std::mutex mu;
  static std::mt19937_64 gen{std::random_device{}()};
  std::lock_guard lock(mu);
  std::ostringstream os;
  os << "s" << std::hex << gen();
  return os.str();
}

SessionStore::SessionStore(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create session directory " + dir_.string() + ": " + ec.message());
}

fs::path SessionStore::path_for(const std::string& session_id) const {
  if (!valid_session_id(session_id)) fail(ErrorKind::kInvalidArgument, "invalid session id: " + session_id);
  return dir_ / (session_id + ".jsonl");
}

bool SessionStore::exists(const std::string& session_id) const {
  return valid_session_id(session_id) && fs::exists(path_for(session_id));
}

std::shared_ptr<std::recursive_mutex> SessionStore::session_mutex(const std::string& session_id) {
  std::lock_guard lock(mu_);
  auto& m = locks_[session_id];
  if (!m) m = std::make_shared<std::recursive_mutex>();
  return m;
}

SessionStore::Tail SessionStore::tail_of(const std::string& session_id) const {
  if (!fs::exists(path_for(session_id))) return {};
  const Session s = load(session_id);
  return {s.events.back().ts_us, s.events.size()};
}

SessionEvent SessionStore::append(const std::string& session_id, const std::string& type, json payload) {
  if (!is_event_type(type)) fail(ErrorKind::kInvalidArgument, "unknown event type: " + type);
  const auto path = path_for(session_id);
  auto lock_ptr = session_mutex(session_id);
  std::lock_guard session_lock(*lock_ptr);

  Tail tail;
  {
    std::lock_guard lock(mu_);
    auto it = tails_.find(session_id);
    if (it != tails_.end()) tail = it->second;
  }
  if (tail.next_seq == 0) tail = tail_of(session_id);

  SessionEvent e;
  e.type = type;
  e.ts_us = std::max(now_us(), tail.ts_us + 1);
  e.seq = tail.next_seq;
  e.payload = std::move(payload);
  const std::string line = e.to_json().dump() + "\n";

  const bool fresh = !fs::exists(path);
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) fail(ErrorKind::kIo, "cannot open " + path.string() + ": " + std::strerror(errno));
  try {
    write_all(fd, line, path);
    if (::fsync(fd) != 0) fail(ErrorKind::kIo, "fsync failed for " + path.string());
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  if (fresh) {
    const int dfd = ::open(dir_.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
    if (dfd >= 0) {
      ::fsync(dfd);
      ::close(dfd);
    }
  }

  std::lock_guard lock(mu_);
  tails_[session_id] = {e.ts_us, e.seq + 1};
  return e;
}

Session SessionStore::load(const std::string& session_id) const {
  const auto path = path_for(session_id);
  if (!fs::exists(path)) fail(ErrorKind::kNotFound, "unknown session: " + session_id);
  const std::string text = read_file(path);
  if (text.empty()) fail(ErrorKind::kFormat, "session " + session_id + ": no events");

  Session s;
  s.id = session_id;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    ++line_no;
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) {
      fail(ErrorKind::kFormat, "session " + session_id + ": line " + std::to_string(line_no) +
                                   " is truncated (no trailing newline)");
    }
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    SessionEvent e;
    try {
      e = SessionEvent::from_json(json::parse(line));
    } catch (const std::exception& ex) {
      fail(ErrorKind::kFormat,
           "session " + session_id + ": corrupt line " + std::to_string(line_no) + ": " + ex.what());
    }
    if (!s.events.empty() && e.ts_us <= s.events.back().ts_us) {
      fail(ErrorKind::kFormat, "session " + session_id + ": line " + std::to_string(line_no) +
                                   " is out of time order");
    }
    s.events.push_back(std::move(e));
  }
  s.created_at_us = s.events.front().ts_us;
  return s;
}

}  // namespace infocir
