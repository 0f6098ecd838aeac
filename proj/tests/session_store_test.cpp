#include <gtest/gtest.h>

#include <thread>

#include "infocir/error.hpp"
#include "infocir/session_store.hpp"
#include "test_support.hpp"

using namespace infocir;
using nlohmann::json;
namespace ts = testing_support;

namespace {

std::string load_error(const SessionStore& store, const std::string& id, ErrorKind* kind = nullptr) {
  try {
    store.load(id);
  } catch (const Error& e) {
    if (kind) *kind = e.kind();
    return e.what();
  }
  return {};
}

}  // namespace

TEST(SessionStore, AppendAndLoadInOrder) {
  ts::TempDir dir;
  SessionStore store(dir.path());
  store.append("abc", kEventQueryIssued, {{"query", 1}});
  store.append("abc", kEventIdealsSelected, {{"ideals", {"x"}}});
  store.append("abc", kEventVariantsEvaluated, json::object());
  const auto s = store.load("abc");
  ASSERT_EQ(s.events.size(), 3u);
  EXPECT_EQ(s.events[0].type, kEventQueryIssued);
  EXPECT_EQ(s.events[1].payload.at("ideals").at(0), "x");
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(s.events[i].seq, i);
  EXPECT_LT(s.events[0].ts_us, s.events[1].ts_us);
  EXPECT_LT(s.events[1].ts_us, s.events[2].ts_us);
  EXPECT_EQ(s.created_at_us, s.events[0].ts_us);
  EXPECT_EQ(s.last(kEventQueryIssued)->seq, 0u);
  EXPECT_EQ(s.last(kEventAttributionRequested), nullptr);
}

TEST(SessionStore, OneJsonObjectPerLine) {
  ts::TempDir dir;
  SessionStore store(dir.path());
  store.append("s1", kEventQueryIssued, {{"k", 3}});
  store.append("s1", kEventQueryIssued, {{"k", 4}});
  const auto text = ts::read_text(dir / "s1.jsonl");
  std::istringstream in(text);
  int lines = 0;
  for (std::string line; std::getline(in, line); ++lines) {
    const auto j = json::parse(line);
    EXPECT_EQ(j.at("type"), kEventQueryIssued);
    EXPECT_TRUE(j.contains("ts_us"));
    EXPECT_EQ(j.at("payload").at("k"), 3 + lines);
  }
  EXPECT_EQ(lines, 2);
  EXPECT_EQ(text.back(), '\n');
}

TEST(SessionStore, TimestampsStrictlyIncreaseUnderBurst) {
  ts::TempDir dir;
  SessionStore store(dir.path());
  for (int i = 0; i < 200; ++i) store.append("burst", kEventQueryIssued, i);
  const auto s = store.load("burst");
  for (std::size_t i = 1; i < s.events.size(); ++i) ASSERT_LT(s.events[i - 1].ts_us, s.events[i].ts_us);
}

TEST(SessionStore, ConcurrentWritersKeepFileValid) {
  ts::TempDir dir;
  SessionStore store(dir.path());
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&store, t] {
      for (int i = 0; i < 25; ++i) store.append("shared", kEventQueryIssued, t * 100 + i);
    });
  }
  for (auto& t : threads) t.join();
  const auto s = store.load("shared");
  ASSERT_EQ(s.events.size(), 100u);
  for (std::size_t i = 0; i < s.events.size(); ++i) EXPECT_EQ(s.events[i].seq, i);
}

TEST(SessionStore, ReopenContinuesSequence) {
  ts::TempDir dir;
  {
    SessionStore store(dir.path());
    store.append("r", kEventQueryIssued, 1);
  }
  SessionStore again(dir.path());
  const auto e = again.append("r", kEventIdealsSelected, 2);
  EXPECT_EQ(e.seq, 1u);
  EXPECT_EQ(again.load("r").events.size(), 2u);
}

TEST(SessionStore, MissingSessionIsNotFound) {
  ts::TempDir dir;
  SessionStore store(dir.path());
  ErrorKind kind{};
  EXPECT_NE(load_error(store, "ghost", &kind).find("unknown session"), std::string::npos);
  EXPECT_EQ(kind, ErrorKind::kNotFound);
  EXPECT_FALSE(store.exists("ghost"));
}

TEST(SessionStore, EmptyFileHasNoEvents) {
  ts::TempDir dir;
  SessionStore store(dir.path());
  ts::write_text(dir / "empty.jsonl", "");
  ErrorKind kind{};
  EXPECT_NE(load_error(store, "empty", &kind).find("no events"), std::string::npos);
  EXPECT_EQ(kind, ErrorKind::kFormat);
}

TEST(SessionStore, TruncatedFinalLineNamesTheLine) {
  ts::TempDir dir;
  SessionStore store(dir.path());
  store.append("t", kEventQueryIssued, 1);
  store.append("t", kEventQueryIssued, 2);
  auto text = ts::read_text(dir / "t.jsonl");
  text.resize(text.size() - 5);
  ts::write_text(dir / "t.jsonl", text);
  const auto msg = load_error(store, "t");
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("truncated"), std::string::npos) << msg;
  SessionStore fresh(dir.path());
  EXPECT_THROW(fresh.append("t", kEventQueryIssued, 3), Error);
}

TEST(SessionStore, CorruptLineNamesTheLine) {
  ts::TempDir dir;
  SessionStore store(dir.path());
  store.append("c", kEventQueryIssued, 1);
  ts::write_text(dir / "c.jsonl", ts::read_text(dir / "c.jsonl") + "{garbage\n");
  const auto msg = load_error(store, "c");
  EXPECT_NE(msg.find("corrupt line 2"), std::string::npos) << msg;

  ts::write_text(dir / "u.jsonl", R"({"type":"nope","ts_us":1,"seq":0,"payload":null})" "\n");
  EXPECT_NE(load_error(store, "u").find("corrupt line 1"), std::string::npos);
}

TEST(SessionStore, OutOfOrderTimestampsRejected) {
  ts::TempDir dir;
  SessionStore store(dir.path());
  ts::write_text(dir / "o.jsonl",
                 R"({"type":"query_issued","ts_us":10,"seq":0,"payload":null})" "\n"
                 R"({"type":"query_issued","ts_us":10,"seq":1,"payload":null})" "\n");
  EXPECT_NE(load_error(store, "o").find("line 2"), std::string::npos);
}

TEST(SessionStore, IdValidation) {
  EXPECT_TRUE(valid_session_id("abc_DEF-123"));
  EXPECT_FALSE(valid_session_id(""));
  EXPECT_FALSE(valid_session_id("../etc"));
  EXPECT_FALSE(valid_session_id(std::string(65, 'a')));
  EXPECT_TRUE(valid_session_id(new_session_id()));
  EXPECT_NE(new_session_id(), new_session_id());

  ts::TempDir dir;
  SessionStore store(dir.path());
  EXPECT_THROW(store.append("a/b", kEventQueryIssued, 1), Error);
  EXPECT_THROW(store.append("ok", "bogus", 1), Error);
}

TEST(SessionStore, AppendWhileHoldingSessionLock) {
  ts::TempDir dir;
  SessionStore store(dir.path());
  auto lock_ptr = store.session_mutex("held");
  std::lock_guard lock(*lock_ptr);
  EXPECT_EQ(store.append("held", kEventQueryIssued, 1).seq, 0u);
}
