#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "teamspace/errors.hpp"
#include "teamspace/event_log.hpp"

namespace teamspace {
namespace {

using testing::at;

Event joined(std::uint64_t seq, std::string who) {
  Event e;
  e.seq = seq;
  e.wall_time = at(static_cast<double>(seq));
  e.session_id = std::move(who);
  e.kind = EventKind::participant_joined;
  return e;
}

TEST(EventJson, RoundTripAndKinds) {
  Event e;
  e.seq = 7;
  e.wall_time = at(1.25);
  e.team_id = "t001";
  e.session_id = "p0001";
  e.kind = EventKind::message_posted;
  e.payload = {{"message_id", 3}, {"pseudonym", "Ada"}, {"body", "hi, \"all\""}, {"phase", "discuss"}};
  const auto line = serialize_event(e);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  EXPECT_EQ(event_from_json(nlohmann::json::parse(line)), e);
  for (std::size_t k = 0; k < kEventKindCount; ++k) {
    const auto kind = static_cast<EventKind>(k);
    EXPECT_EQ(event_kind_from_string(to_string(kind)), kind);
  }
  EXPECT_FALSE(event_kind_from_string("teleported").has_value());
}

TEST(EventJson, MalformedInputsThrow) {
  auto j = to_json(joined(1, "p0001"));
  auto bad_kind = j;
  bad_kind["kind"] = "nope";
  EXPECT_THROW(event_from_json(bad_kind), std::invalid_argument);
  auto bad_time = j;
  bad_time["wall_time"] = "yesterday";
  EXPECT_THROW(event_from_json(bad_time), std::invalid_argument);
  auto missing = j;
  missing.erase("event_seq");
  EXPECT_THROW(event_from_json(missing), std::invalid_argument);
}

TEST(EventValidation, ScopesAndPayloads) {
  auto e = joined(1, "p0001");
  EXPECT_NO_THROW(validate_event(e));
  e.session_id.reset();
  EXPECT_THROW(validate_event(e), ValidationError);
  Event m;
  m.seq = 1;
  m.kind = EventKind::message_posted;
  m.team_id = "t001";
  m.session_id = "p0001";
  m.payload = {{"message_id", 1}};
  EXPECT_THROW(validate_event(m), ValidationError);
}

TEST(MemoryLog, RejectsOutOfOrder) {
  MemoryEventLog log;
  log.append(joined(1, "p0001"));
  EXPECT_THROW(log.append(joined(3, "p0002")), PersistenceError);
  EXPECT_THROW(log.append(joined(1, "p0002")), PersistenceError);
  log.append(joined(2, "p0002"));
  EXPECT_EQ(log.events().size(), 2u);
}

TEST(Sequence, GapsAreReported) {
  std::vector<Event> ok{joined(1, "a"), joined(2, "b")};
  EXPECT_NO_THROW(validate_sequence(ok));
  EXPECT_NO_THROW(validate_sequence(std::vector<Event>{}));
  std::vector<Event> gap{joined(1, "a"), joined(3, "b")};
  try {
    validate_sequence(gap);
    FAIL();
  } catch (const ReplayError& e) {
    EXPECT_EQ(e.offset(), 2u);
  }
}

TEST(JsonlLog, WritesReadsAndResumes) {
  testing::TempDir dir;
  const auto path = dir / "events.jsonl";
  {
    JsonlEventLog log(path);
    log.append(joined(1, "p0001"));
    log.append(joined(2, "p0002"));
    EXPECT_THROW(log.append(joined(4, "p0003")), PersistenceError);
  }
  {
    JsonlEventLog log(path, FsyncPolicy::batched, 2);
    EXPECT_EQ(log.last_seq(), 2u);
    log.append(joined(3, "p0003"));
  }
  const auto events = read_event_log(path);
  ASSERT_EQ(events.size(), 3u);
  EXPECT_EQ(events[2], joined(3, "p0003"));
}

TEST(JsonlLog, InvalidEventWritesNothing) {
  testing::TempDir dir;
  JsonlEventLog log(dir / "e.jsonl", FsyncPolicy::none);
  auto e = joined(1, "p");
  e.session_id.reset();
  EXPECT_THROW(log.append(e), ValidationError);
  EXPECT_EQ(std::filesystem::file_size(dir / "e.jsonl"), 0u);
}

TEST(JsonlLog, UnwritableLocationIsPersistenceError) {
  EXPECT_THROW(JsonlEventLog("/proc/teamspace-cannot-exist/e.jsonl"), PersistenceError);
}

TEST(Reader, TornFinalLineIsDropped) {
  const auto a = serialize_event(joined(1, "p0001"));
  const auto b = serialize_event(joined(2, "p0002"));
  std::istringstream torn(a + "\n" + b.substr(0, b.size() / 2));
  EXPECT_EQ(read_event_log(torn).size(), 1u);
  std::istringstream unterminated(a + "\n" + b);
  EXPECT_EQ(read_event_log(unterminated).size(), 2u);
  std::istringstream empty("");
  EXPECT_TRUE(read_event_log(empty).empty());
}

TEST(Reader, MidFileCorruptionNamesTheLine) {
  const auto a = serialize_event(joined(1, "p0001"));
  std::istringstream in(a + "\n{oops\n" + a + "\n");
  try {
    read_event_log(in);
    FAIL();
  } catch (const ReplayError& e) {
    EXPECT_EQ(e.offset(), 2u);
  }
  std::istringstream blank(a + "\n\n" + a + "\n");
  EXPECT_THROW(read_event_log(blank), ReplayError);
  std::istringstream bad_kind(a + "\n{\"event_seq\":2,\"kind\":\"x\"}\n");
  EXPECT_THROW(read_event_log(bad_kind), ReplayError);
}

TEST(JsonlLog, TenThousandEvents) {
  testing::TempDir dir;
  std::vector<Event> events;
  for (std::uint64_t i = 1; i <= 10'000; ++i) events.push_back(joined(i, "p" + std::to_string(i)));
  write_event_log(dir / "big.jsonl", events);
  const auto back = read_event_log(dir / "big.jsonl");
  EXPECT_EQ(back, events);
  JsonlEventLog log(dir / "big.jsonl", FsyncPolicy::none);
  EXPECT_EQ(log.last_seq(), 10'000u);
}

}  // namespace
}  // namespace teamspace
