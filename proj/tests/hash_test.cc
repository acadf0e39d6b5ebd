#include "gecw/hash.h"

#include <gtest/gtest.h>

#include "gecw/error.h"
#include "test_util.h"

namespace gecw {
namespace {

// Reference vectors published with the FNV specification.
TEST(HashTest, Fnv1aKnownVectors) {
  EXPECT_EQ(Fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(Fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(Fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(HashTest, JoinedUsesNewlineWithoutTrailer) {
  EXPECT_EQ(HashJoined({"$KEEP", "$DELETE"}), Fnv1a("$KEEP\n$DELETE"));
  EXPECT_EQ(HashJoined({}), Fnv1a(""));
}

TEST(HashTest, IncrementalMatchesOneShot) {
  Fnv1a64 h;
  h.Update("foo");
  h.Update("bar");
  EXPECT_EQ(h.digest(), Fnv1a("foobar"));
}

TEST(HashTest, StringRoundTrip) {
  EXPECT_EQ(HashToString(0x1ULL), "0x0000000000000001");
  EXPECT_EQ(HashToString(0xaf63dc4c8601ec8cULL), "0xaf63dc4c8601ec8c");
  for (std::uint64_t v : {0ULL, 1ULL, 0xffffffffffffffffULL, 0x0123456789abcdefULL}) {
    EXPECT_EQ(HashFromString(HashToString(v)), v);
  }
  EXPECT_THROW(HashFromString("123"), Error);
  EXPECT_THROW(HashFromString("0xzz"), Error);
}

TEST(HashTest, FileHashEqualsContentHash) {
  testing::TempDir dir;
  testing::WriteFile(dir / "f", "foobar");
  EXPECT_EQ(HashFile(dir / "f"), Fnv1a("foobar"));
  EXPECT_THROW(HashFile(dir / "missing"), Error);
}

}  // namespace
}  // namespace gecw
