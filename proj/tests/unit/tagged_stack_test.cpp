#include "vspan/tagged_stack.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace vspan {
namespace {

std::vector<SpanHeader> make_headers(std::size_t n) { return std::vector<SpanHeader>(n); }

TEST(TaggedStack, PopsInLifoOrder) {
  auto headers = make_headers(5);
  TaggedStack stack;
  EXPECT_TRUE(stack.empty());
  EXPECT_EQ(stack.pop(), nullptr);
  for (auto& h : headers) stack.push(&h);
  for (std::size_t i = headers.size(); i-- > 0;) EXPECT_EQ(stack.pop(), &headers[i]);
  EXPECT_TRUE(stack.empty());
  const auto c = stack.counters();
  EXPECT_EQ(c.pushes, 5u);
  EXPECT_EQ(c.pops, 5u);
}

TEST(TaggedStack, TagChangesOnEveryReplacement) {
  auto headers = make_headers(1);
  TaggedStack stack;
  const std::uint16_t t0 = stack.tag();
  stack.push(&headers[0]);
  EXPECT_NE(stack.tag(), t0);
  const std::uint16_t t1 = stack.tag();
  stack.pop();
  EXPECT_NE(stack.tag(), t1);
}

// A pop that read (A, next = B) is overtaken by pop A, pop B, push A. The top
// holds A again but with a new tag, so the stale commit must fail; letting it
// succeed would install B, which is no longer on the stack.
TEST(TaggedStack, AbaInterleavingIsRejected) {
  auto headers = make_headers(3);
  SpanHeader* a = &headers[0];
  SpanHeader* b = &headers[1];
  SpanHeader* c = &headers[2];
  TaggedStack stack;
  for (int iteration = 0; iteration < 10000; ++iteration) {
    stack.push(c);
    stack.push(b);
    stack.push(a);
    const TaggedStack::PopAttempt stale = stack.begin_pop();
    ASSERT_EQ(stale.element(), a);
    ASSERT_EQ(stack.pop(), a);
    ASSERT_EQ(stack.pop(), b);
    stack.push(a);
    ASSERT_FALSE(stack.commit_pop(stale)) << iteration;
    ASSERT_EQ(stack.pop(), a);
    ASSERT_EQ(stack.pop(), c);
    ASSERT_EQ(stack.pop(), nullptr);
  }
}

TEST(TaggedStack, ConcurrentPushPopLosesNothing) {
  constexpr std::size_t kThreads = 8;
  constexpr std::size_t kPerThread = 64;
  auto headers = make_headers(kThreads * kPerThread);
  TaggedStack stack;
  for (auto& h : headers) stack.push(&h);
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < kThreads; ++t) {
    threads.emplace_back([&] {
      std::vector<SpanHeader*> held;
      for (int round = 0; round < 2000; ++round) {
        for (int i = 0; i < 3; ++i) {
          if (SpanHeader* h = stack.pop()) held.push_back(h);
        }
        while (!held.empty()) {
          stack.push(held.back());
          held.pop_back();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  std::vector<SpanHeader*> seen;
  stack.for_each_quiescent([&](SpanHeader* h) { seen.push_back(h); });
  ASSERT_EQ(seen.size(), headers.size());
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(std::adjacent_find(seen.begin(), seen.end()), seen.end());
  EXPECT_EQ(seen.front(), &headers.front());
  EXPECT_EQ(seen.back(), &headers.back());
}

}  // namespace
}  // namespace vspan
