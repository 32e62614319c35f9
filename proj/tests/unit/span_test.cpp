#include "vspan/span.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <thread>
#include <vector>

#include "support/oracles.hpp"
#include "vspan/arena.hpp"

namespace vspan {
namespace {

class SpanTest : public ::testing::Test {
 protected:
  Span fresh(ClassId id) {
    Span span(*arena_.acquire_virtual_span());
    span.init_for_class(id, Owner::make(1, 0));
    return span;
  }

  SimProvider sim_;
  Arena arena_{sim_, 64 * kVirtualSpanSize};
};

TEST(SpanState, LegalEdgesAreExactlyTheLifeCycle) {
  const SpanState all[] = {SpanState::expected, SpanState::free, SpanState::hot, SpanState::floating,
                           SpanState::reusable};
  std::set<std::pair<SpanState, SpanState>> legal = {
      {SpanState::free, SpanState::hot},          {SpanState::hot, SpanState::floating},
      {SpanState::floating, SpanState::reusable}, {SpanState::floating, SpanState::free},
      {SpanState::reusable, SpanState::hot},      {SpanState::reusable, SpanState::free},
      {SpanState::reusable, SpanState::floating},
  };
  for (SpanState from : all) {
    for (SpanState to : all) {
      EXPECT_EQ(is_legal_transition(from, to), legal.count({from, to}) == 1)
          << to_string(from) << "->" << to_string(to);
    }
  }
}

TEST(SpanState, EpochPacksOneHotStateAndCounter) {
  const Epoch e = Epoch::make(SpanState::floating, 41);
  EXPECT_EQ(e.state(), SpanState::floating);
  EXPECT_EQ(e.counter(), 41u);
  const Epoch next = e.successor(SpanState::reusable);
  EXPECT_EQ(next.state(), SpanState::reusable);
  EXPECT_EQ(next.counter(), 42u);
  EXPECT_EQ(Epoch{}.state(), SpanState::expected);
  for (SpanState s : {SpanState::free, SpanState::hot, SpanState::floating, SpanState::reusable}) {
    EXPECT_EQ(__builtin_popcountll(static_cast<std::uint64_t>(s)), 1);
  }
}

TEST(SpanState, OwnerPacksGenerationAndLabIndex) {
  const Owner o = Owner::make(513, 77);
  EXPECT_EQ(o.generation(), 513);
  EXPECT_EQ(o.lab_ref(), 77u);
  EXPECT_FALSE(o.is_terminated());
  EXPECT_TRUE(Owner::terminated().is_terminated());
  EXPECT_NE(Owner::make(1, 77), Owner::make(2, 77));
}

TEST_F(SpanTest, FreshSpanStartsFreeWithCounterZero) {
  Span span(*arena_.acquire_virtual_span());
  EXPECT_EQ(span.epoch().state(), SpanState::expected);
  span.init_for_class(3, Owner::make(1, 0));
  EXPECT_EQ(span.epoch(), Epoch::make(SpanState::free, 0));
  EXPECT_EQ(span.free_blocks(), kSizeClasses[3].blocks_per_span);
}

TEST_F(SpanTest, ReinitKeepsEpochCounter) {
  Span span = fresh(0);
  Epoch e = span.epoch();
  e = *span.try_transition(e, SpanState::hot);
  e = *span.try_transition(e, SpanState::floating);
  e = *span.try_transition(e, SpanState::free);
  span.init_for_class(20, Owner::make(2, 1));
  EXPECT_EQ(span.epoch(), Epoch::make(SpanState::free, 3));
  EXPECT_EQ(span.size_class(), 20);
}

TEST_F(SpanTest, StaleEpochLosesTheRace) {
  Span span = fresh(0);
  const Epoch observed = span.epoch();
  ASSERT_TRUE(span.try_transition(observed, SpanState::hot));
  EXPECT_FALSE(span.try_transition(observed, SpanState::hot));
}

TEST_F(SpanTest, BlocksAreHandedOutInAddressOrderThenRecycled) {
  Span span = fresh(*class_for_size(64));
  const SizeClass& g = span.geometry();
  std::vector<void*> blocks;
  while (void* b = span.alloc_block()) blocks.push_back(b);
  ASSERT_EQ(blocks.size(), 508u);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    EXPECT_EQ(reinterpret_cast<std::uintptr_t>(blocks[i]), span.base() + g.header_size + i * g.block_size);
  }
  EXPECT_EQ(span.free_blocks(), 0u);
  span.free_local(blocks[10]);
  span.free_local(blocks[3]);
  EXPECT_EQ(span.alloc_block(), blocks[3]);
  EXPECT_EQ(span.alloc_block(), blocks[10]);
  EXPECT_EQ(span.alloc_block(), nullptr);
}

// Random alloc / local free / remote free / drain against a live-set model.
TEST_F(SpanTest, BlockConservationUnderRandomOperations) {
  for (ClassId id : {ClassId{0}, ClassId{15}, ClassId{16}, ClassId{20}}) {
    Span span = fresh(id);
    const SizeClass& g = span.geometry();
    std::mt19937_64 rng(id);
    std::vector<void*> live;
    for (int step = 0; step < 5000; ++step) {
      const int op = static_cast<int>(rng() % 4);
      if (op <= 1) {
        if (void* b = span.alloc_block()) {
          ASSERT_TRUE(span.owns_block(reinterpret_cast<std::uintptr_t>(b)));
          live.push_back(b);
        }
      } else if (op == 2 && !live.empty()) {
        const std::size_t i = rng() % live.size();
        if (rng() % 2) {
          span.free_local(live[i]);
        } else {
          span.free_remote(live[i]);
        }
        live[i] = live.back();
        live.pop_back();
      } else {
        span.drain_remotes(static_cast<std::uint32_t>(rng() % 8));
      }
      const testing::SpanCensus c = testing::census(span);
      ASSERT_TRUE(c.well_formed);
      ASSERT_EQ(c.total_free() + live.size(), g.blocks_per_span);
      ASSERT_EQ(c.local, span.local_count());
      ASSERT_EQ(c.remote, span.remote_count());
      ASSERT_EQ(span.free_blocks(), c.total_free());
      for (void* b : live) ASSERT_EQ(c.free_blocks.count(reinterpret_cast<std::uintptr_t>(b)), 0u);
    }
  }
}

TEST_F(SpanTest, DrainOnlyAboveThreshold) {
  Span span = fresh(0);
  std::vector<void*> blocks;
  for (int i = 0; i < 10; ++i) blocks.push_back(span.alloc_block());
  for (int i = 0; i < 5; ++i) span.free_remote(blocks[i]);
  EXPECT_EQ(span.drain_remotes(5), 0u);
  EXPECT_EQ(span.remote_count(), 5u);
  span.free_remote(blocks[5]);
  EXPECT_EQ(span.drain_remotes(5), 6u);
  EXPECT_EQ(span.remote_count(), 0u);
  EXPECT_EQ(span.local_count(), 6u);
  EXPECT_EQ(span.remote_head(), nullptr);
}

TEST_F(SpanTest, DrainAppendsToExistingLocalList) {
  Span span = fresh(0);
  std::vector<void*> blocks;
  for (int i = 0; i < 4; ++i) blocks.push_back(span.alloc_block());
  span.free_local(blocks[0]);
  span.free_remote(blocks[1]);
  span.free_remote(blocks[2]);
  EXPECT_EQ(span.drain_remotes(0), 2u);
  const testing::SpanCensus c = testing::census(span);
  EXPECT_TRUE(c.well_formed);
  EXPECT_EQ(c.local, 3u);
}

TEST_F(SpanTest, RemoteWordHoldsSpanRelativeOffset) {
  Span span = fresh(0);
  void* b = span.alloc_block();
  span.free_remote(b);
  const RemoteWord w = span.remote();
  EXPECT_EQ(w.count(), 1u);
  EXPECT_EQ(w.head_offset(), reinterpret_cast<std::uintptr_t>(b) - span.base());
  EXPECT_EQ(span.remote_head(), b);
}

TEST_F(SpanTest, ConcurrentRemoteFreesAreAllRecorded) {
  Span span = fresh(0);
  const std::uint32_t n = span.geometry().blocks_per_span;
  std::vector<void*> blocks;
  for (std::uint32_t i = 0; i < n; ++i) blocks.push_back(span.alloc_block());
  constexpr std::size_t kThreads = 8;
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < kThreads; ++t) {
    threads.emplace_back([&, t] {
      for (std::size_t i = t; i < blocks.size(); i += kThreads) span.free_remote(blocks[i]);
    });
  }
  for (auto& t : threads) t.join();
  const testing::SpanCensus c = testing::census(span);
  EXPECT_TRUE(c.well_formed);
  EXPECT_EQ(c.remote, n);
  EXPECT_EQ(span.remote_count(), n);
  EXPECT_EQ(span.free_blocks(), n);
}

TEST_F(SpanTest, AdoptionNeedsTheObservedOwner) {
  Span span = fresh(0);
  const Owner old = span.owner();
  EXPECT_FALSE(span.try_adopt(Owner::make(9, 9), Owner::make(2, 3)));
  EXPECT_TRUE(span.try_adopt(old, Owner::make(2, 3)));
  EXPECT_EQ(span.owner(), Owner::make(2, 3));
}

using SpanDeathTest = SpanTest;

TEST_F(SpanDeathTest, IllegalTransitionAborts) {
#ifdef VSPAN_CHECKS
  Span span = fresh(0);
  EXPECT_DEATH(span.try_transition(span.epoch(), SpanState::floating), "illegal span transition");
#else
  GTEST_SKIP() << "edge checks compiled out";
#endif
}

}  // namespace
}  // namespace vspan
