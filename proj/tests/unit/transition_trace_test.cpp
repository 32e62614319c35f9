#include "vspan/transition_trace.hpp"

#include <gtest/gtest.h>

namespace vspan {
namespace {

using R = TransitionTrace::Record;

TEST(TransitionTrace, AcceptsAFullLifeCycle) {
  const std::vector<R> trace = {
      {0x200000, SpanState::free, SpanState::hot, 1},
      {0x400000, SpanState::free, SpanState::hot, 1},
      {0x200000, SpanState::hot, SpanState::floating, 2},
      {0x200000, SpanState::floating, SpanState::reusable, 3},
      {0x200000, SpanState::reusable, SpanState::hot, 4},
      {0x200000, SpanState::hot, SpanState::floating, 5},
      {0x200000, SpanState::floating, SpanState::free, 6},
      {0x200000, SpanState::free, SpanState::hot, 7},
  };
  EXPECT_TRUE(validate_trace(trace).empty());
}

TEST(TransitionTrace, OrderOfRecordingDoesNotMatter) {
  const std::vector<R> trace = {
      {0x200000, SpanState::hot, SpanState::floating, 2},
      {0x200000, SpanState::free, SpanState::hot, 1},
  };
  EXPECT_TRUE(validate_trace(trace).empty());
}

TEST(TransitionTrace, FlagsIllegalEdges) {
  const std::vector<R> trace = {
      {0x200000, SpanState::free, SpanState::hot, 1},
      {0x200000, SpanState::hot, SpanState::free, 2},
  };
  const auto problems = validate_trace(trace);
  ASSERT_EQ(problems.size(), 1u);
  EXPECT_NE(problems[0].find("illegal edge hot->free"), std::string::npos);
}

TEST(TransitionTrace, FlagsGapsAndMismatchedStates) {
  EXPECT_EQ(validate_trace({{0x200000, SpanState::free, SpanState::hot, 1},
                            {0x200000, SpanState::floating, SpanState::free, 3}})
                .size(),
            1u);
  EXPECT_EQ(validate_trace({{0x200000, SpanState::free, SpanState::hot, 1},
                            {0x200000, SpanState::reusable, SpanState::hot, 2}})
                .size(),
            1u);
  EXPECT_EQ(validate_trace({{0x200000, SpanState::hot, SpanState::floating, 5}}).size(), 1u);
}

TEST(TransitionTrace, RecordsAreKept) {
  TransitionTrace trace;
  trace.record(0x200000, SpanState::free, SpanState::hot, 1);
  EXPECT_EQ(trace.size(), 1u);
  EXPECT_EQ(trace.snapshot()[0].to, SpanState::hot);
}

}  // namespace
}  // namespace vspan
