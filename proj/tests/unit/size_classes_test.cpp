#include "vspan/size_classes.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>
#include <string>

#include "support/oracles.hpp"
#include "vspan/span.hpp"

namespace vspan {
namespace {

// Linear scan for the smallest class that fits.
std::optional<ClassId> scan_for_size(std::size_t size) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (kSizeClasses[i].block_size >= size) return static_cast<ClassId>(i);
  }
  return std::nullopt;
}

TEST(SizeClasses, TwoHundredFiftySixByteClassHolds127Blocks) {
  const auto id = class_for_size(256);
  ASSERT_TRUE(id.has_value());
  EXPECT_EQ(kSizeClasses[*id].block_size, 256u);
  EXPECT_EQ(kSizeClasses[*id].real_span_size, 32u * 1024);
  EXPECT_EQ(kSizeClasses[*id].blocks_per_span, 127u);
}

TEST(SizeClasses, SixtyFourByteClassHolds508Blocks) {
  EXPECT_EQ(kSizeClasses[*class_for_size(64)].blocks_per_span, 508u);
}

TEST(SizeClasses, EveryClassMatchesBruteForcePacker) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    const SizeClass& g = kSizeClasses[i];
    SCOPED_TRACE(i);
    EXPECT_EQ(g.blocks_per_span, testing::brute_force_blocks(g.real_span_size, g.header_size, g.block_size));
    EXPECT_GE(g.blocks_per_span, 1u);
    EXPECT_LE(g.header_size + std::uint64_t{g.blocks_per_span} * g.block_size, g.real_span_size);
    EXPECT_EQ(g.real_span_size % kPageSize, 0u);
    EXPECT_LE(g.real_span_size, kVirtualSpanSize);
  }
}

TEST(SizeClasses, BlockSizesFollowTheStatedRanges) {
  ASSERT_EQ(kNumClasses, 28u);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(kSizeClasses[i].block_size, 16 * (i + 1));
  for (std::size_t i = 16; i < kNumClasses; ++i) EXPECT_EQ(kSizeClasses[i].block_size, 512u << (i - 16));
  EXPECT_EQ(kSizeClasses.back().block_size, 1u << 20);
}

TEST(SizeClasses, TableIsMonotone) {
  for (std::size_t i = 1; i < kNumClasses; ++i) {
    EXPECT_GT(kSizeClasses[i].block_size, kSizeClasses[i - 1].block_size);
    EXPECT_GE(kSizeClasses[i].real_span_size, kSizeClasses[i - 1].real_span_size);
  }
}

TEST(SizeClasses, SmallClassesStayAtOrBelowDecommitThresholdLargeOnesAbove) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (kSizeClasses[i].block_size <= kMaxSmallSize) {
      EXPECT_EQ(kSizeClasses[i].real_span_size, 32u << 10);
      EXPECT_EQ(kSizeClasses[i].header_size, kSmallHeaderSize);
    } else {
      EXPECT_GT(kSizeClasses[i].real_span_size, 32u << 10);
      EXPECT_EQ(kSizeClasses[i].header_size, kPageSize);
    }
  }
}

TEST(SizeClasses, LookupAgreesWithLinearScanAndBoundsWaste) {
  auto check = [](std::size_t size) {
    const auto id = class_for_size(size);
    const auto expected = scan_for_size(std::max<std::size_t>(size, 1));
    ASSERT_EQ(id, expected) << size;
    const std::uint32_t block = kSizeClasses[*id].block_size;
    if (size == 0) return;
    if (size <= kMaxSmallSize) {
      EXPECT_LT(block - size, 16u) << size;
    } else {
      EXPECT_LT(block, 2 * size) << size;
    }
  };
  for (std::size_t s = 0; s <= 8192; ++s) check(s);
  for (std::size_t s = 8192; s <= kMaxClassSize; s += 977) check(s);
  for (int b = 10; b <= 20; ++b) {
    check((std::size_t{1} << b) - 1);
    check(std::size_t{1} << b);
    check((std::size_t{1} << b) + 1 <= kMaxClassSize ? (std::size_t{1} << b) + 1 : kMaxClassSize);
  }
  EXPECT_FALSE(class_for_size(kMaxClassSize + 1).has_value());
  EXPECT_FALSE(class_for_size(std::size_t{1} << 40).has_value());
}

TEST(SizeClasses, HundredBytesRoundsToHundredTwelve) {
  EXPECT_EQ(kSizeClasses[*class_for_size(100)].block_size, 112u);
  EXPECT_EQ(*class_for_size(0), 0);
}

TEST(SizeClasses, RealSpanIndexIsDense) {
  std::set<std::uint32_t> sizes;
  for (const auto& g : kSizeClasses) sizes.insert(g.real_span_size);
  ASSERT_EQ(sizes.size(), kNumRealSpanSizes);
  std::size_t expected = 0;
  for (std::uint32_t size : sizes) {
    EXPECT_EQ(real_span_index_for_size(size), expected);
    EXPECT_EQ(kRealSpanSizes[expected], size);
    ++expected;
  }
  for (const auto& g : kSizeClasses) EXPECT_EQ(g.real_span_index, real_span_index_for_size(g.real_span_size));
  EXPECT_EQ(real_span_index_for_size(32u << 10), 0u);
}

TEST(SizeClasses, HeaderFitsInSmallestHeaderArea) {
  EXPECT_LE(sizeof(SpanHeader), kSmallHeaderSize);
}

TEST(SizeClasses, CsvHasOneRowPerClass) {
  std::ostringstream out;
  write_size_class_csv(out);
  std::istringstream in(out.str());
  std::string line;
  std::size_t rows = 0;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("class,", 0), 0u);
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, kNumClasses);
}

using SizeClassesDeathTest = ::testing::Test;

TEST(SizeClassesDeathTest, UnknownRealSpanSizeAborts) {
  EXPECT_DEATH(real_span_index_for_size(12345), "");
}

}  // namespace
}  // namespace vspan
