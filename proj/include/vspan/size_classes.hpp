#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>

namespace vspan {

using ClassId = std::uint8_t;

struct SizeClass {
  std::uint32_t block_size;
  std::uint32_t real_span_size;
  std::uint32_t header_size;
  std::uint32_t blocks_per_span;
  std::uint32_t real_span_index;
};

inline constexpr std::size_t kNumSmallClasses = 16;
inline constexpr std::size_t kNumClasses = 28;
inline constexpr std::size_t kNumRealSpanSizes = 6;
inline constexpr std::size_t kMaxSmallSize = 256;
inline constexpr std::size_t kMaxClassSize = std::size_t{1} << 20;
inline constexpr std::uint32_t kSmallHeaderSize = 256;
inline constexpr std::uint32_t kLargeHeaderSize = 4096;

// Distinct real-span sizes, ascending; position is the real-span index.
inline constexpr std::array<std::uint32_t, kNumRealSpanSizes> kRealSpanSizes = {
    32u << 10, 68u << 10, 132u << 10, 260u << 10, 516u << 10, 1028u << 10};

namespace detail {

constexpr std::uint32_t index_of_real_span_size(std::uint32_t size) {
  for (std::uint32_t i = 0; i < kRealSpanSizes.size(); ++i) {
    if (kRealSpanSizes[i] == size) return i;
  }
  return ~0u;
}

constexpr SizeClass make_class(std::uint32_t block, std::uint32_t real_span, std::uint32_t header) {
  return SizeClass{block, real_span, header, (real_span - header) / block,
                   index_of_real_span_size(real_span)};
}

constexpr std::array<SizeClass, kNumClasses> make_table() {
  std::array<SizeClass, kNumClasses> table{};
  for (std::uint32_t i = 0; i < kNumSmallClasses; ++i) {
    table[i] = make_class(16 * (i + 1), kRealSpanSizes[0], kSmallHeaderSize);
  }
  // Pairs of consecutive power-of-two classes share a real-span size; the
  // three largest share the biggest one.
  constexpr std::array<std::uint32_t, 12> large_spans = {
      68u << 10, 68u << 10, 132u << 10, 132u << 10, 260u << 10, 260u << 10,
      516u << 10, 516u << 10, 1028u << 10, 1028u << 10, 1028u << 10, 1028u << 10};
  for (std::uint32_t i = 0; i < large_spans.size(); ++i) {
    table[kNumSmallClasses + i] = make_class(512u << i, large_spans[i], kLargeHeaderSize);
  }
  return table;
}

}  // namespace detail

inline constexpr std::array<SizeClass, kNumClasses> kSizeClasses = detail::make_table();

// Smallest class with block_size >= request, or nullopt for requests that go
// straight to page mappings. Zero-byte requests use class 0.
constexpr std::optional<ClassId> class_for_size(std::size_t request) noexcept {
  if (request <= kMaxSmallSize) {
    return request == 0 ? ClassId{0} : static_cast<ClassId>((request + 15) / 16 - 1);
  }
  if (request > kMaxClassSize) return std::nullopt;
  const auto log2 = static_cast<std::size_t>(std::bit_width(request - 1));
  return static_cast<ClassId>(kNumSmallClasses + (log2 - 9));
}

constexpr const SizeClass& geometry(ClassId id) noexcept { return kSizeClasses[id]; }

// Dense index of a distinct real-span size. Aborts on sizes outside the table.
std::size_t real_span_index_for_size(std::size_t real_span_size);

// One row per class: class,block_size,real_span_size,header_size,blocks_per_span,real_span_index
void write_size_class_csv(std::ostream& out);

static_assert(kSizeClasses[kNumClasses - 1].block_size == kMaxClassSize);

}  // namespace vspan
