#pragma once

// Independent reference models used by the unit and acceptance tests. None of
// these reuse the allocator's own counters.

#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "vspan/arena.hpp"
#include "vspan/size_classes.hpp"
#include "vspan/span.hpp"

namespace vspan::testing {

// Packs blocks one at a time after the header until the next one would cross
// the real span's end.
inline std::uint32_t brute_force_blocks(std::uint32_t real_span, std::uint32_t header, std::uint32_t block) {
  std::uint32_t n = 0;
  std::uint64_t end = header;
  while (end + block <= real_span) {
    end += block;
    ++n;
  }
  return n;
}

// Result of walking one span's free lists block by block.
struct SpanCensus {
  std::uint32_t local = 0;
  std::uint32_t remote = 0;
  std::uint32_t unused = 0;
  bool well_formed = true;  // every listed block valid, in-span and listed once
  std::set<std::uintptr_t> free_blocks;

  std::uint32_t total_free() const { return local + remote + unused; }
};

// Quiescent only.
inline SpanCensus census(Span span) {
  SpanCensus c;
  const SizeClass& g = span.geometry();
  const std::uint32_t bump = span.bump_index();
  if (bump > g.blocks_per_span) {
    c.well_formed = false;
    return c;
  }
  c.unused = g.blocks_per_span - bump;
  for (std::uint32_t i = bump; i < g.blocks_per_span; ++i) {
    c.free_blocks.insert(span.payload_start() + std::uintptr_t{i} * g.block_size);
  }
  auto walk = [&](void* head, std::uint32_t& count) {
    for (void* p = head; p != nullptr; p = *static_cast<void**>(p)) {
      const auto address = reinterpret_cast<std::uintptr_t>(p);
      const bool handed_out = (address - span.payload_start()) / g.block_size < bump;
      if (!span.owns_block(address) || !handed_out || !c.free_blocks.insert(address).second) {
        c.well_formed = false;
        return;
      }
      if (++count > g.blocks_per_span) {
        c.well_formed = false;
        return;
      }
    }
  };
  walk(span.local_head(), c.local);
  walk(span.remote_head(), c.remote);
  return c;
}

// Every span the arena has handed out so far, in address order.
inline std::vector<Span> handed_out_spans(const Arena& arena) {
  std::vector<Span> spans;
  for (std::size_t i = 0; i < arena.spans_handed_out(); ++i) {
    spans.emplace_back(arena.region().base + i * kVirtualSpanSize);
  }
  return spans;
}

// Live blocks as half-open intervals; rejects overlapping inserts.
class IntervalChecker {
 public:
  // Returns false if [begin, begin + length) overlaps a live interval.
  bool insert(std::uintptr_t begin, std::size_t length) {
    std::lock_guard lock(mutex_);
    auto next = live_.lower_bound(begin);
    if (next != live_.end() && next->first < begin + length) return false;
    if (next != live_.begin()) {
      auto prev = std::prev(next);
      if (prev->first + prev->second > begin) return false;
    }
    live_.emplace(begin, length);
    return true;
  }

  bool erase(std::uintptr_t begin) {
    std::lock_guard lock(mutex_);
    return live_.erase(begin) == 1;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return live_.size();
  }

  // Live blocks per 2MB slot.
  std::map<std::uintptr_t, std::uint32_t> per_span() const {
    std::lock_guard lock(mutex_);
    std::map<std::uintptr_t, std::uint32_t> counts;
    for (const auto& [begin, length] : live_) ++counts[begin & ~(kVirtualSpanSize - 1)];
    return counts;
  }

 private:
  mutable std::mutex mutex_;
  std::map<std::uintptr_t, std::size_t> live_;
};

// Set of committed pages, driven by the same touch/decommit calls the sim
// provider sees.
class ShadowPages {
 public:
  void touch(std::uintptr_t base, std::size_t length) {
    for (std::uintptr_t p = base & ~(kPageSize - 1); p < base + length; p += kPageSize) pages_.insert(p);
  }
  void decommit(std::uintptr_t base, std::size_t length) {
    for (std::uintptr_t p = base; p < base + length; p += kPageSize) pages_.erase(p);
  }
  std::size_t bytes() const { return pages_.size() * kPageSize; }
  std::size_t bytes_in(std::uintptr_t base, std::size_t length) const {
    std::size_t n = 0;
    for (auto it = pages_.lower_bound(base); it != pages_.end() && *it < base + length; ++it) ++n;
    return n * kPageSize;
  }

 private:
  std::set<std::uintptr_t> pages_;
};

}  // namespace vspan::testing
