#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>

#include "vspan/vmem.hpp"

namespace vspan {

// One reserved region carved into 2MB-aligned virtual spans by a bump cursor.
// Spans are never returned here; recycling belongs to the span pool.
class Arena {
 public:
  Arena(VirtualMemoryProvider& provider, std::size_t length);

  Arena(const Arena&) = delete;
  Arena& operator=(const Arena&) = delete;

  // Next untouched virtual span, or nullopt once every slot has been handed out.
  std::optional<std::uintptr_t> acquire_virtual_span() noexcept {
    const std::uint64_t index = cursor_.fetch_add(1, std::memory_order_relaxed);
    if (index >= capacity_) return std::nullopt;
    return region_.base + index * kVirtualSpanSize;
  }

  bool contains(std::uintptr_t address) const noexcept { return region_.contains(address); }
  bool contains(const void* address) const noexcept {
    return contains(reinterpret_cast<std::uintptr_t>(address));
  }

  // Start of the 2MB slot holding address. address must lie inside the arena.
  std::uintptr_t owning_span_base(std::uintptr_t address) const noexcept {
    return region_.base + ((address - region_.base) & ~(kVirtualSpanSize - 1));
  }

  const VmRegion& region() const noexcept { return region_; }
  std::size_t capacity_spans() const noexcept { return capacity_; }

  std::size_t spans_handed_out() const noexcept {
    const std::uint64_t cursor = cursor_.load(std::memory_order_relaxed);
    return cursor < capacity_ ? cursor : capacity_;
  }

 private:
  VmRegion region_;
  std::size_t capacity_;
  std::atomic<std::uint64_t> cursor_{0};
};

}  // namespace vspan
