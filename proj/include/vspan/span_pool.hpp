#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <ostream>
#include <vector>

#include "vspan/arena.hpp"
#include "vspan/span.hpp"
#include "vspan/tagged_stack.hpp"
#include "vspan/vmem.hpp"

namespace vspan {

inline constexpr std::size_t kDefaultDecommitThreshold = 32u << 10;

struct SpanPoolConfig {
  std::size_t width = 1;
  std::size_t decommit_threshold = kDefaultDecommitThreshold;
  bool decommit = true;
};

// Global backend: one tagged stack per (real-span size, pool index). Spans of
// large real-span sizes are decommitted down to their header page on put.
class SpanPool {
 public:
  enum class Source { local_stack, scan, arena };

  struct GetResult {
    Span span;
    Source source = Source::arena;
  };

  SpanPool(Arena& arena, VirtualMemoryProvider& provider, SpanPoolConfig config);

  SpanPool(const SpanPool&) = delete;
  SpanPool& operator=(const SpanPool&) = delete;

  // span must be in state free and referenced by no other thread.
  void put(Span span, std::size_t thread_index) noexcept;

  // Own stack first, then every stack in (real-span index, pool index) order,
  // then the arena. span is empty when the arena is exhausted.
  GetResult get(ClassId id, std::size_t thread_index) noexcept;

  std::size_t width() const noexcept { return config_.width; }
  const SpanPoolConfig& config() const noexcept { return config_; }

  // Spans currently pooled. Exact only at quiescence.
  std::size_t size() const noexcept { return size_.load(std::memory_order_acquire); }

  TaggedStack& stack(std::size_t real_span_index, std::size_t pool_index) noexcept {
    return stacks_[real_span_index * config_.width + pool_index];
  }
  const TaggedStack& stack(std::size_t real_span_index, std::size_t pool_index) const noexcept {
    return stacks_[real_span_index * config_.width + pool_index];
  }

  // Quiescent-only membership walk.
  bool contains_quiescent(Span span) const;

  TaggedStack::Counters total_counters() const noexcept;

  // real_span_index,pool_index,pushes,pops,retries
  void write_stack_csv(std::ostream& out) const;

 private:
  Arena& arena_;
  VirtualMemoryProvider& provider_;
  SpanPoolConfig config_;
  std::unique_ptr<TaggedStack[]> stacks_;
  std::atomic<std::size_t> size_{0};
};

}  // namespace vspan
