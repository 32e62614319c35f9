#include "vspan/span_pool.hpp"

#include <stdexcept>

namespace vspan {

SpanPool::SpanPool(Arena& arena, VirtualMemoryProvider& provider, SpanPoolConfig config)
    : arena_(arena), provider_(provider), config_(config) {
  if (config_.width == 0) throw std::invalid_argument("span pool width must be at least 1");
  stacks_ = std::make_unique<TaggedStack[]>(kNumRealSpanSizes * config_.width);
}

void SpanPool::put(Span span, std::size_t thread_index) noexcept {
  const SizeClass& g = span.geometry();
  if (config_.decommit && g.real_span_size > config_.decommit_threshold) {
    // Everything but the header page.
    provider_.decommit(span.base() + kPageSize, g.real_span_size - kPageSize);
  }
  size_.fetch_add(1, std::memory_order_relaxed);
  stack(g.real_span_index, thread_index % config_.width).push(span.header());
}

SpanPool::GetResult SpanPool::get(ClassId id, std::size_t thread_index) noexcept {
  const std::size_t own_index = kSizeClasses[id].real_span_index;
  if (SpanHeader* h = stack(own_index, thread_index % config_.width).pop()) {
    size_.fetch_sub(1, std::memory_order_relaxed);
    return {Span(h), Source::local_stack};
  }
  for (std::size_t rs = 0; rs < kNumRealSpanSizes; ++rs) {
    for (std::size_t pool = 0; pool < config_.width; ++pool) {
      if (SpanHeader* h = stack(rs, pool).pop()) {
        size_.fetch_sub(1, std::memory_order_relaxed);
        return {Span(h), Source::scan};
      }
    }
  }
  if (auto base = arena_.acquire_virtual_span()) return {Span(*base), Source::arena};
  return {Span(), Source::arena};
}

bool SpanPool::contains_quiescent(Span span) const {
  bool found = false;
  for (std::size_t i = 0; i < kNumRealSpanSizes * config_.width; ++i) {
    stacks_[i].for_each_quiescent([&](SpanHeader* h) { found = found || h == span.header(); });
  }
  return found;
}

TaggedStack::Counters SpanPool::total_counters() const noexcept {
  TaggedStack::Counters total;
  for (std::size_t i = 0; i < kNumRealSpanSizes * config_.width; ++i) {
    const auto c = stacks_[i].counters();
    total.pushes += c.pushes;
    total.pops += c.pops;
    total.retries += c.retries;
  }
  return total;
}

void SpanPool::write_stack_csv(std::ostream& out) const {
  out << "real_span_index,pool_index,pushes,pops,retries\n";
  for (std::size_t rs = 0; rs < kNumRealSpanSizes; ++rs) {
    for (std::size_t pool = 0; pool < config_.width; ++pool) {
      const auto c = stack(rs, pool).counters();
      out << rs << ',' << pool << ',' << c.pushes << ',' << c.pops << ',' << c.retries << '\n';
    }
  }
}

}  // namespace vspan
