#pragma once

#include <atomic>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <optional>

#include "vspan/size_classes.hpp"
#include "vspan/vmem.hpp"

namespace vspan {

// Life-cycle states, one-hot in the top four bits of the epoch word. A span
// still untouched in the arena ("expected") has an all-zero epoch.
enum class SpanState : std::uint64_t {
  expected = 0,
  free = std::uint64_t{1} << 60,
  hot = std::uint64_t{1} << 61,
  floating = std::uint64_t{1} << 62,
  reusable = std::uint64_t{1} << 63,
};

const char* to_string(SpanState state) noexcept;

// State bits plus a 60-bit counter bumped by every successful transition.
struct Epoch {
  static constexpr std::uint64_t kStateMask = std::uint64_t{0xF} << 60;
  static constexpr std::uint64_t kCounterMask = ~kStateMask;

  std::uint64_t word = 0;

  SpanState state() const noexcept { return static_cast<SpanState>(word & kStateMask); }
  std::uint64_t counter() const noexcept { return word & kCounterMask; }

  static constexpr Epoch make(SpanState state, std::uint64_t counter) noexcept {
    return Epoch{static_cast<std::uint64_t>(state) | (counter & kCounterMask)};
  }
  Epoch successor(SpanState target) const noexcept { return make(target, counter() + 1); }

  friend bool operator==(Epoch, Epoch) = default;
};

// 16-bit generation over a 48-bit LAB table index, in one word.
struct Owner {
  static constexpr std::uint64_t kRefMask = (std::uint64_t{1} << 48) - 1;
  static constexpr std::uint64_t kTerminatedWord = ~std::uint64_t{0};

  std::uint64_t word = kTerminatedWord;

  static constexpr Owner make(std::uint16_t generation, std::uint64_t lab_ref) noexcept {
    return Owner{(std::uint64_t{generation} << 48) | (lab_ref & kRefMask)};
  }
  static constexpr Owner terminated() noexcept { return Owner{kTerminatedWord}; }

  bool is_terminated() const noexcept { return word == kTerminatedWord; }
  std::uint16_t generation() const noexcept { return static_cast<std::uint16_t>(word >> 48); }
  std::uint64_t lab_ref() const noexcept { return word & kRefMask; }

  friend bool operator==(Owner, Owner) = default;
};

// Edges of the span life cycle. floating->free is taken when the last block
// of a span that never crossed the reusability threshold is freed.
bool is_legal_transition(SpanState from, SpanState to) noexcept;

// Lives in the first bytes of every real span. The remote free list sits on
// its own cache line.
struct alignas(64) SpanHeader {
  std::atomic<std::uint64_t> link;
  std::atomic<std::uint64_t> epoch;
  std::atomic<std::uint64_t> owner;
  std::atomic<std::uint32_t> local_count;
  std::atomic<std::uint32_t> bump;
  void* local_head;
  std::atomic<ClassId> size_class;
  // Reusable-set bookkeeping; next is kept in link. Guarded by the set latch.
  SpanHeader* set_prev;
  std::atomic<const void*> set_membership;

  alignas(64) std::atomic<std::uint64_t> remote;
};

static_assert(sizeof(SpanHeader) <= kSmallHeaderSize);

// Remote free-list word: low 48 bits hold the head block's offset from the
// span base (0 = empty), high 16 bits the element count.
struct RemoteWord {
  static constexpr std::uint64_t kOffsetMask = (std::uint64_t{1} << 48) - 1;

  std::uint64_t word = 0;

  std::uint64_t head_offset() const noexcept { return word & kOffsetMask; }
  std::uint32_t count() const noexcept { return static_cast<std::uint32_t>(word >> 48); }
  static constexpr RemoteWord make(std::uint64_t offset, std::uint32_t count) noexcept {
    return RemoteWord{(std::uint64_t{count} << 48) | (offset & kOffsetMask)};
  }
};

// Non-owning handle over a span header.
class Span {
 public:
  Span() = default;
  explicit Span(std::uintptr_t base) noexcept : header_(reinterpret_cast<SpanHeader*>(base)) {}
  explicit Span(SpanHeader* header) noexcept : header_(header) {}

  explicit operator bool() const noexcept { return header_ != nullptr; }
  friend bool operator==(Span, Span) = default;

  SpanHeader* header() const noexcept { return header_; }
  std::uintptr_t base() const noexcept { return reinterpret_cast<std::uintptr_t>(header_); }

  // Rewrites the header for class. The epoch keeps its counter; an arena-fresh
  // span starts at (free, 0). Must not be visible to other threads.
  void init_for_class(ClassId id, Owner owner) noexcept;

  ClassId size_class() const noexcept { return header_->size_class.load(std::memory_order_relaxed); }
  const SizeClass& geometry() const noexcept { return kSizeClasses[size_class()]; }
  std::uintptr_t payload_start() const noexcept { return base() + geometry().header_size; }
  std::uint32_t real_span_size() const noexcept { return geometry().real_span_size; }

  Epoch epoch() const noexcept { return Epoch{header_->epoch.load(std::memory_order_acquire)}; }
  Epoch epoch_seq_cst() const noexcept { return Epoch{header_->epoch.load(std::memory_order_seq_cst)}; }
  Owner owner() const noexcept { return Owner{header_->owner.load(std::memory_order_acquire)}; }

  // Owner-only. Local list first, then the never-used tail; nullptr when both
  // are exhausted. Remote frees are never consumed here.
  void* alloc_block() noexcept {
    SpanHeader& h = *header_;
    if (void* block = h.local_head) {
      h.local_head = *static_cast<void**>(block);
      h.local_count.store(h.local_count.load(std::memory_order_relaxed) - 1, std::memory_order_relaxed);
      return block;
    }
    const std::uint32_t next = h.bump.load(std::memory_order_relaxed);
    const SizeClass& g = geometry();
    if (next >= g.blocks_per_span) return nullptr;
    h.bump.store(next + 1, std::memory_order_release);
    return reinterpret_cast<void*>(base() + g.header_size + std::uintptr_t{next} * g.block_size);
  }

  // Owner-only push onto the local list. Returns the new local count.
  std::uint32_t free_local(void* block) noexcept {
    SpanHeader& h = *header_;
    *static_cast<void**>(block) = h.local_head;
    h.local_head = block;
    const std::uint32_t count = h.local_count.load(std::memory_order_relaxed) + 1;
    h.local_count.store(count, std::memory_order_release);
    return count;
  }

  // Any thread. Pushes block and bumps the embedded count in one CAS.
  std::uint32_t free_remote(void* block) noexcept;

  // Owner-only. Moves the whole remote list into the local one when it holds
  // more than threshold blocks; returns the number moved.
  std::uint32_t drain_remotes(std::uint32_t threshold) noexcept;

  // Conditional replace of the epoch word. On success returns the installed
  // epoch (target state, counter + 1).
  std::optional<Epoch> try_transition(Epoch observed, SpanState target) noexcept;

  bool try_adopt(Owner observed, Owner new_owner) noexcept {
    std::uint64_t expected = observed.word;
    return header_->owner.compare_exchange_strong(expected, new_owner.word, std::memory_order_acq_rel,
                                                  std::memory_order_relaxed);
  }

  std::uint32_t local_count() const noexcept { return header_->local_count.load(std::memory_order_acquire); }
  std::uint32_t bump_index() const noexcept { return header_->bump.load(std::memory_order_acquire); }
  RemoteWord remote() const noexcept { return RemoteWord{header_->remote.load(std::memory_order_acquire)}; }
  std::uint32_t remote_count() const noexcept { return remote().count(); }
  void* local_head() const noexcept { return header_->local_head; }
  void* remote_head() const noexcept {
    const std::uint64_t offset = remote().head_offset();
    return offset ? reinterpret_cast<void*>(base() + offset) : nullptr;
  }

  // Local, then never-used, then remote. While the span is not hot each term
  // only grows, so the sum never exceeds the true count.
  std::uint32_t free_blocks() const noexcept {
    const std::uint32_t local = local_count();
    const std::uint32_t unused = geometry().blocks_per_span - bump_index();
    return local + unused + remote_count();
  }

  bool owns_block(std::uintptr_t address) const noexcept {
    const SizeClass& g = geometry();
    const std::uintptr_t start = payload_start();
    if (address < start) return false;
    const std::uintptr_t offset = address - start;
    return offset % g.block_size == 0 && offset / g.block_size < g.blocks_per_span;
  }

 private:
  SpanHeader* header_ = nullptr;
};

}  // namespace vspan
