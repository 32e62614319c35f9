#pragma once

#include <atomic>
#include <cstdint>

#include "vspan/span.hpp"

namespace vspan {

// Treiber stack of spans linked through SpanHeader::link. The top word packs a
// 48-bit span address with a 16-bit tag that changes on every successful
// replacement, so a pop that observed a stale top fails its CAS even when the
// same span is back on top.
class alignas(64) TaggedStack {
 public:
  static constexpr std::uint64_t kRefMask = (std::uint64_t{1} << 48) - 1;

  struct Counters {
    std::uint64_t pushes = 0;
    std::uint64_t pops = 0;
    std::uint64_t retries = 0;
  };

  // Snapshot taken by the first half of a pop.
  struct PopAttempt {
    std::uint64_t top = 0;
    std::uint64_t next = 0;

    SpanHeader* element() const noexcept { return reinterpret_cast<SpanHeader*>(top & kRefMask); }
  };

  void push(SpanHeader* span) noexcept {
    const auto ref = reinterpret_cast<std::uint64_t>(span);
    std::uint64_t top = top_.load(std::memory_order_relaxed);
    for (;;) {
      span->link.store(top & kRefMask, std::memory_order_relaxed);
      if (top_.compare_exchange_weak(top, retag(top, ref), std::memory_order_release,
                                     std::memory_order_relaxed)) {
        break;
      }
      retries_.fetch_add(1, std::memory_order_relaxed);
    }
    pushes_.fetch_add(1, std::memory_order_relaxed);
  }

  SpanHeader* pop() noexcept {
    for (;;) {
      const PopAttempt attempt = begin_pop();
      if (attempt.element() == nullptr) return nullptr;
      if (commit_pop(attempt)) return attempt.element();
      retries_.fetch_add(1, std::memory_order_relaxed);
    }
  }

  // The two halves of pop, exposed so interleavings can be forced in tests.
  // Reading the element's link is safe even if it was popped concurrently:
  // span headers stay mapped for the arena's lifetime.
  PopAttempt begin_pop() const noexcept {
    PopAttempt attempt;
    attempt.top = top_.load(std::memory_order_acquire);
    if (SpanHeader* element = attempt.element()) {
      attempt.next = element->link.load(std::memory_order_relaxed);
    }
    return attempt;
  }

  bool commit_pop(const PopAttempt& attempt) noexcept {
    std::uint64_t expected = attempt.top;
    if (top_.compare_exchange_strong(expected, retag(attempt.top, attempt.next), std::memory_order_acquire,
                                     std::memory_order_relaxed)) {
      pops_.fetch_add(1, std::memory_order_relaxed);
      return true;
    }
    return false;
  }

  bool empty() const noexcept { return (top_.load(std::memory_order_acquire) & kRefMask) == 0; }
  std::uint16_t tag() const noexcept { return static_cast<std::uint16_t>(top_.load() >> 48); }

  Counters counters() const noexcept {
    return Counters{pushes_.load(std::memory_order_relaxed), pops_.load(std::memory_order_relaxed),
                    retries_.load(std::memory_order_relaxed)};
  }

  // Walks the list; only meaningful when no other thread mutates the stack.
  template <typename Fn>
  void for_each_quiescent(Fn&& fn) const {
    auto* element = reinterpret_cast<SpanHeader*>(top_.load() & kRefMask);
    while (element != nullptr) {
      fn(element);
      element = reinterpret_cast<SpanHeader*>(element->link.load() & kRefMask);
    }
  }

 private:
  static std::uint64_t retag(std::uint64_t old_top, std::uint64_t ref) noexcept {
    const std::uint64_t tag = ((old_top >> 48) + 1) & 0xFFFF;
    return (tag << 48) | (ref & kRefMask);
  }

  std::atomic<std::uint64_t> top_{0};
  std::atomic<std::uint64_t> pushes_{0};
  std::atomic<std::uint64_t> pops_{0};
  std::atomic<std::uint64_t> retries_{0};
};

}  // namespace vspan
