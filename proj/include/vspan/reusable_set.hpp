#pragma once

#include <cstddef>
#include <mutex>
#include <optional>

#include "vspan/span.hpp"
#include "vspan/spin_latch.hpp"

namespace vspan {

// Per-(LAB, class) set of reusable spans: an intrusive doubly linked list
// (next in SpanHeader::link, prev in SpanHeader::set_prev) behind one latch.
// Inserts are gated on the LAB owner the caller observed.
class ReusableSet {
 public:
  struct Taken {
    Span span;
    Epoch epoch;  // read under the latch while the span was a member
  };

  void open(Owner owner) noexcept {
    std::lock_guard lock(latch_);
    gate_ = owner;
  }

  void close() noexcept {
    std::lock_guard lock(latch_);
    gate_ = Owner::terminated();
  }

  Owner gate() const noexcept {
    std::lock_guard lock(latch_);
    return gate_;
  }

  // Inserts span if the gate still equals expected_owner and the span still
  // carries the reusable epoch the caller installed.
  bool put(Owner expected_owner, Span span, Epoch installed) noexcept {
    std::lock_guard lock(latch_);
    if (gate_.is_terminated() || gate_ != expected_owner) return false;
    if (span.epoch() != installed) return false;
    SpanHeader* h = span.header();
    if (h->set_membership.load(std::memory_order_relaxed) != nullptr) return false;
    h->set_prev = nullptr;
    h->link.store(reinterpret_cast<std::uint64_t>(head_), std::memory_order_relaxed);
    if (head_ != nullptr) head_->set_prev = h;
    head_ = h;
    h->set_membership.store(this, std::memory_order_seq_cst);
    ++size_;
    // Pairs with the seq_cst membership load after a ->free transition: either
    // that thread sees the membership and removes the span, or we see its new
    // epoch here and back out.
    if (span.epoch_seq_cst() != installed) {
      unlink(h);
      return false;
    }
    return true;
  }

  std::optional<Taken> take() noexcept {
    std::lock_guard lock(latch_);
    if (head_ == nullptr) return std::nullopt;
    SpanHeader* h = head_;
    unlink(h);
    return Taken{Span(h), Span(h).epoch()};
  }

  // Unlinks span if it is a member of this set. Membership, not the gate,
  // decides: a span that went free must leave the set before the pool sees it,
  // even while the set is closed for termination.
  bool remove(Span span) noexcept {
    std::lock_guard lock(latch_);
    SpanHeader* h = span.header();
    if (h->set_membership.load(std::memory_order_relaxed) != this) return false;
    unlink(h);
    return true;
  }

  std::size_t size() const noexcept {
    std::lock_guard lock(latch_);
    return size_;
  }

 private:
  void unlink(SpanHeader* h) noexcept {
    auto* next = reinterpret_cast<SpanHeader*>(h->link.load(std::memory_order_relaxed));
    if (h->set_prev != nullptr) {
      h->set_prev->link.store(reinterpret_cast<std::uint64_t>(next), std::memory_order_relaxed);
    } else {
      head_ = next;
    }
    if (next != nullptr) next->set_prev = h->set_prev;
    h->set_prev = nullptr;
    h->link.store(0, std::memory_order_relaxed);
    h->set_membership.store(nullptr, std::memory_order_release);
    --size_;
  }

  mutable SpinLatch latch_;
  Owner gate_ = Owner::terminated();
  SpanHeader* head_ = nullptr;
  std::size_t size_ = 0;
};

}  // namespace vspan
