#include "vspan/span.hpp"

#include <cstdio>
#include <cstdlib>

namespace vspan {

const char* to_string(SpanState state) noexcept {
  switch (state) {
    case SpanState::expected: return "expected";
    case SpanState::free: return "free";
    case SpanState::hot: return "hot";
    case SpanState::floating: return "floating";
    case SpanState::reusable: return "reusable";
  }
  return "invalid";
}

bool is_legal_transition(SpanState from, SpanState to) noexcept {
  switch (from) {
    case SpanState::free: return to == SpanState::hot;
    case SpanState::hot: return to == SpanState::floating;
    case SpanState::floating: return to == SpanState::reusable || to == SpanState::free;
    case SpanState::reusable:
      return to == SpanState::hot || to == SpanState::free || to == SpanState::floating;
    case SpanState::expected: return false;
  }
  return false;
}

void Span::init_for_class(ClassId id, Owner owner) noexcept {
  SpanHeader& h = *header_;
  const Epoch current{h.epoch.load(std::memory_order_relaxed)};
  if (current.state() == SpanState::expected) {
    h.epoch.store(Epoch::make(SpanState::free, 0).word, std::memory_order_relaxed);
  }
  h.link.store(0, std::memory_order_relaxed);
  h.owner.store(owner.word, std::memory_order_relaxed);
  h.local_count.store(0, std::memory_order_relaxed);
  h.bump.store(0, std::memory_order_relaxed);
  h.local_head = nullptr;
  h.size_class.store(id, std::memory_order_relaxed);
  h.set_prev = nullptr;
  h.set_membership.store(nullptr, std::memory_order_relaxed);
  h.remote.store(0, std::memory_order_relaxed);
}

std::uint32_t Span::free_remote(void* block) noexcept {
  const std::uint64_t offset = reinterpret_cast<std::uintptr_t>(block) - base();
  std::uint64_t old = header_->remote.load(std::memory_order_relaxed);
  for (;;) {
    const RemoteWord current{old};
    const std::uint64_t head = current.head_offset();
    *static_cast<void**>(block) = head ? reinterpret_cast<void*>(base() + head) : nullptr;
    const RemoteWord next = RemoteWord::make(offset, current.count() + 1);
    if (header_->remote.compare_exchange_weak(old, next.word, std::memory_order_release,
                                              std::memory_order_relaxed)) {
      return next.count();
    }
  }
}

std::uint32_t Span::drain_remotes(std::uint32_t threshold) noexcept {
  if (remote_count() <= threshold) return 0;
  const RemoteWord taken{header_->remote.exchange(0, std::memory_order_acquire)};
  if (taken.count() == 0) return 0;
  SpanHeader& h = *header_;
  void* head = reinterpret_cast<void*>(base() + taken.head_offset());
  if (h.local_head != nullptr) {
    void* tail = head;
    while (void* next = *static_cast<void**>(tail)) tail = next;
    *static_cast<void**>(tail) = h.local_head;
  }
  h.local_head = head;
  h.local_count.store(h.local_count.load(std::memory_order_relaxed) + taken.count(),
                      std::memory_order_release);
  return taken.count();
}

std::optional<Epoch> Span::try_transition(Epoch observed, SpanState target) noexcept {
#ifdef VSPAN_CHECKS
  if (!is_legal_transition(observed.state(), target)) {
    std::fprintf(stderr, "vspan: illegal span transition %s -> %s\n", to_string(observed.state()),
                 to_string(target));
    std::abort();
  }
#endif
  const Epoch next = observed.successor(target);
  std::uint64_t expected = observed.word;
  if (header_->epoch.compare_exchange_strong(expected, next.word, std::memory_order_seq_cst,
                                             std::memory_order_acquire)) {
    return next;
  }
  return std::nullopt;
}

}  // namespace vspan
