#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

#include "vspan/arena.hpp"
#include "vspan/frag_ledger.hpp"
#include "vspan/reusable_set.hpp"
#include "vspan/span.hpp"
#include "vspan/span_pool.hpp"
#include "vspan/spin_latch.hpp"
#include "vspan/transition_trace.hpp"
#include "vspan/vmem.hpp"

namespace vspan {

enum class LabMode { tlab, clab };

struct FrontendConfig {
  LabMode mode = LabMode::tlab;
  unsigned reuse_percent = 80;
  bool lazy_reclaim = false;
  bool guard_pages = false;
  std::size_t max_labs = 512;
  std::size_t clab_count = 1;
};

// Test/bench hooks; null members cost one branch each.
struct Instrumentation {
  FragLedger* ledger = nullptr;
  TransitionTrace* trace = nullptr;
};

// Local allocation buffer: one hot span and one reusable set per class.
struct alignas(64) Lab {
  std::atomic<std::uint64_t> owner{Owner::kTerminatedWord};
  std::uint16_t generation = 0;
  std::uint32_t attached = 0;  // guarded by the frontend's registry mutex
  std::array<Span, kNumClasses> hot{};
  std::array<ReusableSet, kNumClasses> reusable;
  std::array<SpinLatch, kNumClasses> class_latch;  // CLAB mode only

  // Empty spans parked until the next slow-path allocation (lazy reclaim).
  SpinLatch pending_latch;
  Owner pending_gate = Owner::terminated();
  SpanHeader* pending_head = nullptr;
  std::size_t pending_count = 0;

  Owner current_owner() const noexcept { return Owner{owner.load(std::memory_order_acquire)}; }
};

// Per-thread view of one frontend.
struct ThreadContext {
  Lab* lab = nullptr;
  std::uint32_t lab_index = 0;
  std::size_t thread_index = 0;
  std::uint32_t last_span_fetches = 0;
  std::uint32_t last_transitions = 0;
};

class Frontend {
 public:
  Frontend(Arena& arena, SpanPool& pool, VirtualMemoryProvider& provider, FrontendConfig config,
           Instrumentation instrumentation = {});
  ~Frontend();

  Frontend(const Frontend&) = delete;
  Frontend& operator=(const Frontend&) = delete;

  // Block of class id from the calling thread's LAB; nullptr when the arena
  // is exhausted.
  void* allocate(ClassId id);

  // block must lie in the arena and be live.
  void deallocate(void* block);

  // Calling thread's context, attaching it to a LAB on first use.
  ThreadContext& context();

  // Runs LAB termination now if this thread is the last one attached. Thread
  // exit does the same automatically.
  void detach_current_thread();

  std::uint32_t reuse_threshold(ClassId id) const noexcept { return reuse_threshold_[id]; }
  const FrontendConfig& config() const noexcept { return config_; }
  std::size_t lab_count() const noexcept { return config_.max_labs; }
  Lab& lab(std::size_t index) noexcept { return labs_[index]; }
  std::uint64_t instance_id() const noexcept { return instance_id_; }

  // True when owner no longer matches its LAB (terminated or reinitialised).
  bool is_orphan(Owner owner) const noexcept;

  // LABs that have ever been initialised.
  std::size_t labs_used() const;

  // Total parked spans across LABs (lazy reclaim); quiescent only.
  std::size_t pending_spans_quiescent() const;

  // Called from the thread-exit hook.
  void detach(std::uint32_t lab_index);

 private:
  struct Fetched {
    Span span;
    bool from_pool = false;
  };

  std::uint32_t attach(std::size_t thread_index);
  void lab_init(Lab& lab, std::uint32_t index);
  void lab_terminate(Lab& lab);

  Fetched get_span(ThreadContext& ctx, ClassId id);
  void prepare_span(Span span, ClassId id, Owner owner);
  std::optional<Epoch> transition(Span span, Epoch observed, SpanState target);

  // Post-free state handling: promote a floating span past the threshold to
  // reusable (when promote is set), and reclaim it once empty. Returns true
  // when this call moved the span to free.
  bool settle(Span span, Owner set_owner, ThreadContext& ctx, bool promote = true);
  void reclaim(Span span, Owner set_owner, ThreadContext& ctx);
  void flush_pending(Lab& lab, ThreadContext& ctx);
  Lab* lab_for(Owner owner) noexcept;

  Arena& arena_;
  SpanPool& pool_;
  VirtualMemoryProvider& provider_;
  FrontendConfig config_;
  Instrumentation instrumentation_;
  std::array<std::uint32_t, kNumClasses> reuse_threshold_{};
  std::unique_ptr<Lab[]> labs_;
  std::uint64_t instance_id_;
  std::atomic<bool> guards_enabled_;

  mutable std::mutex registry_mutex_;
  std::vector<std::uint32_t> free_labs_;
  std::size_t labs_used_ = 0;
};

// Dense 0-based id of the calling thread, assigned on first use.
std::size_t current_thread_index() noexcept;

}  // namespace vspan
