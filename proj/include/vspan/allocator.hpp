#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>

#include "vspan/arena.hpp"
#include "vspan/frag_ledger.hpp"
#include "vspan/frontend.hpp"
#include "vspan/size_classes.hpp"
#include "vspan/span_pool.hpp"
#include "vspan/transition_trace.hpp"
#include "vspan/vmem.hpp"

namespace vspan {

inline constexpr std::size_t kMaxAlignment = 4096;

struct AllocatorConfig {
  ProviderKind provider = ProviderKind::os;
  std::size_t arena_bytes = kDefaultArenaBytes;
  std::size_t reservation_cap = kDefaultReservationCap;
  std::size_t pool_width = 0;  // 0: hardware concurrency
  std::size_t decommit_threshold = kDefaultDecommitThreshold;
  bool decommit = true;
  unsigned reuse_percent = 80;
  LabMode lab_mode = LabMode::tlab;
  std::size_t clab_count = 0;  // 0: hardware concurrency
  bool lazy_reclaim = false;
  bool guard_pages = false;
  std::size_t max_labs = 512;
  bool ledger = false;
  bool ledger_events = false;
  bool trace = false;

  // Overrides from VSPAN_ARENA_BYTES, VSPAN_PROVIDER, VSPAN_GUARD_PAGES,
  // VSPAN_REUSE_PERCENT, VSPAN_LAB_MODE, VSPAN_POOL_WIDTH.
  static AllocatorConfig from_env(AllocatorConfig base);
  static AllocatorConfig from_env();
};

std::size_t hardware_threads() noexcept;

// Sits in the page right before a directly mapped object's payload.
struct HugeHeader {
  static constexpr std::uint64_t kMagic = 0x7673'7061'6e48'7567;  // "vspanHug"

  std::uint64_t magic;
  std::size_t payload_size;
  std::size_t total_mapping;
};

// Allocator facade: requests up to 1MB go to the span frontend, larger ones
// get their own page mapping with a HugeHeader in front.
class Allocator {
 public:
  Allocator();
  explicit Allocator(AllocatorConfig config);

  Allocator(const Allocator&) = delete;
  Allocator& operator=(const Allocator&) = delete;

  // nullptr when memory is exhausted.
  void* alloc(std::size_t size);
  void dealloc(void* pointer);
  void* calloc(std::size_t count, std::size_t size);
  void* realloc(void* pointer, std::size_t size);
  // alignment: power of two up to kMaxAlignment, else nullptr.
  void* aligned_alloc(std::size_t alignment, std::size_t size);
  std::size_t usable_size(const void* pointer) const;

  const AllocatorConfig& config() const noexcept { return config_; }
  VirtualMemoryProvider& provider() noexcept { return *provider_; }
  Arena& arena() noexcept { return arena_; }
  SpanPool& pool() noexcept { return pool_; }
  Frontend& frontend() noexcept { return frontend_; }
  FragLedger* ledger() noexcept { return ledger_.get(); }
  TransitionTrace* trace() noexcept { return trace_.get(); }

  static std::size_t huge_mapping_size(std::size_t payload) noexcept {
    return round_up(payload, kPageSize) + kPageSize;
  }

 private:
  void* alloc_huge(std::size_t size);
  void dealloc_huge(void* pointer);

  AllocatorConfig config_;
  std::unique_ptr<VirtualMemoryProvider> provider_;
  Arena arena_;
  SpanPool pool_;
  std::unique_ptr<FragLedger> ledger_;
  std::unique_ptr<TransitionTrace> trace_;
  Frontend frontend_;
};

// Process-wide instance configured from the environment, created on first use.
Allocator& default_allocator();

}  // namespace vspan
