#include "vspan/allocator.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>

namespace vspan {
namespace {

const char* env(const char* name) {
  const char* value = std::getenv(name);
  return value != nullptr && *value != '\0' ? value : nullptr;
}

bool parse_flag(const char* value) {
  const std::string v(value);
  return v == "1" || v == "on" || v == "true" || v == "yes";
}

SpanPoolConfig pool_config(const AllocatorConfig& c) {
  return SpanPoolConfig{c.pool_width == 0 ? hardware_threads() : c.pool_width, c.decommit_threshold, c.decommit};
}

FrontendConfig frontend_config(const AllocatorConfig& c) {
  FrontendConfig f;
  f.mode = c.lab_mode;
  f.reuse_percent = c.reuse_percent;
  f.lazy_reclaim = c.lazy_reclaim;
  f.guard_pages = c.guard_pages;
  f.max_labs = c.max_labs;
  f.clab_count = c.clab_count == 0 ? hardware_threads() : c.clab_count;
  return f;
}

}  // namespace

std::size_t hardware_threads() noexcept {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

AllocatorConfig AllocatorConfig::from_env(AllocatorConfig base) {
  if (const char* v = env("VSPAN_ARENA_BYTES")) base.arena_bytes = std::stoull(v);
  if (const char* v = env("VSPAN_PROVIDER")) base.provider = provider_kind_from_string(v);
  if (const char* v = env("VSPAN_GUARD_PAGES")) base.guard_pages = parse_flag(v);
  if (const char* v = env("VSPAN_REUSE_PERCENT")) base.reuse_percent = static_cast<unsigned>(std::stoul(v));
  if (const char* v = env("VSPAN_POOL_WIDTH")) base.pool_width = std::stoull(v);
  if (const char* v = env("VSPAN_LAB_MODE")) {
    const std::string mode(v);
    if (mode == "tlab") {
      base.lab_mode = LabMode::tlab;
    } else if (mode == "clab") {
      base.lab_mode = LabMode::clab;
    } else {
      throw std::invalid_argument("VSPAN_LAB_MODE must be tlab or clab");
    }
  }
  return base;
}

AllocatorConfig AllocatorConfig::from_env() { return from_env(AllocatorConfig{}); }

Allocator::Allocator() : Allocator(AllocatorConfig{}) {}

Allocator::Allocator(AllocatorConfig config)
    : config_(config),
      provider_(make_provider(config.provider, config.reservation_cap)),
      arena_(*provider_, config.arena_bytes),
      pool_(arena_, *provider_, pool_config(config)),
      ledger_(config.ledger ? std::make_unique<FragLedger>(config.ledger_events) : nullptr),
      trace_(config.trace ? std::make_unique<TransitionTrace>() : nullptr),
      frontend_(arena_, pool_, *provider_, frontend_config(config), Instrumentation{ledger_.get(), trace_.get()}) {}

void* Allocator::alloc(std::size_t size) {
  if (auto id = class_for_size(size)) return frontend_.allocate(*id);
  return alloc_huge(size);
}

void Allocator::dealloc(void* pointer) {
  if (pointer == nullptr) return;
  if (arena_.contains(pointer)) {
    frontend_.deallocate(pointer);
  } else {
    dealloc_huge(pointer);
  }
}

void* Allocator::calloc(std::size_t count, std::size_t size) {
  if (size != 0 && count > std::numeric_limits<std::size_t>::max() / size) return nullptr;
  const std::size_t bytes = count * size;
  void* p = alloc(bytes);
  // Recycled blocks carry stale list words; fresh mappings are already zero.
  if (p != nullptr && arena_.contains(p)) std::memset(p, 0, bytes);
  return p;
}

void* Allocator::realloc(void* pointer, std::size_t size) {
  if (pointer == nullptr) return alloc(size);
  const std::size_t old_size = usable_size(pointer);
  if (arena_.contains(pointer)) {
    const auto wanted = class_for_size(size);
    if (wanted && kSizeClasses[*wanted].block_size == old_size) return pointer;
  }
  void* fresh = alloc(size);
  if (fresh == nullptr) return nullptr;
  std::memcpy(fresh, pointer, std::min(old_size, size));
  dealloc(pointer);
  return fresh;
}

void* Allocator::aligned_alloc(std::size_t alignment, std::size_t size) {
  if (alignment == 0 || (alignment & (alignment - 1)) != 0 || alignment > kMaxAlignment) return nullptr;
  if (alignment <= 16) return alloc(size);
  // Blocks of a class whose size is a multiple of alignment start on an
  // alignment boundary: payload offsets (256 or 4096) are multiples of it.
  return alloc(round_up(std::max(size, alignment), alignment));
}

std::size_t Allocator::usable_size(const void* pointer) const {
  if (pointer == nullptr) return 0;
  const auto address = reinterpret_cast<std::uintptr_t>(pointer);
  if (arena_.contains(address)) return Span(arena_.owning_span_base(address)).geometry().block_size;
  const auto* header = reinterpret_cast<const HugeHeader*>(address - kPageSize);
  return header->payload_size;
}

void* Allocator::alloc_huge(std::size_t size) {
  if (size > std::numeric_limits<std::size_t>::max() - 2 * kPageSize) return nullptr;
  const std::size_t total = huge_mapping_size(size);
  void* base = provider_->map_pages(total);
  if (base == nullptr) return nullptr;
  auto* header = static_cast<HugeHeader*>(base);
  header->magic = HugeHeader::kMagic;
  header->payload_size = size;
  header->total_mapping = total;
  return static_cast<std::byte*>(base) + kPageSize;
}

void Allocator::dealloc_huge(void* pointer) {
  const auto address = reinterpret_cast<std::uintptr_t>(pointer);
  auto* header = reinterpret_cast<HugeHeader*>(address - kPageSize);
  if (address % kPageSize != 0 || header->magic != HugeHeader::kMagic) {
    std::fprintf(stderr, "vspan: free of pointer %p not owned by the allocator (bad huge-object magic)\n",
                 pointer);
    std::abort();
  }
  header->magic = 0;
  provider_->unmap_pages(header, header->total_mapping);
}

Allocator& default_allocator() {
  static Allocator* instance = new Allocator(AllocatorConfig::from_env());
  return *instance;
}

}  // namespace vspan
