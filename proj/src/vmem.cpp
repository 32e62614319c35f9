#include "vspan/vmem.hpp"

#include <sys/mman.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>

namespace vspan {
namespace {

[[noreturn]] void die(const char* what, std::uintptr_t base, std::size_t length) {
  std::fprintf(stderr, "vspan: %s [%#zx, +%#zx)\n", what, static_cast<std::size_t>(base), length);
  std::abort();
}

void check_length(std::size_t length) {
  if (length == 0 || length % kVirtualSpanSize != 0) {
    throw ReservationError("reservation length must be a positive multiple of 2MB");
  }
}

// Maps length bytes aligned to kVirtualSpanSize. Pages are reserved lazily.
std::uintptr_t map_aligned(std::size_t length) {
  const std::size_t padded = length + kVirtualSpanSize;
  void* raw = ::mmap(nullptr, padded, PROT_READ | PROT_WRITE,
                     MAP_PRIVATE | MAP_ANONYMOUS | MAP_NORESERVE, -1, 0);
  if (raw == MAP_FAILED) {
    throw ReservationError(std::string("mmap reservation failed: ") + std::strerror(errno));
  }
  const auto start = reinterpret_cast<std::uintptr_t>(raw);
  const std::uintptr_t base = round_up(start, kVirtualSpanSize);
  if (base > start) ::munmap(raw, base - start);
  const std::uintptr_t tail = base + length;
  const std::uintptr_t end = start + padded;
  if (end > tail) ::munmap(reinterpret_cast<void*>(tail), end - tail);
  return base;
}

void dontneed(std::uintptr_t base, std::size_t length) {
  if (length == 0) return;
  if (::madvise(reinterpret_cast<void*>(base), length, MADV_DONTNEED) != 0) {
    die("madvise failed", base, length);
  }
}

bool aligned_range(std::uintptr_t base, std::size_t length) {
  return base % kPageSize == 0 && length % kPageSize == 0;
}

// Sets bits [first, first + count) and returns how many were previously clear.
std::size_t set_bits(std::atomic<std::uint64_t>* words, std::size_t first, std::size_t count) {
  std::size_t newly = 0;
  while (count > 0) {
    const std::size_t word = first / 64;
    const std::size_t bit = first % 64;
    const std::size_t take = std::min<std::size_t>(64 - bit, count);
    const std::uint64_t mask = (take == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << take) - 1)) << bit;
    if ((words[word].load(std::memory_order_relaxed) & mask) != mask) {
      const std::uint64_t old = words[word].fetch_or(mask, std::memory_order_relaxed);
      newly += static_cast<std::size_t>(std::popcount(mask & ~old));
    }
    first += take;
    count -= take;
  }
  return newly;
}

std::size_t clear_bits(std::atomic<std::uint64_t>* words, std::size_t first, std::size_t count) {
  std::size_t cleared = 0;
  while (count > 0) {
    const std::size_t word = first / 64;
    const std::size_t bit = first % 64;
    const std::size_t take = std::min<std::size_t>(64 - bit, count);
    const std::uint64_t mask = (take == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << take) - 1)) << bit;
    if (words[word].load(std::memory_order_relaxed) & mask) {
      const std::uint64_t old = words[word].fetch_and(~mask, std::memory_order_relaxed);
      cleared += static_cast<std::size_t>(std::popcount(mask & old));
    }
    first += take;
    count -= take;
  }
  return cleared;
}

std::size_t count_bits(const std::atomic<std::uint64_t>* words, std::size_t first, std::size_t count) {
  std::size_t total = 0;
  while (count > 0) {
    const std::size_t word = first / 64;
    const std::size_t bit = first % 64;
    const std::size_t take = std::min<std::size_t>(64 - bit, count);
    const std::uint64_t mask = (take == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << take) - 1)) << bit;
    total += static_cast<std::size_t>(std::popcount(words[word].load(std::memory_order_relaxed) & mask));
    first += take;
    count -= take;
  }
  return total;
}

}  // namespace

std::string_view to_string(ProviderKind kind) noexcept {
  return kind == ProviderKind::os ? "os" : "sim";
}

ProviderKind provider_kind_from_string(std::string_view name) {
  if (name == "os") return ProviderKind::os;
  if (name == "sim") return ProviderKind::sim;
  throw std::invalid_argument("unknown provider: " + std::string(name));
}

std::size_t process_rss_bytes() {
  std::ifstream statm("/proc/self/statm");
  std::size_t total_pages = 0;
  std::size_t resident_pages = 0;
  if (!(statm >> total_pages >> resident_pages)) return 0;
  return resident_pages * static_cast<std::size_t>(::sysconf(_SC_PAGESIZE));
}

// ---- OsProvider ----------------------------------------------------------

OsProvider::OsProvider(std::size_t reservation_cap)
    : VirtualMemoryProvider(false), cap_(reservation_cap) {}

OsProvider::~OsProvider() {
  for (const auto& region : regions_) ::munmap(reinterpret_cast<void*>(region.base), region.length);
}

VmRegion OsProvider::reserve(std::size_t length) {
  check_length(length);
  std::lock_guard lock(mutex_);
  if (reserved_ + length > cap_) throw ReservationError("reservation cap exceeded");
  VmRegion region{map_aligned(length), length, kPageSize};
  regions_.push_back(region);
  reserved_ += length;
  reserve_calls_.fetch_add(1, std::memory_order_relaxed);
  return region;
}

void OsProvider::decommit(std::uintptr_t base, std::size_t length) {
  if (!aligned_range(base, length)) die("unaligned decommit", base, length);
  dontneed(base, length);
  decommit_calls_.fetch_add(1, std::memory_order_relaxed);
}

bool OsProvider::protect_guard(std::uintptr_t base, std::size_t length, bool enable) {
  if (length == 0) return true;
  if (!aligned_range(base, length)) die("unaligned guard", base, length);
  const int prot = enable ? PROT_NONE : (PROT_READ | PROT_WRITE);
  return ::mprotect(reinterpret_cast<void*>(base), length, prot) == 0;
}

void* OsProvider::map_pages(std::size_t length) {
  void* p = ::mmap(nullptr, length, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
  return p == MAP_FAILED ? nullptr : p;
}

void OsProvider::unmap_pages(void* base, std::size_t length) { ::munmap(base, length); }

std::size_t OsProvider::committed_in(std::uintptr_t base, std::size_t length) const {
  if (length == 0) return 0;
  const std::size_t pages = length / kPageSize;
  std::vector<unsigned char> residency(pages);
  if (::mincore(reinterpret_cast<void*>(base), length, residency.data()) != 0) return 0;
  std::size_t resident = 0;
  for (unsigned char r : residency) resident += (r & 1u);
  return resident * kPageSize;
}

VmStats OsProvider::stats() const {
  return VmStats{process_rss_bytes(), decommit_calls_.load(std::memory_order_relaxed),
                 reserve_calls_.load(std::memory_order_relaxed)};
}

// ---- SimProvider ---------------------------------------------------------

SimProvider::SimProvider(std::size_t reservation_cap)
    : VirtualMemoryProvider(true), cap_(reservation_cap) {}

SimProvider::~SimProvider() {
  const std::size_t n = region_count_.load(std::memory_order_acquire);
  for (std::size_t i = 0; i < n; ++i) {
    ::munmap(reinterpret_cast<void*>(regions_[i].range.base), regions_[i].range.length);
  }
  for (const auto& [base, length] : standalone_) ::munmap(reinterpret_cast<void*>(base), length);
}

VmRegion SimProvider::reserve(std::size_t length) {
  check_length(length);
  std::lock_guard lock(mutex_);
  const std::size_t n = region_count_.load(std::memory_order_relaxed);
  if (n == kMaxRegions) throw ReservationError("too many sim regions");
  if (reserved_ + length > cap_) throw ReservationError("reservation cap exceeded");
  Region& region = regions_[n];
  region.range = VmRegion{map_aligned(length), length, kPageSize};
  region.words = (length / kPageSize + 63) / 64;
  region.committed = std::make_unique<std::atomic<std::uint64_t>[]>(region.words);
  region.guarded = std::make_unique<std::atomic<std::uint64_t>[]>(region.words);
  reserved_ += length;
  reserve_calls_.fetch_add(1, std::memory_order_relaxed);
  region_count_.store(n + 1, std::memory_order_release);
  return region.range;
}

SimProvider::Region* SimProvider::find(std::uintptr_t base, std::size_t length) const {
  const std::size_t n = region_count_.load(std::memory_order_acquire);
  for (std::size_t i = 0; i < n; ++i) {
    const VmRegion& r = regions_[i].range;
    if (r.contains(base) && length <= r.end() - base) return const_cast<Region*>(&regions_[i]);
  }
  return nullptr;
}

void SimProvider::decommit(std::uintptr_t base, std::size_t length) {
  if (!aligned_range(base, length)) die("unaligned decommit", base, length);
  Region* region = find(base, length);
  if (region == nullptr) die("decommit outside reserved region", base, length);
  dontneed(base, length);
  const std::size_t first = (base - region->range.base) / kPageSize;
  const std::size_t cleared = clear_bits(region->committed.get(), first, length / kPageSize);
  committed_pages_.fetch_sub(static_cast<std::int64_t>(cleared), std::memory_order_relaxed);
  decommit_calls_.fetch_add(1, std::memory_order_relaxed);
}

bool SimProvider::protect_guard(std::uintptr_t base, std::size_t length, bool enable) {
  if (length == 0) return true;
  if (!aligned_range(base, length)) die("unaligned guard", base, length);
  Region* region = find(base, length);
  if (region == nullptr) die("guard outside reserved region", base, length);
  const std::size_t first = (base - region->range.base) / kPageSize;
  if (enable) {
    set_bits(region->guarded.get(), first, length / kPageSize);
  } else {
    clear_bits(region->guarded.get(), first, length / kPageSize);
  }
  const int prot = enable ? PROT_NONE : (PROT_READ | PROT_WRITE);
  return ::mprotect(reinterpret_cast<void*>(base), length, prot) == 0;
}

bool SimProvider::is_guarded(std::uintptr_t base, std::size_t length) const {
  Region* region = find(base, length);
  if (region == nullptr || length == 0) return false;
  const std::uintptr_t first_page = (base - region->range.base) / kPageSize;
  const std::uintptr_t last_page = (base + length - 1 - region->range.base) / kPageSize;
  return count_bits(region->guarded.get(), first_page, last_page - first_page + 1) != 0;
}

void* SimProvider::map_pages(std::size_t length) {
  void* p = ::mmap(nullptr, length, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
  if (p == MAP_FAILED) return nullptr;
  {
    std::lock_guard lock(mutex_);
    standalone_.emplace(reinterpret_cast<std::uintptr_t>(p), length);
  }
  committed_pages_.fetch_add(static_cast<std::int64_t>(length / kPageSize), std::memory_order_relaxed);
  return p;
}

void SimProvider::unmap_pages(void* base, std::size_t length) {
  {
    std::lock_guard lock(mutex_);
    auto it = standalone_.find(reinterpret_cast<std::uintptr_t>(base));
    if (it == standalone_.end() || it->second != length) {
      die("unmap of unknown mapping", reinterpret_cast<std::uintptr_t>(base), length);
    }
    standalone_.erase(it);
  }
  committed_pages_.fetch_sub(static_cast<std::int64_t>(length / kPageSize), std::memory_order_relaxed);
  ::munmap(base, length);
}

void SimProvider::note_touch(std::uintptr_t base, std::size_t length) {
  if (length == 0) return;
  Region* region = find(base, length);
  if (region == nullptr) return;
  const std::size_t first = (base - region->range.base) / kPageSize;
  const std::size_t last = (base + length - 1 - region->range.base) / kPageSize;
  if (count_bits(region->guarded.get(), first, last - first + 1) != 0) {
    die("allocation touches a guard range", base, length);
  }
  const std::size_t newly = set_bits(region->committed.get(), first, last - first + 1);
  if (newly) committed_pages_.fetch_add(static_cast<std::int64_t>(newly), std::memory_order_relaxed);
}

std::size_t SimProvider::committed_in(std::uintptr_t base, std::size_t length) const {
  if (length == 0) return 0;
  Region* region = find(base, length);
  if (region == nullptr) return 0;
  const std::size_t first = (base - region->range.base) / kPageSize;
  const std::size_t last = (base + length - 1 - region->range.base) / kPageSize;
  return count_bits(region->committed.get(), first, last - first + 1) * kPageSize;
}

VmStats SimProvider::stats() const {
  const std::int64_t pages = committed_pages_.load(std::memory_order_relaxed);
  return VmStats{static_cast<std::size_t>(pages < 0 ? 0 : pages) * kPageSize,
                 decommit_calls_.load(std::memory_order_relaxed),
                 reserve_calls_.load(std::memory_order_relaxed)};
}

std::unique_ptr<VirtualMemoryProvider> make_provider(ProviderKind kind, std::size_t reservation_cap) {
  if (kind == ProviderKind::os) return std::make_unique<OsProvider>(reservation_cap);
  return std::make_unique<SimProvider>(reservation_cap);
}

}  // namespace vspan
