#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vspan {

inline constexpr std::size_t kPageSize = 4096;
inline constexpr std::size_t kVirtualSpanSize = std::size_t{1} << 21;
inline constexpr std::size_t kDefaultArenaBytes = std::size_t{1} << 35;
inline constexpr std::size_t kDefaultReservationCap = std::size_t{1} << 42;

constexpr std::size_t round_up(std::size_t value, std::size_t alignment) noexcept {
  return (value + alignment - 1) & ~(alignment - 1);
}

struct VmRegion {
  std::uintptr_t base = 0;
  std::size_t length = 0;
  std::size_t page_size = kPageSize;

  bool contains(std::uintptr_t address) const noexcept {
    return address - base < length;
  }
  std::uintptr_t end() const noexcept { return base + length; }
};

struct VmStats {
  std::size_t committed_bytes = 0;
  std::uint64_t decommit_calls = 0;
  std::uint64_t reserve_calls = 0;
};

enum class ProviderKind { os, sim };

std::string_view to_string(ProviderKind kind) noexcept;
ProviderKind provider_kind_from_string(std::string_view name);

class ReservationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reserve / decommit / protect over virtual memory, plus page-level committed
// accounting. Reserved ranges read as zero until written.
class VirtualMemoryProvider {
 public:
  virtual ~VirtualMemoryProvider() = default;

  virtual ProviderKind kind() const noexcept = 0;

  // length must be a positive multiple of kVirtualSpanSize. Throws
  // ReservationError if the cap is exceeded or the OS refuses.
  virtual VmRegion reserve(std::size_t length) = 0;

  // Drops physical backing of [base, base + length). Page aligned, inside a
  // reserved region.
  virtual void decommit(std::uintptr_t base, std::size_t length) = 0;

  // Returns false when guard pages are unsupported by this provider; the
  // caller then disables the feature.
  virtual bool protect_guard(std::uintptr_t base, std::size_t length, bool enable) = 0;

  // Standalone page mappings for objects that do not fit a span.
  virtual void* map_pages(std::size_t length) = 0;
  virtual void unmap_pages(void* base, std::size_t length) = 0;

  // First-touch hook. Only the sim provider records anything.
  virtual void note_touch(std::uintptr_t base, std::size_t length) = 0;

  // Committed bytes inside [base, base + length).
  virtual std::size_t committed_in(std::uintptr_t base, std::size_t length) const = 0;

  virtual VmStats stats() const = 0;

  bool tracks_touch() const noexcept { return tracks_touch_; }

 protected:
  explicit VirtualMemoryProvider(bool tracks_touch) : tracks_touch_(tracks_touch) {}

 private:
  bool tracks_touch_;
};

// Real mappings. Decommit is MADV_DONTNEED; committed bytes are read from the
// process resident set.
class OsProvider final : public VirtualMemoryProvider {
 public:
  explicit OsProvider(std::size_t reservation_cap = kDefaultReservationCap);
  ~OsProvider() override;

  ProviderKind kind() const noexcept override { return ProviderKind::os; }
  VmRegion reserve(std::size_t length) override;
  void decommit(std::uintptr_t base, std::size_t length) override;
  bool protect_guard(std::uintptr_t base, std::size_t length, bool enable) override;
  void* map_pages(std::size_t length) override;
  void unmap_pages(void* base, std::size_t length) override;
  void note_touch(std::uintptr_t, std::size_t) override {}
  std::size_t committed_in(std::uintptr_t base, std::size_t length) const override;
  VmStats stats() const override;

 private:
  std::size_t cap_;
  std::mutex mutex_;
  std::vector<VmRegion> regions_;
  std::size_t reserved_ = 0;
  std::atomic<std::uint64_t> decommit_calls_{0};
  std::atomic<std::uint64_t> reserve_calls_{0};
};

// Deterministic accounting over real (lazily paged) mappings: a page counts as
// committed from the first note_touch until it is decommitted. Guard ranges
// are recorded and any touch landing in one aborts.
class SimProvider final : public VirtualMemoryProvider {
 public:
  explicit SimProvider(std::size_t reservation_cap = kDefaultReservationCap);
  ~SimProvider() override;

  ProviderKind kind() const noexcept override { return ProviderKind::sim; }
  VmRegion reserve(std::size_t length) override;
  void decommit(std::uintptr_t base, std::size_t length) override;
  bool protect_guard(std::uintptr_t base, std::size_t length, bool enable) override;
  void* map_pages(std::size_t length) override;
  void unmap_pages(void* base, std::size_t length) override;
  void note_touch(std::uintptr_t base, std::size_t length) override;
  std::size_t committed_in(std::uintptr_t base, std::size_t length) const override;
  VmStats stats() const override;

  bool is_guarded(std::uintptr_t base, std::size_t length) const;

 private:
  struct Region {
    VmRegion range;
    std::unique_ptr<std::atomic<std::uint64_t>[]> committed;
    std::unique_ptr<std::atomic<std::uint64_t>[]> guarded;
    std::size_t words = 0;
  };
  static constexpr std::size_t kMaxRegions = 16;

  Region* find(std::uintptr_t base, std::size_t length) const;

  std::size_t cap_;
  std::mutex mutex_;
  std::array<Region, kMaxRegions> regions_;
  std::atomic<std::size_t> region_count_{0};
  std::size_t reserved_ = 0;
  std::unordered_map<std::uintptr_t, std::size_t> standalone_;
  std::atomic<std::int64_t> committed_pages_{0};
  std::atomic<std::uint64_t> decommit_calls_{0};
  std::atomic<std::uint64_t> reserve_calls_{0};
};

std::unique_ptr<VirtualMemoryProvider> make_provider(
    ProviderKind kind, std::size_t reservation_cap = kDefaultReservationCap);

// Process resident set size in bytes, from /proc/self/statm.
std::size_t process_rss_bytes();

}  // namespace vspan
