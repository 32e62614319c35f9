#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "vspan/allocator.hpp"

namespace vspan::bench {

inline const std::vector<std::string>& workload_names() {
  static const std::vector<std::string> names = {"threadtest",        "shbench_like",       "larson_like",
                                                  "prodcons",          "sizesweep",          "falseshare_active",
                                                  "falseshare_passive", "locality"};
  return names;
}

struct WorkloadConfig {
  std::string name = "threadtest";
  std::size_t threads = 1;
  std::size_t rounds = 100;
  std::size_t objects_per_round = 0;  // 0: workload default
  std::size_t min_size = 0;            // 0: workload default
  std::size_t max_size = 0;
  // prodcons: threads that only allocate; the rest only free. 0 means every
  // thread does both and frees go to a uniformly random thread.
  std::size_t producers = 0;
  double duration = 0;  // larson_like: seconds per hand-off, 0 = op count only
  std::uint64_t seed = 1;

  // Throws std::invalid_argument.
  void validate() const;

  // Copy with every zero field replaced by the workload's default.
  WorkloadConfig resolved() const;
};

struct AblationFlags {
  bool no_decommit = false;
  bool pool_width_1 = false;
  bool lazy_reclaim = false;

  // Comma separated subset of {no_decommit, pool_width_1, lazy_reclaim};
  // empty or "none" for the default configuration.
  static AblationFlags parse(std::string_view text);
  std::string to_string() const;
};

AllocatorConfig ablate(AllocatorConfig base, AblationFlags flags);

struct RunReport {
  std::string workload;
  std::size_t threads = 0;
  std::uint64_t ops = 0;
  double seconds = 0;
  double ops_per_second = 0;
  double mean_thread_seconds = 0;
  std::size_t baseline_committed_bytes = 0;
  std::size_t peak_committed_bytes = 0;
  std::size_t final_committed_bytes = 0;
  double remote_free_fraction = 0;
  // Workload specific: shared spans (falseshare_active), recycled remote
  // blocks (falseshare_passive), tree/list time ratio (locality).
  double extra = 0;
  // prodcons: peak committed bytes per epoch.
  std::vector<std::size_t> epoch_peaks;
};

// Committed bytes from the sim provider, or process RSS otherwise, sampled
// every period on a background thread and on demand.
class MemorySampler {
 public:
  explicit MemorySampler(VirtualMemoryProvider& provider,
                         std::chrono::milliseconds period = std::chrono::milliseconds(10));
  ~MemorySampler();

  MemorySampler(const MemorySampler&) = delete;
  MemorySampler& operator=(const MemorySampler&) = delete;

  std::size_t read() const;
  std::size_t sample();
  std::size_t peak() const noexcept { return peak_.load(std::memory_order_relaxed); }
  // Peak since the previous call; the new window starts at the current value.
  std::size_t take_window();

 private:
  void fold(std::size_t value) noexcept;

  VirtualMemoryProvider& provider_;
  std::atomic<std::size_t> peak_{0};
  std::atomic<std::size_t> window_{0};
  std::atomic<bool> stop_{false};
  std::thread thread_;
};

RunReport run(const WorkloadConfig& config, Allocator& allocator);

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const WorkloadConfig& config, const AllocatorConfig& allocator,
                   std::string_view ablation, const RunReport& report);

}  // namespace vspan::bench
