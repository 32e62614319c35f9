#pragma once

#include <cstddef>
#include <cstdint>
#include <mutex>
#include <ostream>
#include <vector>

namespace vspan {

// Running span-internal fragmentation f: free payload bytes held by spans that
// are not in the span pool. Updated on every allocation and deallocation.
class FragLedger {
 public:
  enum class Case : std::uint8_t {
    alloc_new_span,   // no hot or reusable span: f += u - size
    alloc_usable,     // f -= size
    free_last_block,  // span returned to the pool: f -= u - size
    free_regular,     // f += size
    span_reclaimed,   // an already-empty span left the frontend: f -= u
  };

  struct Event {
    Case kind;
    std::uint32_t size;
    std::uint64_t payload;
    std::int64_t f_after;
  };

  explicit FragLedger(bool keep_events = false) : keep_events_(keep_events) {}

  std::int64_t on_alloc(bool fetched_new_span, std::uint32_t size, std::uint64_t payload);
  std::int64_t on_free(bool last_block, std::uint32_t size, std::uint64_t payload);
  std::int64_t on_reclaim(std::uint64_t payload);

  std::int64_t f() const;
  std::vector<Event> events() const;

  // op,size,payload,f
  void write_csv(std::ostream& out) const;

 private:
  std::int64_t record(Case kind, std::uint32_t size, std::uint64_t payload, std::int64_t delta);

  mutable std::mutex mutex_;
  std::int64_t f_ = 0;
  bool keep_events_;
  std::vector<Event> events_;
};

const char* to_string(FragLedger::Case kind) noexcept;

}  // namespace vspan
