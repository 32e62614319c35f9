#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include "vspan/span.hpp"

namespace vspan {

// Log of successful span state transitions.
class TransitionTrace {
 public:
  struct Record {
    std::uintptr_t span;
    SpanState from;
    SpanState to;
    std::uint64_t counter;  // counter of the installed epoch
  };

  void record(std::uintptr_t span, SpanState from, SpanState to, std::uint64_t counter) {
    std::lock_guard lock(mutex_);
    records_.push_back(Record{span, from, to, counter});
  }

  std::vector<Record> snapshot() const {
    std::lock_guard lock(mutex_);
    return records_;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::vector<Record> records_;
};

// Checks a trace against the life cycle: every edge legal, and per span the
// counters form a gap-free chain where each transition starts in the state the
// previous one ended in. Returns one message per violation.
std::vector<std::string> validate_trace(const std::vector<TransitionTrace::Record>& records);

}  // namespace vspan
