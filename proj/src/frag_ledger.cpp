#include "vspan/frag_ledger.hpp"

namespace vspan {

const char* to_string(FragLedger::Case kind) noexcept {
  switch (kind) {
    case FragLedger::Case::alloc_new_span: return "alloc_new_span";
    case FragLedger::Case::alloc_usable: return "alloc_usable";
    case FragLedger::Case::free_last_block: return "free_last_block";
    case FragLedger::Case::free_regular: return "free_regular";
    case FragLedger::Case::span_reclaimed: return "span_reclaimed";
  }
  return "invalid";
}

std::int64_t FragLedger::record(Case kind, std::uint32_t size, std::uint64_t payload, std::int64_t delta) {
  std::lock_guard lock(mutex_);
  f_ += delta;
  if (keep_events_) events_.push_back(Event{kind, size, payload, f_});
  return f_;
}

std::int64_t FragLedger::on_alloc(bool fetched_new_span, std::uint32_t size, std::uint64_t payload) {
  const auto s = static_cast<std::int64_t>(size);
  const auto u = static_cast<std::int64_t>(payload);
  return fetched_new_span ? record(Case::alloc_new_span, size, payload, u - s)
                          : record(Case::alloc_usable, size, payload, -s);
}

std::int64_t FragLedger::on_free(bool last_block, std::uint32_t size, std::uint64_t payload) {
  const auto s = static_cast<std::int64_t>(size);
  const auto u = static_cast<std::int64_t>(payload);
  // The freed block itself was counted as used, so the span's contribution
  // just before the last free is u - size.
  return last_block ? record(Case::free_last_block, size, payload, -(u - s))
                    : record(Case::free_regular, size, payload, s);
}

std::int64_t FragLedger::on_reclaim(std::uint64_t payload) {
  return record(Case::span_reclaimed, 0, payload, -static_cast<std::int64_t>(payload));
}

std::int64_t FragLedger::f() const {
  std::lock_guard lock(mutex_);
  return f_;
}

std::vector<FragLedger::Event> FragLedger::events() const {
  std::lock_guard lock(mutex_);
  return events_;
}

void FragLedger::write_csv(std::ostream& out) const {
  std::lock_guard lock(mutex_);
  out << "op,size,payload,f\n";
  for (const Event& e : events_) {
    out << to_string(e.kind) << ',' << e.size << ',' << e.payload << ',' << e.f_after << '\n';
  }
}

}  // namespace vspan
