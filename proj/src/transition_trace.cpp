#include "vspan/transition_trace.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

namespace vspan {

std::vector<std::string> validate_trace(const std::vector<TransitionTrace::Record>& records) {
  std::vector<std::string> problems;
  std::unordered_map<std::uintptr_t, std::vector<TransitionTrace::Record>> by_span;
  for (const auto& r : records) {
    if (!is_legal_transition(r.from, r.to)) {
      std::ostringstream msg;
      msg << "illegal edge " << to_string(r.from) << "->" << to_string(r.to) << " on span 0x" << std::hex
          << r.span;
      problems.push_back(msg.str());
    }
    by_span[r.span].push_back(r);
  }
  for (auto& [span, chain] : by_span) {
    std::sort(chain.begin(), chain.end(), [](const auto& a, const auto& b) { return a.counter < b.counter; });
    // Spans enter the life cycle as (free, 0).
    if (chain.front().counter != 1 || chain.front().from != SpanState::free) {
      std::ostringstream msg;
      msg << "span 0x" << std::hex << span << std::dec << " starts at counter " << chain.front().counter
          << " in " << to_string(chain.front().from);
      problems.push_back(msg.str());
    }
    for (std::size_t i = 1; i < chain.size(); ++i) {
      const auto& prev = chain[i - 1];
      const auto& cur = chain[i];
      if (cur.counter != prev.counter + 1 || cur.from != prev.to) {
        std::ostringstream msg;
        msg << "broken chain on span 0x" << std::hex << span << std::dec << " at counter " << cur.counter
            << ": " << to_string(prev.to) << " then " << to_string(cur.from) << "->" << to_string(cur.to);
        problems.push_back(msg.str());
      }
    }
  }
  return problems;
}

}  // namespace vspan
