#include "vspan/arena.hpp"

namespace vspan {

Arena::Arena(VirtualMemoryProvider& provider, std::size_t length)
    : region_(provider.reserve(length)), capacity_(region_.length / kVirtualSpanSize) {}

}  // namespace vspan
