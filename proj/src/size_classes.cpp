#include "vspan/size_classes.hpp"

#include <cstdio>
#include <cstdlib>

namespace vspan {

std::size_t real_span_index_for_size(std::size_t real_span_size) {
  for (std::size_t i = 0; i < kRealSpanSizes.size(); ++i) {
    if (kRealSpanSizes[i] == real_span_size) return i;
  }
  std::fprintf(stderr, "vspan: unknown real-span size %zu\n", real_span_size);
  std::abort();
}

void write_size_class_csv(std::ostream& out) {
  out << "class,block_size,real_span_size,header_size,blocks_per_span,real_span_index\n";
  for (std::size_t i = 0; i < kSizeClasses.size(); ++i) {
    const SizeClass& c = kSizeClasses[i];
    out << i << ',' << c.block_size << ',' << c.real_span_size << ',' << c.header_size << ','
        << c.blocks_per_span << ',' << c.real_span_index << '\n';
  }
}

}  // namespace vspan
