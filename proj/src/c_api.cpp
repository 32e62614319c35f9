#include "vspan/vspan.h"

#include "vspan/allocator.hpp"

extern "C" {

void* vspan_malloc(size_t size) { return vspan::default_allocator().alloc(size); }

void vspan_free(void* pointer) {
  if (pointer != nullptr) vspan::default_allocator().dealloc(pointer);
}

void* vspan_calloc(size_t count, size_t size) { return vspan::default_allocator().calloc(count, size); }

void* vspan_realloc(void* pointer, size_t size) { return vspan::default_allocator().realloc(pointer, size); }

void* vspan_aligned_alloc(size_t alignment, size_t size) {
  return vspan::default_allocator().aligned_alloc(alignment, size);
}

size_t vspan_usable_size(const void* pointer) { return vspan::default_allocator().usable_size(pointer); }

}
