#ifndef VSPAN_VSPAN_H_
#define VSPAN_VSPAN_H_

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

// Thin C entry points over the process-wide default allocator.
void* vspan_malloc(size_t size);
void vspan_free(void* pointer);
void* vspan_calloc(size_t count, size_t size);
void* vspan_realloc(void* pointer, size_t size);
void* vspan_aligned_alloc(size_t alignment, size_t size);
size_t vspan_usable_size(const void* pointer);

#ifdef __cplusplus
}
#endif

#endif  // VSPAN_VSPAN_H_
