#include "vspan/frontend.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <unordered_map>

namespace vspan {
namespace {

std::mutex& live_mutex() {
  static std::mutex mutex;
  return mutex;
}

// Leaked so thread-exit hooks running after static destruction stay valid.
std::unordered_map<std::uint64_t, Frontend*>& live_frontends() {
  static auto* map = new std::unordered_map<std::uint64_t, Frontend*>();
  return *map;
}

std::atomic<std::uint64_t> next_instance_id{1};
std::atomic<std::size_t> next_thread_index{0};

struct Slot {
  std::uint64_t instance = 0;
  Frontend* frontend = nullptr;
  ThreadContext ctx;
};

// Per-thread attachments; the destructor is the thread-exit hook.
struct ThreadSlots {
  std::vector<Slot> slots;

  ~ThreadSlots() {
    std::lock_guard lock(live_mutex());
    for (const Slot& slot : slots) {
      if (live_frontends().count(slot.instance)) slot.frontend->detach(slot.ctx.lab_index);
    }
    slots.clear();
  }

  void prune_dead() {
    std::lock_guard lock(live_mutex());
    std::erase_if(slots, [](const Slot& s) { return live_frontends().count(s.instance) == 0; });
  }
};

thread_local ThreadSlots thread_slots;

[[noreturn]] void fatal(const char* message) {
  std::fprintf(stderr, "vspan: %s\n", message);
  std::abort();
}

}  // namespace

std::size_t current_thread_index() noexcept {
  thread_local const std::size_t index = next_thread_index.fetch_add(1, std::memory_order_relaxed);
  return index;
}

Frontend::Frontend(Arena& arena, SpanPool& pool, VirtualMemoryProvider& provider, FrontendConfig config,
                   Instrumentation instrumentation)
    : arena_(arena),
      pool_(pool),
      provider_(provider),
      config_(config),
      instrumentation_(instrumentation),
      instance_id_(next_instance_id.fetch_add(1)),
      guards_enabled_(config.guard_pages) {
  if (config_.reuse_percent > 100) throw std::invalid_argument("reuse percent must be within [0, 100]");
  if (config_.max_labs == 0 || config_.max_labs > Owner::kRefMask) {
    throw std::invalid_argument("invalid LAB table size");
  }
  if (config_.mode == LabMode::clab) {
    if (config_.clab_count == 0) throw std::invalid_argument("CLAB mode needs at least one LAB");
    config_.max_labs = std::max(config_.max_labs, config_.clab_count);
  }
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    reuse_threshold_[i] = kSizeClasses[i].blocks_per_span * config_.reuse_percent / 100;
  }
  labs_ = std::make_unique<Lab[]>(config_.max_labs);
  free_labs_.reserve(config_.max_labs);
  for (std::size_t i = config_.max_labs; i-- > 0;) free_labs_.push_back(static_cast<std::uint32_t>(i));
  std::lock_guard lock(live_mutex());
  live_frontends().emplace(instance_id_, this);
}

Frontend::~Frontend() {
  std::lock_guard lock(live_mutex());
  live_frontends().erase(instance_id_);
}

// ---- thread registration ---------------------------------------------------

ThreadContext& Frontend::context() {
  auto& slots = thread_slots.slots;
  if (!slots.empty() && slots.front().instance == instance_id_) return slots.front().ctx;
  auto it = std::find_if(slots.begin(), slots.end(), [&](const Slot& s) { return s.instance == instance_id_; });
  if (it != slots.end()) {
    std::iter_swap(slots.begin(), it);
    return slots.front().ctx;
  }
  thread_slots.prune_dead();
  Slot slot;
  slot.instance = instance_id_;
  slot.frontend = this;
  slot.ctx.thread_index = current_thread_index();
  slot.ctx.lab_index = attach(slot.ctx.thread_index);
  slot.ctx.lab = &labs_[slot.ctx.lab_index];
  slots.insert(slots.begin(), slot);
  return slots.front().ctx;
}

void Frontend::detach_current_thread() {
  auto& slots = thread_slots.slots;
  auto it = std::find_if(slots.begin(), slots.end(), [&](const Slot& s) { return s.instance == instance_id_; });
  if (it == slots.end()) return;
  const std::uint32_t index = it->ctx.lab_index;
  slots.erase(it);
  detach(index);
}

std::uint32_t Frontend::attach(std::size_t thread_index) {
  std::lock_guard lock(registry_mutex_);
  if (config_.mode == LabMode::clab) {
    const auto index = static_cast<std::uint32_t>(thread_index % config_.clab_count);
    Lab& lab = labs_[index];
    if (lab.attached++ == 0) lab_init(lab, index);
    return index;
  }
  if (free_labs_.empty()) fatal("LAB table exhausted");
  const std::uint32_t index = free_labs_.back();
  free_labs_.pop_back();
  Lab& lab = labs_[index];
  lab.attached = 1;
  lab_init(lab, index);
  return index;
}

void Frontend::detach(std::uint32_t lab_index) {
  std::lock_guard lock(registry_mutex_);
  Lab& lab = labs_[lab_index];
  if (lab.attached == 0 || --lab.attached > 0) return;
  lab_terminate(lab);
  if (config_.mode == LabMode::tlab) free_labs_.push_back(lab_index);
}

void Frontend::lab_init(Lab& lab, std::uint32_t index) {
  if (lab.generation == 0) ++labs_used_;
  // Generation 0 is never handed out so a zeroed owner word is never valid.
  lab.generation = static_cast<std::uint16_t>(lab.generation == 0xFFFF ? 1 : lab.generation + 1);
  const Owner owner = Owner::make(lab.generation, index);
  for (auto& set : lab.reusable) set.open(owner);
  {
    std::lock_guard lock(lab.pending_latch);
    lab.pending_gate = owner;
  }
  lab.owner.store(owner.word, std::memory_order_release);
}

void Frontend::lab_terminate(Lab& lab) {
  ThreadContext ctx;
  ctx.lab = &lab;
  ctx.thread_index = current_thread_index();
  for (std::size_t sc = 0; sc < kNumClasses; ++sc) {
    const auto id = static_cast<ClassId>(sc);
    lab.reusable[sc].close();
    if (Span hot = lab.hot[sc]) {
      lab.hot[sc] = Span();
      if (transition(hot, hot.epoch(), SpanState::floating)) {
        if (settle(hot, Owner::terminated(), ctx, false) && instrumentation_.ledger) {
          instrumentation_.ledger->on_reclaim(std::uint64_t{kSizeClasses[id].blocks_per_span} *
                                              kSizeClasses[id].block_size);
        }
      }
    }
    while (auto taken = lab.reusable[sc].take()) {
      if (taken->epoch.state() != SpanState::reusable) continue;
      if (transition(taken->span, taken->epoch, SpanState::floating)) {
        if (settle(taken->span, Owner::terminated(), ctx, false) && instrumentation_.ledger) {
          instrumentation_.ledger->on_reclaim(std::uint64_t{kSizeClasses[id].blocks_per_span} *
                                              kSizeClasses[id].block_size);
        }
      }
    }
  }
  SpanHeader* pending = nullptr;
  {
    std::lock_guard lock(lab.pending_latch);
    lab.pending_gate = Owner::terminated();
    pending = lab.pending_head;
    lab.pending_head = nullptr;
    lab.pending_count = 0;
  }
  while (pending != nullptr) {
    SpanHeader* next = reinterpret_cast<SpanHeader*>(pending->link.load(std::memory_order_relaxed));
    pool_.put(Span(pending), ctx.thread_index);
    pending = next;
  }
  lab.owner.store(Owner::kTerminatedWord, std::memory_order_release);
}

std::size_t Frontend::labs_used() const {
  std::lock_guard lock(registry_mutex_);
  return labs_used_;
}

std::size_t Frontend::pending_spans_quiescent() const {
  std::size_t total = 0;
  for (std::size_t i = 0; i < config_.max_labs; ++i) total += labs_[i].pending_count;
  return total;
}

Lab* Frontend::lab_for(Owner owner) noexcept {
  if (owner.is_terminated() || owner.lab_ref() >= config_.max_labs) return nullptr;
  return &labs_[owner.lab_ref()];
}

bool Frontend::is_orphan(Owner owner) const noexcept {
  if (owner.is_terminated() || owner.lab_ref() >= config_.max_labs) return true;
  return labs_[owner.lab_ref()].current_owner() != owner;
}

// ---- span life cycle -------------------------------------------------------

std::optional<Epoch> Frontend::transition(Span span, Epoch observed, SpanState target) {
  auto installed = span.try_transition(observed, target);
#ifdef VSPAN_LEDGER
  if (installed && instrumentation_.trace) {
    instrumentation_.trace->record(span.base(), observed.state(), target, installed->counter());
  }
#endif
  return installed;
}

void Frontend::prepare_span(Span span, ClassId id, Owner owner) {
  const SizeClass& g = kSizeClasses[id];
  if (guards_enabled_.load(std::memory_order_relaxed)) {
    const bool ok = provider_.protect_guard(span.base(), g.real_span_size, false) &&
                    provider_.protect_guard(span.base() + g.real_span_size,
                                            kVirtualSpanSize - g.real_span_size, true);
    if (!ok && guards_enabled_.exchange(false)) {
      std::fprintf(stderr, "vspan: guard pages unsupported by provider, disabled\n");
      provider_.protect_guard(span.base(), kVirtualSpanSize, false);
    }
  }
  span.init_for_class(id, owner);
  if (provider_.tracks_touch()) provider_.note_touch(span.base(), g.header_size);
}

Frontend::Fetched Frontend::get_span(ThreadContext& ctx, ClassId id) {
  Lab& lab = *ctx.lab;
  if (config_.lazy_reclaim) flush_pending(lab, ctx);
  while (auto taken = lab.reusable[id].take()) {
    ++ctx.last_span_fetches;
    if (taken->epoch.state() != SpanState::reusable) continue;
    if (transition(taken->span, taken->epoch, SpanState::hot)) return {taken->span, false};
  }
  ++ctx.last_span_fetches;
  const SpanPool::GetResult got = pool_.get(id, ctx.thread_index);
  if (!got.span) return {};
  prepare_span(got.span, id, lab.current_owner());
  // Nobody else can reach a span that just left the pool.
  if (!transition(got.span, got.span.epoch(), SpanState::hot)) fatal("free->hot transition lost a race");
  return {got.span, true};
}

bool Frontend::settle(Span span, Owner set_owner, ThreadContext& ctx, bool promote) {
  const SizeClass& g = span.geometry();
  const std::uint32_t threshold = reuse_threshold_[span.size_class()];
  Epoch observed = span.epoch();
  if (promote && observed.state() == SpanState::floating && span.free_blocks() > threshold) {
    if (auto installed = transition(span, observed, SpanState::reusable)) {
      observed = *installed;
      if (Lab* owner_lab = lab_for(set_owner)) {
        owner_lab->reusable[span.size_class()].put(set_owner, span, *installed);
      }
    }
  }
  // Reading the epoch before the counts makes the emptiness check sound: if
  // the CAS below succeeds the span was not hot in between, so the counts
  // only grew.
  for (;;) {
    const SpanState state = observed.state();
    if (state != SpanState::floating && state != SpanState::reusable) return false;
    if (span.free_blocks() != g.blocks_per_span) return false;
    if (transition(span, observed, SpanState::free)) {
      const void* membership = span.header()->set_membership.load(std::memory_order_seq_cst);
      if (membership != nullptr) static_cast<ReusableSet*>(const_cast<void*>(membership))->remove(span);
      reclaim(span, set_owner, ctx);
      return true;
    }
    observed = span.epoch();
  }
}

void Frontend::reclaim(Span span, Owner, ThreadContext& ctx) {
#ifdef VSPAN_CHECKS
  if (span.epoch().state() != SpanState::free) fatal("span pool put without a preceding ->free transition");
#endif
  if (config_.lazy_reclaim) {
    const Owner owner = span.owner();
    if (Lab* lab = lab_for(owner)) {
      std::unique_lock lock(lab->pending_latch);
      if (lab->pending_gate == owner) {
        span.header()->link.store(reinterpret_cast<std::uint64_t>(lab->pending_head), std::memory_order_relaxed);
        lab->pending_head = span.header();
        ++lab->pending_count;
        return;
      }
    }
  }
  pool_.put(span, ctx.thread_index);
}

void Frontend::flush_pending(Lab& lab, ThreadContext& ctx) {
  SpanHeader* pending = nullptr;
  {
    std::lock_guard lock(lab.pending_latch);
    pending = lab.pending_head;
    lab.pending_head = nullptr;
    lab.pending_count = 0;
  }
  while (pending != nullptr) {
    SpanHeader* next = reinterpret_cast<SpanHeader*>(pending->link.load(std::memory_order_relaxed));
    pool_.put(Span(pending), ctx.thread_index);
    pending = next;
  }
}

// ---- allocation ------------------------------------------------------------

void* Frontend::allocate(ClassId id) {
  ThreadContext& ctx = context();
  Lab& lab = *ctx.lab;
  std::unique_lock<SpinLatch> latch;
  if (config_.mode == LabMode::clab) latch = std::unique_lock(lab.class_latch[id]);

  ctx.last_span_fetches = 0;
  bool fetched_new = false;
  // A span back from a reusable set may hold all its free blocks on the
  // remote list.
  auto first_block = [](Span span) {
    void* block = span.alloc_block();
    if (block == nullptr && span.drain_remotes(0) > 0) block = span.alloc_block();
    return block;
  };
  Span hot = lab.hot[id];
  void* block = nullptr;
  if (!hot) {
    const Fetched fetched = get_span(ctx, id);
    if (!fetched.span) return nullptr;
    hot = fetched.span;
    fetched_new = fetched.from_pool;
    lab.hot[id] = hot;
    block = first_block(hot);
  } else {
    block = hot.alloc_block();
  }
  if (block == nullptr) {
    if (hot.drain_remotes(reuse_threshold_[id]) > 0) {
      block = hot.alloc_block();
    } else {
      lab.hot[id] = Span();
      if (!transition(hot, hot.epoch(), SpanState::floating)) fatal("hot->floating transition lost a race");
      const SizeClass& g = kSizeClasses[id];
      if (settle(hot, lab.current_owner(), ctx) && instrumentation_.ledger) {
        instrumentation_.ledger->on_reclaim(std::uint64_t{g.blocks_per_span} * g.block_size);
      }
      const Fetched fetched = get_span(ctx, id);
      if (!fetched.span) return nullptr;
      hot = fetched.span;
      fetched_new = fetched.from_pool;
      lab.hot[id] = hot;
      block = first_block(hot);
    }
  }
  const SizeClass& g = kSizeClasses[id];
  if (provider_.tracks_touch()) provider_.note_touch(reinterpret_cast<std::uintptr_t>(block), g.block_size);
#ifdef VSPAN_LEDGER
  if (instrumentation_.ledger) {
    instrumentation_.ledger->on_alloc(fetched_new, g.block_size, std::uint64_t{g.blocks_per_span} * g.block_size);
  }
#endif
  return block;
}

void Frontend::deallocate(void* block) {
  ThreadContext& ctx = context();
  const Owner mine = ctx.lab->current_owner();
  Span span(arena_.owning_span_base(reinterpret_cast<std::uintptr_t>(block)));
  const SizeClass& g = span.geometry();

  const Owner old_owner = span.owner();
  if (config_.mode == LabMode::tlab && old_owner == mine) {
    span.free_local(block);
  } else {
    span.free_remote(block);
  }
  Owner set_owner = old_owner;
  const Owner current = span.owner();
  if (is_orphan(current) && span.try_adopt(current, mine)) set_owner = mine;

  const bool reclaimed = settle(span, set_owner, ctx);
#ifdef VSPAN_LEDGER
  if (instrumentation_.ledger) {
    instrumentation_.ledger->on_free(reclaimed, g.block_size, std::uint64_t{g.blocks_per_span} * g.block_size);
  }
#else
  (void)reclaimed;
#endif
}

}  // namespace vspan
