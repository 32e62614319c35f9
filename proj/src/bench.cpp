#include "vspan/bench.hpp"

#include <algorithm>
#include <barrier>
#include <bit>
#include <functional>
#include <latch>
#include <mutex>
#include <ostream>
#include <random>
#include <stdexcept>

namespace vspan::bench {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void touch(void* p) { static_cast<volatile char*>(p)[0] = 1; }

struct ThreadsResult {
  std::uint64_t ops = 0;
  double mean_thread_seconds = 0;
};

// Starts n threads together, each running body(index) -> ops. Every thread
// exits before this returns, so their LABs are terminated.
ThreadsResult run_threads(std::size_t n, const std::function<std::uint64_t(std::size_t)>& body) {
  std::latch start(static_cast<std::ptrdiff_t>(n));
  std::vector<std::uint64_t> ops(n, 0);
  std::vector<double> secs(n, 0);
  std::vector<std::thread> workers;
  workers.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    workers.emplace_back([&, t] {
      start.arrive_and_wait();
      const auto t0 = Clock::now();
      ops[t] = body(t);
      secs[t] = seconds_since(t0);
    });
  }
  for (auto& w : workers) w.join();
  ThreadsResult r;
  for (std::size_t t = 0; t < n; ++t) {
    r.ops += ops[t];
    r.mean_thread_seconds += secs[t];
  }
  r.mean_thread_seconds /= static_cast<double>(n);
  return r;
}

class SizeDraw {
 public:
  SizeDraw(std::size_t lo, std::size_t hi) : dist_(lo, hi) {}
  std::size_t operator()(std::mt19937_64& rng) { return dist_(rng); }

 private:
  std::uniform_int_distribution<std::size_t> dist_;
};

std::mt19937_64 thread_rng(const WorkloadConfig& c, std::size_t t) {
  std::seed_seq seq{c.seed, static_cast<std::uint64_t>(t), std::uint64_t{0x5eed}};
  return std::mt19937_64(seq);
}

void fill(RunReport& r, const ThreadsResult& t) {
  r.ops = t.ops;
  r.mean_thread_seconds = t.mean_thread_seconds;
}

// ---- workloads -------------------------------------------------------------

void threadtest(const WorkloadConfig& c, Allocator& a, MemorySampler&, RunReport& r) {
  fill(r, run_threads(c.threads, [&](std::size_t t) {
         auto rng = thread_rng(c, t);
         SizeDraw draw(c.min_size, c.max_size);
         std::vector<void*> objects(c.objects_per_round);
         for (std::size_t round = 0; round < c.rounds; ++round) {
           for (auto& p : objects) {
             p = a.alloc(draw(rng));
             touch(p);
           }
           for (void* p : objects) a.dealloc(p);
         }
         return std::uint64_t{2} * c.rounds * c.objects_per_round;
       }));
}

void shbench_like(const WorkloadConfig& c, Allocator& a, MemorySampler&, RunReport& r) {
  constexpr std::size_t kMaxLifetime = 4;
  fill(r, run_threads(c.threads, [&](std::size_t t) {
         auto rng = thread_rng(c, t);
         SizeDraw draw(c.min_size, c.max_size);
         std::uniform_int_distribution<std::size_t> lifetime(1, kMaxLifetime);
         std::vector<std::vector<void*>> due(kMaxLifetime + 1);
         std::uint64_t ops = 0;
         for (std::size_t round = 0; round < c.rounds; ++round) {
           auto& expired = due[round % due.size()];
           for (void* p : expired) a.dealloc(p);
           ops += expired.size();
           expired.clear();
           for (std::size_t i = 0; i < c.objects_per_round; ++i) {
             void* p = a.alloc(draw(rng));
             touch(p);
             due[(round + lifetime(rng)) % due.size()].push_back(p);
           }
           ops += c.objects_per_round;
         }
         for (auto& bucket : due) {
           for (void* p : bucket) a.dealloc(p);
           ops += bucket.size();
         }
         return ops;
       }));
}

void larson_like(const WorkloadConfig& c, Allocator& a, MemorySampler& sampler, RunReport& r) {
  const std::size_t n = c.threads;
  const std::size_t k = c.objects_per_round;
  std::vector<std::vector<void*>> sets(n, std::vector<void*>(k));
  std::uint64_t ops = 0;
  double thread_seconds = 0;

  // Every phase runs on fresh threads, so each hand-off orphans the spans of
  // the threads that just exited.
  auto setup = run_threads(n, [&](std::size_t t) {
    auto rng = thread_rng(c, t);
    SizeDraw draw(c.min_size, c.max_size);
    for (auto& p : sets[t]) {
      p = a.alloc(draw(rng));
      touch(p);
    }
    return std::uint64_t{k};
  });
  ops += setup.ops;
  thread_seconds += setup.mean_thread_seconds;

  for (std::size_t handoff = 0; handoff < c.rounds; ++handoff) {
    auto phase = run_threads(n, [&](std::size_t t) {
      auto rng = thread_rng(c, (handoff + 1) * n + t);
      SizeDraw draw(c.min_size, c.max_size);
      std::uniform_int_distribution<std::size_t> pick(0, k - 1);
      auto& set = sets[(t + handoff + 1) % n];
      const auto t0 = Clock::now();
      std::uint64_t ops = 0;
      for (;;) {
        for (std::size_t i = 0; i < 4 * k; ++i) {
          void*& slot = set[pick(rng)];
          a.dealloc(slot);
          slot = a.alloc(draw(rng));
          touch(slot);
        }
        ops += 8 * k;
        if (c.duration <= 0 || seconds_since(t0) >= c.duration) break;
      }
      return ops;
    });
    ops += phase.ops;
    thread_seconds += phase.mean_thread_seconds;
    sampler.sample();
  }

  auto teardown = run_threads(1, [&](std::size_t) {
    for (auto& set : sets) {
      for (void* p : set) a.dealloc(p);
    }
    return std::uint64_t{n * k};
  });
  r.ops = ops + teardown.ops;
  r.mean_thread_seconds = thread_seconds + teardown.mean_thread_seconds;
}

void prodcons(const WorkloadConfig& c, Allocator& a, MemorySampler& sampler, RunReport& r) {
  const std::size_t n = c.threads;
  const bool split = c.producers > 0;
  const std::size_t first_consumer = split ? c.producers : 0;
  // outbox[sender * n + receiver]
  std::vector<std::vector<void*>> outbox(n * n);
  std::vector<std::uint64_t> remote(n, 0), frees(n, 0);

  std::size_t phase = 0;
  auto on_phase = [&]() noexcept {
    if (phase++ % 2 == 0) {
      sampler.sample();
    } else {
      r.epoch_peaks.push_back(sampler.take_window());
    }
  };
  std::barrier sync(static_cast<std::ptrdiff_t>(n), on_phase);

  fill(r, run_threads(n, [&](std::size_t t) {
         auto rng = thread_rng(c, t);
         SizeDraw draw(c.min_size, c.max_size);
         std::uniform_int_distribution<std::size_t> receiver(first_consumer, n - 1);
         const bool produces = !split || t < c.producers;
         const bool consumes = !split || t >= c.producers;
         std::uint64_t ops = 0;
         for (std::size_t epoch = 0; epoch < c.rounds; ++epoch) {
           if (produces) {
             for (std::size_t i = 0; i < c.objects_per_round; ++i) {
               void* p = a.alloc(draw(rng));
               touch(p);
               outbox[t * n + receiver(rng)].push_back(p);
             }
             ops += c.objects_per_round;
           }
           sync.arrive_and_wait();
           if (consumes) {
             for (std::size_t s = 0; s < n; ++s) {
               auto& box = outbox[s * n + t];
               for (void* p : box) a.dealloc(p);
               ops += box.size();
               frees[t] += box.size();
               if (s != t) remote[t] += box.size();
               box.clear();
             }
           }
           sync.arrive_and_wait();
         }
         return ops;
       }));
  std::uint64_t total_remote = 0, total_frees = 0;
  for (std::size_t t = 0; t < n; ++t) {
    total_remote += remote[t];
    total_frees += frees[t];
  }
  r.remote_free_fraction = total_frees ? static_cast<double>(total_remote) / static_cast<double>(total_frees) : 0;
}

void sizesweep(const WorkloadConfig& c, Allocator& a, MemorySampler&, RunReport& r) {
  constexpr std::size_t kBytesPerStep = std::size_t{32} << 20;
  const int lo = std::bit_width(c.min_size) - 1;
  const int hi = std::max(lo, static_cast<int>(std::bit_width(c.max_size)) - 3);
  fill(r, run_threads(c.threads, [&](std::size_t t) {
         auto rng = thread_rng(c, t);
         std::uint64_t ops = 0;
         std::vector<void*> objects;
         for (int x = lo; x <= hi; ++x) {
           // Sizes in [2^x, 2^(x+2)).
           SizeDraw draw(std::size_t{1} << x, (std::size_t{4} << x) - 1);
           const std::size_t count =
               std::clamp<std::size_t>(kBytesPerStep / (std::size_t{4} << x) / c.threads, 1, c.objects_per_round);
           objects.resize(count);
           for (std::size_t round = 0; round < c.rounds; ++round) {
             for (auto& p : objects) {
               p = a.alloc(draw(rng));
               touch(p);
             }
             for (void* p : objects) a.dealloc(p);
             ops += 2 * count;
           }
         }
         return ops;
       }));
}

std::uintptr_t span_of(const void* p) {
  return reinterpret_cast<std::uintptr_t>(p) & ~(kVirtualSpanSize - 1);
}

void falseshare_active(const WorkloadConfig& c, Allocator& a, MemorySampler&, RunReport& r) {
  std::vector<std::vector<std::uintptr_t>> spans(c.threads);
  std::vector<std::vector<void*>> objects(c.threads);
  std::barrier sync(static_cast<std::ptrdiff_t>(c.threads));
  fill(r, run_threads(c.threads, [&](std::size_t t) {
         auto& mine = objects[t];
         // Allocate in lockstep so the threads' requests interleave.
         for (std::size_t i = 0; i < c.objects_per_round; ++i) {
           mine.push_back(a.alloc(c.min_size));
           sync.arrive_and_wait();
         }
         for (std::size_t round = 0; round < c.rounds; ++round) {
           for (void* p : mine) {
             auto* word = static_cast<volatile std::uint64_t*>(p);
             *word = *word + 1;
           }
         }
         for (void* p : mine) spans[t].push_back(span_of(p));
         for (void* p : mine) a.dealloc(p);
         return std::uint64_t{2} * c.objects_per_round + c.rounds * c.objects_per_round;
       }));
  std::vector<std::pair<std::uintptr_t, std::size_t>> all;
  for (std::size_t t = 0; t < c.threads; ++t) {
    std::sort(spans[t].begin(), spans[t].end());
    spans[t].erase(std::unique(spans[t].begin(), spans[t].end()), spans[t].end());
    for (auto s : spans[t]) all.emplace_back(s, t);
  }
  std::sort(all.begin(), all.end());
  std::size_t shared = 0;
  for (std::size_t i = 1; i < all.size(); ++i) {
    if (all[i].first == all[i - 1].first && (i < 2 || all[i - 2].first != all[i].first)) ++shared;
  }
  r.extra = static_cast<double>(shared);
}

void falseshare_passive(const WorkloadConfig& c, Allocator& a, MemorySampler&, RunReport& r) {
  std::vector<void*> handed(c.threads);
  for (auto& p : handed) p = a.alloc(c.min_size);
  std::atomic<std::size_t> recycled{0};
  fill(r, run_threads(c.threads, [&](std::size_t t) {
         void* old = handed[t];
         const std::uintptr_t old_span = span_of(old);
         a.dealloc(old);
         void* fresh = a.alloc(c.min_size);
         if (fresh == old || span_of(fresh) == old_span) recycled.fetch_add(1);
         for (std::size_t round = 0; round < c.rounds * c.objects_per_round; ++round) {
           auto* word = static_cast<volatile std::uint64_t*>(fresh);
           *word = *word + 1;
         }
         a.dealloc(fresh);
         return std::uint64_t{3} + c.rounds * c.objects_per_round;
       }));
  r.ops += c.threads;
  r.extra = static_cast<double>(recycled.load());
}

struct Node {
  Node* left;
  Node* right;
  std::uint64_t key;
  std::uint64_t value;
};

void locality(const WorkloadConfig& c, Allocator& a, MemorySampler&, RunReport& r) {
  const std::size_t node_size = std::max(c.min_size, sizeof(Node));
  std::vector<double> ratio(c.threads, 0);
  fill(r, run_threads(c.threads, [&](std::size_t t) {
         auto rng = thread_rng(c, t);
         const std::size_t n = c.objects_per_round;
         auto make = [&](std::uint64_t key) {
           auto* node = static_cast<Node*>(a.alloc(node_size));
           *node = Node{nullptr, nullptr, key, key};
           return node;
         };

         // List in allocation order, walked front to back.
         Node* head = nullptr;
         Node* tail = nullptr;
         for (std::size_t i = 0; i < n; ++i) {
           Node* node = make(i);
           (tail ? tail->right : head) = node;
           tail = node;
         }
         volatile std::uint64_t sink = 0;
         auto t0 = Clock::now();
         for (std::size_t round = 0; round < c.rounds; ++round) {
           for (Node* p = head; p; p = p->right) sink = sink + p->value;
         }
         const double list_time = seconds_since(t0);

         // Unbalanced search tree over random keys, walked in key order.
         Node* root = nullptr;
         for (std::size_t i = 0; i < n; ++i) {
           Node* node = make(rng());
           Node** link = &root;
           while (*link) link = node->key < (*link)->key ? &(*link)->left : &(*link)->right;
           *link = node;
         }
         std::vector<Node*> stack;
         t0 = Clock::now();
         for (std::size_t round = 0; round < c.rounds; ++round) {
           Node* p = root;
           while (p || !stack.empty()) {
             for (; p; p = p->left) stack.push_back(p);
             p = stack.back();
             stack.pop_back();
             sink = sink + p->value;
             p = p->right;
           }
         }
         const double tree_time = seconds_since(t0);
         ratio[t] = list_time > 0 ? tree_time / list_time : 0;

         for (Node* p = head; p;) {
           Node* next = p->right;
           a.dealloc(p);
           p = next;
         }
         if (root) stack.push_back(root);
         while (!stack.empty()) {
           Node* p = stack.back();
           stack.pop_back();
           if (p->left) stack.push_back(p->left);
           if (p->right) stack.push_back(p->right);
           a.dealloc(p);
         }
         return std::uint64_t{4} * n;
       }));
  double sum = 0;
  for (double v : ratio) sum += v;
  r.extra = sum / static_cast<double>(c.threads);
}

}  // namespace

// ---- config ----------------------------------------------------------------

void WorkloadConfig::validate() const {
  const auto& names = workload_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw std::invalid_argument("unknown workload: " + name);
  }
  if (threads == 0) throw std::invalid_argument("threads must be at least 1");
  if (min_size > max_size && max_size != 0) throw std::invalid_argument("min size exceeds max size");
  if (name == "prodcons" && producers >= threads && producers != 0) {
    throw std::invalid_argument("prodcons needs at least one consumer");
  }
  if (duration < 0) throw std::invalid_argument("duration must be non-negative");
}

WorkloadConfig WorkloadConfig::resolved() const {
  struct Defaults {
    std::size_t objects, min_size, max_size;
  };
  Defaults d{1000, 64, 64};
  if (name == "threadtest") d = {100000 / threads, 64, 64};
  if (name == "shbench_like") d = {1000, 1, 8};
  if (name == "larson_like") d = {1000, 16, 1024};
  if (name == "prodcons") d = {10000, 64, 64};
  if (name == "sizesweep") d = {1000, 16, std::size_t{1} << 22};
  if (name == "falseshare_active" || name == "falseshare_passive") d = {100, 8, 8};
  if (name == "locality") d = {100000, 32, 32};
  WorkloadConfig c = *this;
  if (c.objects_per_round == 0) c.objects_per_round = std::max<std::size_t>(d.objects, 1);
  if (c.min_size == 0 && c.max_size == 0) {
    c.min_size = d.min_size;
    c.max_size = d.max_size;
  } else if (c.max_size == 0) {
    c.max_size = c.min_size;
  } else if (c.min_size == 0) {
    c.min_size = std::min<std::size_t>(1, c.max_size);
  }
  return c;
}

AblationFlags AblationFlags::parse(std::string_view text) {
  AblationFlags flags;
  while (!text.empty()) {
    const std::size_t comma = text.find(',');
    const std::string_view item = text.substr(0, comma);
    if (item == "no_decommit") {
      flags.no_decommit = true;
    } else if (item == "pool_width_1") {
      flags.pool_width_1 = true;
    } else if (item == "lazy_reclaim") {
      flags.lazy_reclaim = true;
    } else if (!item.empty() && item != "none") {
      throw std::invalid_argument("unknown ablation flag: " + std::string(item));
    }
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return flags;
}

std::string AblationFlags::to_string() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(no_decommit, "no_decommit");
  add(pool_width_1, "pool_width_1");
  add(lazy_reclaim, "lazy_reclaim");
  return out.empty() ? "none" : out;
}

AllocatorConfig ablate(AllocatorConfig base, AblationFlags flags) {
  if (flags.no_decommit) base.decommit = false;
  if (flags.pool_width_1) base.pool_width = 1;
  if (flags.lazy_reclaim) base.lazy_reclaim = true;
  return base;
}

// ---- sampler ---------------------------------------------------------------

MemorySampler::MemorySampler(VirtualMemoryProvider& provider, std::chrono::milliseconds period)
    : provider_(provider) {
  const std::size_t initial = read();
  peak_.store(initial);
  window_.store(initial);
  thread_ = std::thread([this, period] {
    while (!stop_.load(std::memory_order_relaxed)) {
      sample();
      std::this_thread::sleep_for(period);
    }
  });
}

MemorySampler::~MemorySampler() {
  stop_.store(true);
  thread_.join();
}

std::size_t MemorySampler::read() const {
  return provider_.kind() == ProviderKind::sim ? provider_.stats().committed_bytes : process_rss_bytes();
}

std::size_t MemorySampler::sample() {
  const std::size_t value = read();
  fold(value);
  return value;
}

std::size_t MemorySampler::take_window() {
  const std::size_t now = sample();
  return window_.exchange(now);
}

void MemorySampler::fold(std::size_t value) noexcept {
  for (auto* target : {&peak_, &window_}) {
    std::size_t seen = target->load(std::memory_order_relaxed);
    while (value > seen && !target->compare_exchange_weak(seen, value, std::memory_order_relaxed)) {
    }
  }
}

// ---- driver ----------------------------------------------------------------

RunReport run(const WorkloadConfig& raw, Allocator& allocator) {
  raw.validate();
  const WorkloadConfig c = raw.resolved();
  RunReport r;
  r.workload = c.name;
  r.threads = c.threads;
  MemorySampler sampler(allocator.provider());
  r.baseline_committed_bytes = sampler.read();

  using Fn = void (*)(const WorkloadConfig&, Allocator&, MemorySampler&, RunReport&);
  static const std::pair<const char*, Fn> table[] = {
      {"threadtest", threadtest},
      {"shbench_like", shbench_like},
      {"larson_like", larson_like},
      {"prodcons", prodcons},
      {"sizesweep", sizesweep},
      {"falseshare_active", falseshare_active},
      {"falseshare_passive", falseshare_passive},
      {"locality", locality},
  };
  const auto t0 = Clock::now();
  for (const auto& [name, fn] : table) {
    if (c.name == name) fn(c, allocator, sampler, r);
  }
  r.seconds = seconds_since(t0);
  r.final_committed_bytes = sampler.sample();
  r.peak_committed_bytes = sampler.peak();
  r.ops_per_second = r.seconds > 0 ? static_cast<double>(r.ops) / r.seconds : 0;
  return r;
}

void write_csv_header(std::ostream& out) {
  out << "workload,threads,rounds,objects_per_round,min_size,max_size,seed,provider,pool_width,"
         "reuse_percent,ablate,ops,seconds,ops_per_second,mean_thread_seconds,baseline_committed_bytes,"
         "peak_committed_bytes,final_committed_bytes,remote_free_fraction,extra\n";
}

void write_csv_row(std::ostream& out, const WorkloadConfig& raw, const AllocatorConfig& a,
                   std::string_view ablation, const RunReport& r) {
  const WorkloadConfig c = raw.resolved();
  out << c.name << ',' << c.threads << ',' << c.rounds << ',' << c.objects_per_round << ',' << c.min_size << ','
      << c.max_size << ',' << c.seed << ',' << to_string(a.provider) << ','
      << (a.pool_width == 0 ? hardware_threads() : a.pool_width) << ',' << a.reuse_percent << ',' << ablation
      << ',' << r.ops << ',' << r.seconds << ',' << r.ops_per_second << ',' << r.mean_thread_seconds << ','
      << r.baseline_committed_bytes << ',' << r.peak_committed_bytes << ',' << r.final_committed_bytes << ','
      << r.remote_free_fraction << ',' << r.extra << '\n';
}

}  // namespace vspan::bench
