#include "skelrt/engine.hpp"

#include <algorithm>
#include <exception>
#include <latch>

#include "skelrt/error.hpp"

namespace skelrt {

FrameworkConfig materialize(const Fleet& fleet, const Sct& sct, const PlatformConfig& platform, const Split& split) {
  FrameworkConfig c;
  c.platform = platform;
  if (!fleet.cpu) {
    c.platform.fission = FissionLevel::NoFission;
  } else {
    auto levels = cpu_get_configurations(*fleet.cpu);
    if (std::find(levels.begin(), levels.end(), platform.fission) == levels.end())
      c.platform.fission = FissionLevel::NoFission;
  }
  if (!fleet.has_gpu()) {
    c.platform.overlap = 1;
    c.platform.wgs_per_kernel.clear();
  } else {
    c.platform.overlap = std::max<std::size_t>(platform.overlap, 1);
    WgsAssignment full = best_occupancy_wgs(fleet.gpus, sct);
    for (const KernelSpec* k : sct.kernels()) {
      if (k->fixed_wgs) continue;
      if (auto it = platform.wgs_per_kernel.find(k->id); it != platform.wgs_per_kernel.end()) full[k->id] = it->second;
    }
    c.platform.wgs_per_kernel = std::move(full);
  }
  double cpu = std::clamp(split.cpu, 0.0, 1.0);
  if (!fleet.has_gpu()) cpu = 1.0;
  if (!fleet.has_cpu()) cpu = 0.0;
  c.split = Split::from_cpu(cpu);
  c.per_gpu_weights = fleet.gpu_weights();
  c.parallelism = slot_layout(fleet, c.platform).size();
  return c;
}

std::vector<double> slot_fractions(const Fleet& fleet, const FrameworkConfig& config) {
  auto slots = slot_layout(fleet, config.platform);
  std::size_t cpu_slots = 0;
  for (const Slot& s : slots)
    if (s.type == DeviceType::Cpu) ++cpu_slots;
  std::vector<double> out;
  out.reserve(slots.size());
  for (const Slot& s : slots) {
    if (s.type == DeviceType::Cpu)
      out.push_back(config.split.cpu / static_cast<double>(cpu_slots));
    else
      out.push_back(config.split.gpu * config.per_gpu_weights.at(s.device) /
                    static_cast<double>(config.platform.overlap));
  }
  return out;
}

std::map<std::string, std::size_t> RunArguments::lengths_for(const Sct& sct) const {
  std::map<std::string, std::size_t> out;
  for (const auto& v : sct.vectors()) {
    auto it = vector_lengths.find(v.name);
    out[v.name] = it == vector_lengths.end() ? workload.total_elements() : it->second;
  }
  return out;
}

std::string_view to_string(ExecutionEvent::Kind k) {
  switch (k) {
    case ExecutionEvent::Kind::Kernel: return "kernel";
    case ExecutionEvent::Kind::HostCondition: return "host-condition";
    case ExecutionEvent::Kind::HostUpdate: return "host-update";
    case ExecutionEvent::Kind::Barrier: return "barrier";
    case ExecutionEvent::Kind::HostReduce: return "host-reduce";
  }
  return "kernel";
}

// ---------------------------------------------------------------------------
// Worker pool

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  for (auto& q : queues_) q->cv.notify_all();
  for (auto& t : threads_) t.join();
}

std::size_t WorkerPool::queues() const {
  std::lock_guard lock(mutex_);
  return queues_.size();
}

void WorkerPool::grow(std::size_t n) {
  while (queues_.size() < n) {
    std::size_t index = queues_.size();
    queues_.push_back(std::make_unique<Queue>());
    threads_.emplace_back([this, index] { drain(index); });
  }
}

void WorkerPool::drain(std::size_t index) {
  std::unique_lock lock(mutex_);
  Queue& q = *queues_[index];
  for (;;) {
    q.cv.wait(lock, [&] { return stop_ || !q.tasks.empty(); });
    if (q.tasks.empty()) return;
    auto task = std::move(q.tasks.front());
    q.tasks.pop_front();
    lock.unlock();
    task();
    lock.lock();
  }
}

void WorkerPool::run(std::size_t n, const std::function<void(std::size_t)>& task) {
  if (n == 0) return;
  std::vector<std::exception_ptr> errors(n);
  std::latch done(static_cast<std::ptrdiff_t>(n));
  {
    std::lock_guard lock(mutex_);
    grow(n);
    for (std::size_t i = 0; i < n; ++i)
      queues_[i]->tasks.push_back([&, i] {
        try {
          task(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
        done.count_down();
      });
  }
  for (std::size_t i = 0; i < n; ++i) queues_[i]->cv.notify_one();
  done.wait();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Execution

namespace {

struct Aborted {};

/// Reusable barrier whose last arriver runs a host-side step before release.
class SlotSync {
 public:
  explicit SlotSync(std::size_t n) : n_(n) {}

  void arrive(const std::function<void()>& last) {
    std::unique_lock lock(mutex_);
    if (aborted_) throw Aborted{};
    if (++count_ == n_) {
      try {
        last();
      } catch (...) {
        aborted_ = true;
        cv_.notify_all();
        throw;
      }
      count_ = 0;
      ++generation_;
      cv_.notify_all();
      return;
    }
    std::size_t gen = generation_;
    cv_.wait(lock, [&] { return generation_ != gen || aborted_; });
    if (aborted_ && generation_ == gen) throw Aborted{};
  }

  void abort() {
    std::lock_guard lock(mutex_);
    aborted_ = true;
    cv_.notify_all();
  }

 private:
  std::size_t n_;
  std::size_t count_ = 0;
  std::size_t generation_ = 0;
  bool aborted_ = false;
  std::mutex mutex_;
  std::condition_variable cv_;
};

struct SlotState {
  Slot slot;
  double clock = 0.0;
  double busy = 0.0;
  std::size_t iteration = 0;
  std::vector<ExecutionEvent> events;
};

class Run {
 public:
  Run(const SimulatedPlatform& platform, const HostCosts& host, const Sct& sct, const PartitionPlan& plan,
      const FrameworkConfig& config, const RunArguments& args, double clock, bool record)
      : platform_(platform),
        host_(host),
        sct_(sct),
        plan_(plan),
        config_(config),
        args_(args),
        clock_(clock),
        record_(record),
        sync_(plan.parallelism) {
    auto slots = slot_layout(platform.fleet(), config.platform);
    if (slots.size() != plan.parallelism) throw InvalidSpec("partition plan does not match the configuration");
    for (const Slot& s : slots) {
      state_.emplace_back();
      state_.back().slot = s;
    }
    lengths_ = args.lengths_for(sct);
    if (sct.has_bodies()) {
      for (const auto& v : sct.vectors()) {
        auto& buf = buffers_[v.name];
        buf.assign(lengths_.at(v.name), 0.0);
        if (auto it = args.inputs.find(v.name); it != args.inputs.end()) {
          if (it->second.size() != buf.size())
            throw ShapeMismatch("input '" + v.name + "' has " + std::to_string(it->second.size()) +
                                " elements, expected " + std::to_string(buf.size()));
          buf = it->second;
        }
      }
    }
  }

  void slot_task(std::size_t s) {
    try {
      transfer_in(s);
      walk(sct_, s);
    } catch (const Aborted&) {
    } catch (...) {
      {
        std::lock_guard lock(error_mutex_);
        if (!error_) error_ = std::current_exception();
      }
      sync_.abort();
    }
  }

  ExecutionStats finish(RunResult* result) {
    if (error_) std::rethrow_exception(error_);
    ExecutionStats st;
    const Fleet& fleet = platform_.fleet();
    for (auto& ss : state_) {
      st.slots.push_back(ss.slot);
      st.per_slot_times.push_back(ss.busy);
      double& t = ss.slot.type == DeviceType::Cpu ? st.per_type.cpu : st.per_type.gpu;
      t = std::max(t, ss.busy);
      st.wall_time = std::max(st.wall_time, ss.clock);
    }
    if (fleet.has_cpu() && fleet.has_gpu()) {
      double hi = std::max(st.per_type.cpu, st.per_type.gpu);
      st.dev = hi > 0.0 ? std::min(st.per_type.cpu, st.per_type.gpu) / hi : 1.0;
    }
    st.host_time = host_time_;
    if (record_) {
      for (auto& ss : state_) st.events.insert(st.events.end(), ss.events.begin(), ss.events.end());
      st.events.insert(st.events.end(), host_events_.begin(), host_events_.end());
      std::stable_sort(st.events.begin(), st.events.end(), [](const ExecutionEvent& a, const ExecutionEvent& b) {
        if (a.start != b.start) return a.start < b.start;
        std::size_t sa = a.slot ? *a.slot + 1 : 0, sb = b.slot ? *b.slot + 1 : 0;
        return sa < sb;
      });
    }
    if (result) {
      for (const auto& v : sct_.vectors())
        if (v.written && buffers_.count(v.name)) result->outputs[v.name] = buffers_[v.name];
      result->reduction = reduction_;
    }
    return st;
  }

 private:
  void transfer_in(std::size_t s) {
    SlotState& ss = state_[s];
    if (ss.slot.type != DeviceType::Gpu) return;
    std::size_t bytes = 0, partitioned = 0;
    for (const auto& v : sct_.vectors()) {
      const Partition& p = plan_.at(v.name, s);
      bytes += p.length * v.element_width;
      if (v.transfer == TransferMode::Partition) partitioned += p.length;
    }
    if (partitioned == 0) return;
    double t = platform_.transfer_time(ss.slot, config_.platform, bytes);
    ss.clock += t;
    ss.busy += t;
  }

  void walk(const Sct& t, std::size_t s) {
    switch (t.kind()) {
      case Sct::Kind::Leaf:
        kernel(t.kernel(), s);
        return;
      case Sct::Kind::Pipeline:
        for (const Sct& c : t.children()) walk(c, s);
        return;
      case Sct::Kind::Map:
        walk(t.children()[0], s);
        return;
      case Sct::Kind::Loop:
        if (t.loop_state().global_sync)
          synced_loop(t, s);
        else
          local_loop(t, s);
        return;
      case Sct::Kind::MapReduce:
        walk(t.children()[0], s);
        if (t.children().size() > 1)
          walk(t.children()[1], s);
        else
          host_reduce(*t.host_reducer(), s);
        return;
    }
  }

  void kernel(const KernelSpec& k, std::size_t s) {
    SlotState& ss = state_[s];
    const KernelArg* primary = k.primary_vector();
    Partition part{0, 0, s};
    if (primary) part = plan_.at(primary->name, s);

    std::map<std::string, double> scalars;
    for (const auto& a : k.args) {
      if (a.is_vector()) continue;
      if (a.trait == Trait::Size)
        scalars[a.name] = static_cast<double>(part.length);
      else if (a.trait == Trait::Offset)
        scalars[a.name] = static_cast<double>(part.offset);
      else if (auto it = args_.scalars.find(a.name); it != args_.scalars.end())
        scalars[a.name] = it->second;
      else if (k.body)
        throw ShapeMismatch("kernel '" + k.id + "' needs scalar '" + a.name + "'");
    }

    if (k.body && part.length > 0 && !buffers_.empty()) {
      KernelInvocation inv;
      inv.slot = s;
      inv.scalars = scalars;
      for (const auto& a : k.args) {
        if (!a.is_vector()) continue;
        auto& buf = buffers_.at(a.name);
        const Partition& p = plan_.at(a.name, s);
        std::span<double> view(buf.data() + p.offset, p.length);
        if (a.is_mutable())
          inv.outputs[a.name] = view;
        else
          inv.inputs[a.name] = view;
      }
      k.body(inv);
    }

    double dt = platform_.kernel_time(ss.slot, config_.platform, k, part.length, clock_);
    if (record_)
      ss.events.push_back({ExecutionEvent::Kind::Kernel, s, k.id, ss.iteration, std::move(scalars), ss.clock, dt});
    ss.clock += dt;
    ss.busy += dt;
  }

  void local_loop(const Sct& t, std::size_t s) {
    const LoopState& ls = t.loop_state();
    SlotState& ss = state_[s];
    const std::size_t outer = ss.iteration;
    for (std::size_t i = 0; i < ls.max_iterations; ++i) {
      bool go = ls.condition(i, args_.scalars);
      if (record_)
        ss.events.push_back({ExecutionEvent::Kind::HostCondition, s, ls.name, i, {}, ss.clock, host_.condition_ms});
      ss.clock += host_.condition_ms;
      if (!go) break;
      ss.iteration = i;
      walk(t.children()[0], s);
      for (const auto& item : ls.updated_items) {
        if (record_)
          ss.events.push_back({ExecutionEvent::Kind::HostUpdate, s, item, i, {}, ss.clock, host_.update_ms});
        ss.clock += host_.update_ms;
      }
    }
    ss.iteration = outer;
  }

  // All slots step through the iterations together; the host checks the
  // condition once per iteration after a barrier.
  void synced_loop(const Sct& t, std::size_t s) {
    const LoopState& ls = t.loop_state();
    SlotState& ss = state_[s];
    const std::size_t outer = ss.iteration;
    sync_.arrive([&] {
      align(0.0);
      host_condition(ls, 0);
    });
    for (std::size_t i = 0; go_; ++i) {
      ss.iteration = i;
      walk(t.children()[0], s);
      sync_.arrive([&] {
        double at = align(0.0);
        if (record_) host_events_.push_back({ExecutionEvent::Kind::Barrier, std::nullopt, ls.name, i, {}, at, 0.0});
        for (const auto& item : ls.updated_items) {
          if (record_)
            host_events_.push_back(
                {ExecutionEvent::Kind::HostUpdate, std::nullopt, item, i, {}, align(0.0), host_.update_ms});
          align(host_.update_ms);
        }
        host_condition(ls, i + 1);
      });
    }
    ss.iteration = outer;
  }

  void host_condition(const LoopState& ls, std::size_t i) {
    go_ = i < ls.max_iterations && ls.condition(i, args_.scalars);
    if (record_)
      host_events_.push_back(
          {ExecutionEvent::Kind::HostCondition, std::nullopt, ls.name, i, {}, align(0.0), host_.condition_ms});
    align(host_.condition_ms);
  }

  // Moves every slot clock to the latest one plus `host_ms` of serial host
  // work. Only called from a barrier step.
  double align(double host_ms) {
    double at = 0.0;
    for (const auto& ss : state_) at = std::max(at, ss.clock);
    for (auto& ss : state_) ss.clock = at + host_ms;
    host_time_ += host_ms;
    return at;
  }

  void host_reduce(const HostReducer& r, std::size_t s) {
    (void)s;
    sync_.arrive([&] {
      const double cost = host_.reduce_ms_per_partial * static_cast<double>(state_.size());
      if (record_)
        host_events_.push_back({ExecutionEvent::Kind::HostReduce, std::nullopt, r.name, state_.front().iteration, {},
                                align(0.0), cost});
      align(cost);
      if (buffers_.empty()) return;
      const auto& buf = buffers_.at(r.target);
      std::optional<double> acc;
      if (r.associative) {
        for (std::size_t j = 0; j < state_.size(); ++j) {
          const Partition& p = plan_.at(r.target, j);
          if (p.length == 0) continue;
          double partial = buf[p.offset];
          for (std::size_t e = 1; e < p.length; ++e) partial = r.apply(partial, buf[p.offset + e]);
          acc = acc ? r.apply(*acc, partial) : partial;
        }
      } else {
        for (std::size_t j = 0; j < state_.size(); ++j) {
          const Partition& p = plan_.at(r.target, j);
          for (std::size_t e = 0; e < p.length; ++e) acc = acc ? r.apply(*acc, buf[p.offset + e]) : buf[p.offset + e];
        }
      }
      reduction_ = acc;
    });
  }

  const SimulatedPlatform& platform_;
  const HostCosts& host_;
  const Sct& sct_;
  const PartitionPlan& plan_;
  const FrameworkConfig& config_;
  const RunArguments& args_;
  double clock_;
  bool record_;

  std::vector<SlotState> state_;
  std::map<std::string, std::size_t> lengths_;
  std::map<std::string, std::vector<double>> buffers_;
  SlotSync sync_;
  bool go_ = false;
  double host_time_ = 0.0;
  std::vector<ExecutionEvent> host_events_;
  std::optional<double> reduction_;
  std::mutex error_mutex_;
  std::exception_ptr error_;
};

std::vector<WgsAssignment> per_slot_wgs(const Fleet& fleet, const Sct& sct, const FrameworkConfig& config) {
  std::vector<WgsAssignment> out;
  for (const Slot& slot : slot_layout(fleet, config.platform)) {
    WgsAssignment a;
    for (const KernelSpec* k : sct.kernels()) a[k->id] = slot_wgs(slot, config.platform, *k);
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace

Executor::Executor(Fleet fleet, std::optional<NoiseModel> noise, HostCosts host)
    : platform_(std::move(fleet), noise), host_(host) {}

PartitionPlan Executor::plan(const Sct& sct, const FrameworkConfig& config,
                             const std::map<std::string, std::size_t>& lengths) const {
  const Fleet& f = fleet();
  PartitionRequest req;
  req.vector_lengths = lengths;
  req.fractions = slot_fractions(f, config);
  req.slot_wgs = per_slot_wgs(f, sct, config);
  // Left-over granules go to the fastest GPU lane when GPUs get work.
  auto slots = slot_layout(f, config.platform);
  std::size_t best = 0;
  bool gpu = config.split.gpu > 0.0 && f.has_gpu();
  for (std::size_t j = 0; j < slots.size(); ++j) {
    if (gpu && slots[j].type != DeviceType::Gpu) continue;
    if (gpu && slots[best].type != DeviceType::Gpu) best = j;
    if (req.fractions[j] > req.fractions[best]) best = j;
  }
  req.residue_slot = best;
  return partition_input(sct, req);
}

double Executor::granule_share(const Sct& sct, const FrameworkConfig& config,
                               const std::map<std::string, std::size_t>& lengths) const {
  auto wgs = per_slot_wgs(fleet(), sct, config);
  double share = 0.0;
  for (const auto& v : sct.vectors()) {
    if (v.transfer != TransferMode::Partition) continue;
    auto kernels = sct.kernels_touching(v.name);
    std::size_t g = 1;
    for (const auto& a : wgs) g = std::max(g, granule(v.name, kernels, a));
    share = std::max(share, static_cast<double>(g) / static_cast<double>(lengths.at(v.name)));
  }
  return share;
}

ExecutionStats Executor::execute_once(const Sct& sct, const PartitionPlan& plan, const FrameworkConfig& config,
                                      const RunArguments& args, double clock, RunResult* result, bool record_events) {
  Run run(platform_, host_, sct, plan, config, args, clock, record_events);
  pool_.run(plan.parallelism, [&](std::size_t s) { run.slot_task(s); });
  return run.finish(result);
}

// ---------------------------------------------------------------------------
// Profile target

ExecutorTarget::ExecutorTarget(Executor& executor, Sct sct, RunArguments args, double clock)
    : executor_(executor), sct_(std::move(sct)), args_(std::move(args)), clock_(clock) {
  lengths_ = args_.lengths_for(sct_);
}

bool ExecutorTarget::has_cpu() const { return executor_.fleet().has_cpu(); }
bool ExecutorTarget::has_gpu() const { return executor_.fleet().has_gpu(); }

std::vector<FissionLevel> ExecutorTarget::cpu_configurations() const {
  return cpu_get_configurations(*executor_.fleet().cpu);
}

GpuConfigurations ExecutorTarget::gpu_configurations(double occupancy_threshold, std::size_t overlap_cap) const {
  return gpu_get_configurations(executor_.fleet().gpus, sct_, occupancy_threshold, overlap_cap);
}

double ExecutorTarget::granule_share(const PlatformConfig& config) const {
  return executor_.granule_share(sct_, materialize(executor_.fleet(), sct_, config, Split{}), lengths_);
}

Evaluation ExecutorTarget::evaluate(const PlatformConfig& config, const Split& split, std::size_t executions) {
  FrameworkConfig fc = materialize(executor_.fleet(), sct_, config, split);
  PartitionPlan plan = executor_.plan(sct_, fc, lengths_);
  Evaluation best;
  for (std::size_t e = 0; e < executions; ++e) {
    ExecutionStats st = executor_.execute_once(sct_, plan, fc, args_, clock_, nullptr, false);
    if (e == 0 || st.wall_time < best.time) best = {st.wall_time, st.per_type};
  }
  return best;
}

// ---------------------------------------------------------------------------
// Engine

Engine::Engine(Fleet fleet, KnowledgeBase& kb, EngineOptions options)
    : kb_(kb), options_(std::move(options)), executor_(std::move(fleet), options_.noise, options_.host) {
  options_.tuner.validate();
  options_.balancer.validate();
  intake_ = std::thread([this] { serve(); });
}

Engine::~Engine() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  cv_.notify_all();
  intake_.join();
}

void Engine::enqueue(std::function<void()> job) {
  {
    std::lock_guard lock(mutex_);
    requests_.push_back(std::move(job));
  }
  cv_.notify_one();
}

void Engine::serve() {
  std::unique_lock lock(mutex_);
  for (;;) {
    cv_.wait(lock, [&] { return stop_ || !requests_.empty(); });
    if (requests_.empty()) return;
    auto job = std::move(requests_.front());
    requests_.pop_front();
    lock.unlock();
    job();
    lock.lock();
  }
}

std::future<RunOutcome> Engine::run(Sct sct, RunArguments args) {
  auto promise = std::make_shared<std::promise<RunOutcome>>();
  auto future = promise->get_future();
  enqueue([this, promise, sct = std::move(sct), args = std::move(args)] {
    try {
      promise->set_value(process(sct, args));
    } catch (...) {
      promise->set_exception(std::current_exception());
    }
  });
  return future;
}

std::future<ProfileResult> Engine::profile(Sct sct, RunArguments args) {
  auto promise = std::make_shared<std::promise<ProfileResult>>();
  auto future = promise->get_future();
  enqueue([this, promise, sct = std::move(sct), args = std::move(args)] {
    try {
      args.workload.validate();
      promise->set_value(build(sct, args, static_cast<double>(run_index_)));
    } catch (...) {
      promise->set_exception(std::current_exception());
    }
  });
  return future;
}

ProfileResult Engine::build(const Sct& sct, const RunArguments& args, double clock) {
  ExecutorTarget target(executor_, sct, args, clock);
  return build_profile(sct.id(), args.workload, options_.tuner, target, kb_);
}

RunOutcome Engine::process(const Sct& sct, const RunArguments& args) {
  args.workload.validate();
  const Fleet& fleet = executor_.fleet();
  const std::size_t index = run_index_++;
  const double clock = static_cast<double>(index);
  RunOutcome out;
  RunRecord& rec = out.record;
  std::optional<Provenance> persist;

  auto key = std::make_pair(sct.id(), args.workload);
  if (!last_key_ || *last_key_ != key) {
    Derivation d = kb_.derive(sct.id(), args.workload);
    current_ = materialize(fleet, sct, d.platform, d.split);
    derived_reference_ = current_.split;
    abs_.reset();
    lbt_ = 0.0;
    last_key_ = key;
    rec.actions.push_back("derive:" + std::string(to_string(d.scope)));
    if (d.scope != DerivationScope::Exact) persist = Provenance::Derived;
  } else if (should_balance(lbt_, options_.balancer)) {
    if (options_.profiling && !kb_.has_built(sct.id(), args.workload)) {
      ProfileResult pr = build(sct, args, clock);
      current_ = materialize(fleet, sct, pr.profile.platform, pr.profile.split);
      abs_.reset();
      lbt_ = 0.0;
      rec.actions.push_back("profile:built");
      out.profile = std::move(pr);
    } else {
      if (!abs_) {
        abs_ = abs_start(current_.split, derived_reference_, options_.balancer);
        rec.actions.push_back("balance:trigger");
      }
      AbsStep step = abs_step(*abs_, last_times_, current_.split);
      abs_ = step.state;
      current_ = materialize(fleet, sct, current_.platform, step.split);
      rec.actions.push_back("balance:" + std::string(to_string(step.event)));
      persist = Provenance::Balanced;
    }
  } else {
    if (abs_) {
      rec.actions.push_back("balance:converge");
      abs_.reset();
    }
    rec.actions.push_back("reuse");
  }

  PartitionPlan plan = executor_.plan(sct, current_, args.lengths_for(sct));
  out.stats = executor_.execute_once(sct, plan, current_, args, clock, &out.result, options_.record_events);
  const ExecutionStats& st = out.stats;
  if (st.dev) lbt_ = lbt_update(lbt_, *st.dev, options_.balancer);
  last_times_ = st.per_type;
  if (persist && st.wall_time > 0.0)
    kb_.store(Profile{sct.id(), args.workload, current_.split, current_.platform, st.wall_time, *persist});

  rec.run = index;
  rec.sct_id = sct.id();
  rec.workload = args.workload;
  rec.config = current_;
  rec.slots = st.slots;
  rec.per_slot_times = st.per_slot_times;
  rec.per_type = st.per_type;
  rec.dev = st.dev;
  rec.lbt = lbt_;
  rec.wall_time = st.wall_time;
  rec.host_time = st.host_time;
  rec.abs = abs_;
  rec.events = st.events;
  return out;
}

}  // namespace skelrt
