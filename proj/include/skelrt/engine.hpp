#pragma once

// Runtime: FIFO request intake, the per-run work-distribution decision,
// execution of a tree over per-slot work queues, and run statistics.

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "skelrt/balance.hpp"
#include "skelrt/decomp.hpp"
#include "skelrt/kb.hpp"
#include "skelrt/platform.hpp"
#include "skelrt/sct.hpp"
#include "skelrt/tuner.hpp"
#include "skelrt/workload.hpp"

namespace skelrt {

struct FrameworkConfig {
  PlatformConfig platform;
  Split split;
  std::vector<double> per_gpu_weights;
  std::size_t parallelism = 0;
};

/// Completes a configuration for `fleet`: unsupported fission levels fall
/// back to NO_FISSION, missing work-group sizes take the best-occupancy
/// size, and a fleet with one device type gets all of the work.
FrameworkConfig materialize(const Fleet& fleet, const Sct& sct, const PlatformConfig& platform, const Split& split);

/// Share of the workload per slot, in slot_layout order. CPU share is split
/// evenly across subdevices, GPU share by relative performance then evenly
/// across overlap lanes.
std::vector<double> slot_fractions(const Fleet& fleet, const FrameworkConfig& config);

/// Fixed per-operation host costs in ms.
struct HostCosts {
  double condition_ms = 0.0;
  double update_ms = 0.0;
  double reduce_ms_per_partial = 0.0;
};

struct RunArguments {
  WorkloadId workload;
  /// Per vector; vectors not listed get workload.total_elements().
  std::map<std::string, std::size_t> vector_lengths;
  /// Initial vector contents; only read when kernels have bodies.
  std::map<std::string, std::vector<double>> inputs;
  std::map<std::string, double> scalars;

  std::map<std::string, std::size_t> lengths_for(const Sct& sct) const;
};

struct ExecutionEvent {
  enum class Kind { Kernel, HostCondition, HostUpdate, Barrier, HostReduce };

  Kind kind = Kind::Kernel;
  std::optional<std::size_t> slot;  // unset for host-wide events
  std::string name;                 // kernel id, loop name or reducer name
  std::size_t iteration = 0;
  std::map<std::string, double> scalars;  // Kernel: values after trait substitution
  double start = 0.0;
  double duration = 0.0;
};

std::string_view to_string(ExecutionEvent::Kind k);

struct ExecutionStats {
  std::vector<Slot> slots;
  /// Busy time per slot: its own transfers and kernels.
  std::vector<double> per_slot_times;
  TypeTimes per_type;  // max busy time over each type's slots
  /// min/max of the per-type times; unset when the fleet has one device type.
  std::optional<double> dev;
  double host_time = 0.0;
  double wall_time = 0.0;  // critical path, host stages included
  std::vector<ExecutionEvent> events;
};

struct RunResult {
  std::map<std::string, std::vector<double>> outputs;  // written vectors, when kernels have bodies
  std::optional<double> reduction;                     // last host reduction value
};

/// One queue per slot, each drained by its own thread.
class WorkerPool {
 public:
  WorkerPool() = default;
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  /// Runs task(slot) on queues 0..n-1 and waits. Rethrows the first failure
  /// in slot order.
  void run(std::size_t n, const std::function<void(std::size_t)>& task);
  std::size_t queues() const;

 private:
  struct Queue {
    std::deque<std::function<void()>> tasks;
    std::condition_variable cv;
  };
  void grow(std::size_t n);
  void drain(std::size_t index);

  mutable std::mutex mutex_;
  std::vector<std::unique_ptr<Queue>> queues_;
  std::vector<std::thread> threads_;
  bool stop_ = false;
};

/// Executes trees on a simulated fleet. Stateless between calls apart from
/// the worker threads.
class Executor {
 public:
  Executor(Fleet fleet, std::optional<NoiseModel> noise = std::nullopt, HostCosts host = {});

  const Fleet& fleet() const noexcept { return platform_.fleet(); }
  const SimulatedPlatform& platform() const noexcept { return platform_; }

  PartitionPlan plan(const Sct& sct, const FrameworkConfig& config, const std::map<std::string, std::size_t>& lengths) const;

  /// Largest share of the workload a single granule represents on any slot.
  double granule_share(const Sct& sct, const FrameworkConfig& config,
                       const std::map<std::string, std::size_t>& lengths) const;

  ExecutionStats execute_once(const Sct& sct, const PartitionPlan& plan, const FrameworkConfig& config,
                              const RunArguments& args, double clock, RunResult* result = nullptr,
                              bool record_events = true);

 private:
  SimulatedPlatform platform_;
  HostCosts host_;
  WorkerPool pool_;
};

/// Adapts an executor and a fixed request to the profile search.
class ExecutorTarget final : public ProfileTarget {
 public:
  ExecutorTarget(Executor& executor, Sct sct, RunArguments args, double clock);

  bool has_cpu() const override;
  bool has_gpu() const override;
  std::vector<FissionLevel> cpu_configurations() const override;
  GpuConfigurations gpu_configurations(double occupancy_threshold, std::size_t overlap_cap) const override;
  double granule_share(const PlatformConfig& config) const override;
  Evaluation evaluate(const PlatformConfig& config, const Split& split, std::size_t executions) override;

 private:
  Executor& executor_;
  Sct sct_;
  RunArguments args_;
  std::map<std::string, std::size_t> lengths_;
  double clock_;
};

struct EngineOptions {
  TunerParams tuner;
  BalancerParams balancer;
  bool profiling = true;
  std::optional<NoiseModel> noise;
  HostCosts host;
  bool record_events = false;
};

/// Per-run trace record.
struct RunRecord {
  std::size_t run = 0;
  std::string sct_id;
  WorkloadId workload;
  FrameworkConfig config;
  std::vector<Slot> slots;
  std::vector<double> per_slot_times;
  TypeTimes per_type;
  std::optional<double> dev;
  double lbt = 0.0;
  double wall_time = 0.0;
  double host_time = 0.0;
  std::vector<std::string> actions;
  std::optional<AbsState> abs;
  std::vector<ExecutionEvent> events;
};

struct RunOutcome {
  RunResult result;
  ExecutionStats stats;
  RunRecord record;
  std::optional<ProfileResult> profile;  // set when this run built a profile
};

class Engine {
 public:
  Engine(Fleet fleet, KnowledgeBase& kb, EngineOptions options = {});
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  /// Queues a request. Requests run one at a time in arrival order.
  std::future<RunOutcome> run(Sct sct, RunArguments args);

  /// Queues a profile construction for the request, bypassing the decision
  /// workflow. Improvements are persisted as "built".
  std::future<ProfileResult> profile(Sct sct, RunArguments args);

  const EngineOptions& options() const noexcept { return options_; }
  Executor& executor() noexcept { return executor_; }

 private:
  void enqueue(std::function<void()> job);
  void serve();
  RunOutcome process(const Sct& sct, const RunArguments& args);
  ProfileResult build(const Sct& sct, const RunArguments& args, double clock);

  KnowledgeBase& kb_;
  EngineOptions options_;
  Executor executor_;

  // Decision state, touched only by the intake thread.
  std::optional<std::pair<std::string, WorkloadId>> last_key_;
  FrameworkConfig current_;
  std::optional<Split> derived_reference_;
  std::optional<AbsState> abs_;
  TypeTimes last_times_;
  double lbt_ = 0.0;
  std::size_t run_index_ = 0;

  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> requests_;
  bool stop_ = false;
  std::thread intake_;
};

}  // namespace skelrt
