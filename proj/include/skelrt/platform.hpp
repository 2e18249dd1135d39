#pragma once

// Simulated CPU and GPU execution platforms: configuration spaces, occupancy
// and a synthetic cost model standing in for real device execution.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "skelrt/sct.hpp"
#include "skelrt/workload.hpp"

namespace skelrt {

enum class FissionLevel { L1, L2, L3, Numa, NoFission };

std::string_view to_string(FissionLevel f);
FissionLevel parse_fission(std::string_view s);

/// Step change of the external CPU load from clock `from` onwards.
struct LoadEvent {
  double from = 0.0;
  double multiplier = 1.0;
};

struct CpuDeviceModel {
  std::string name = "cpu";
  std::size_t cores = 1;
  /// Subdevice count per fission level; NO_FISSION is implicit (one subdevice).
  std::map<FissionLevel, std::size_t> cache_topology;
  /// Throughput multiplier per fission level (locality gains); default 1.
  std::map<FissionLevel, double> fission_efficiency;
  /// Whole-device throughput in elements/ms per kernel id.
  std::map<std::string, double> base_throughput;
  double launch_overhead_ms = 0.0;
  std::vector<LoadEvent> load_profile;

  std::size_t subdevices(FissionLevel level) const;
  double efficiency(FissionLevel level) const;
  double load_at(double clock) const;
  void validate() const;
};

struct GpuDeviceModel {
  std::string name = "gpu";
  std::size_t compute_units = 1;
  std::size_t max_wg_per_cu = 8;
  std::size_t local_mem_per_cu = 32768;
  std::size_t registers_per_cu = 65536;
  std::size_t min_work_group_size = 32;
  std::size_t max_work_group_size = 1024;
  double relative_perf = 1.0;
  std::map<std::string, double> throughput;  // elements/ms per kernel id, at full occupancy
  double transfer_bandwidth = 1e6;           // bytes/ms
  double overlap_efficiency = 0.0;           // share of transfer hidden per extra overlap level
  double launch_overhead_ms = 0.0;
  std::map<std::size_t, double> wgs_efficiency;  // optional throughput multiplier per work-group size

  void validate() const;
};

struct Fleet {
  std::optional<CpuDeviceModel> cpu;
  std::vector<GpuDeviceModel> gpus;

  bool has_cpu() const noexcept { return cpu.has_value(); }
  bool has_gpu() const noexcept { return !gpus.empty(); }
  /// relative_perf normalized to sum 1.
  std::vector<double> gpu_weights() const;
  void validate() const;
};

using WgsAssignment = std::map<std::string, std::size_t>;

struct PlatformConfig {
  FissionLevel fission = FissionLevel::NoFission;
  std::size_t overlap = 1;
  WgsAssignment wgs_per_kernel;

  friend bool operator==(const PlatformConfig&, const PlatformConfig&) = default;
};

/// One parallel execution of the tree.
struct Slot {
  DeviceType type = DeviceType::Cpu;
  std::size_t device = 0;  // GPU index; 0 for the CPU
  std::size_t lane = 0;    // subdevice or overlap index
};

/// CPU subdevices first, then each GPU's `overlap` lanes.
std::vector<Slot> slot_layout(const Fleet& fleet, const PlatformConfig& config);

/// Achievable fraction of a compute unit's work-group slots.
double occupancy(const GpuDeviceModel& gpu, const KernelSpec& kernel, std::size_t wgs);

std::vector<FissionLevel> cpu_get_configurations(const CpuDeviceModel& cpu);

struct WgsCandidate {
  std::size_t size = 1;        // shared by every kernel without a fixed size
  WgsAssignment assignment;    // full per-kernel map
  double occupancy = 0.0;      // worst over kernels and GPUs
};

struct GpuConfigurations {
  std::vector<std::size_t> overlaps;
  std::vector<WgsCandidate> wgs_candidates;
};

inline constexpr std::size_t kDefaultOverlapCap = 8;

/// Power-of-two work-group sizes whose occupancy reaches the threshold on
/// every GPU for every kernel, best occupancy first (ties: larger size first).
/// Falls back to the single best-occupancy size when none qualifies.
GpuConfigurations gpu_get_configurations(std::span<const GpuDeviceModel> gpus, const Sct& sct,
                                         double occupancy_threshold, std::size_t overlap_cap = kDefaultOverlapCap);

/// Best-occupancy assignment; used when a configuration lacks a kernel's size.
WgsAssignment best_occupancy_wgs(std::span<const GpuDeviceModel> gpus, const Sct& sct);

/// Work-group size a kernel runs with on a slot: fixed size if mandated,
/// the configured size on GPUs, 1 on CPUs.
std::size_t slot_wgs(const Slot& slot, const PlatformConfig& config, const KernelSpec& kernel);

struct NoiseModel {
  std::uint64_t seed = 0;
  double amplitude = 0.0;  // multiplier drawn uniformly from [1 - a, 1 + a]
};

class SimulatedPlatform {
 public:
  explicit SimulatedPlatform(Fleet fleet, std::optional<NoiseModel> noise = std::nullopt);

  const Fleet& fleet() const noexcept { return fleet_; }

  /// Compute time of one kernel over `elements` on a slot.
  double kernel_time(const Slot& slot, const PlatformConfig& config, const KernelSpec& kernel, std::size_t elements,
                     double clock) const;
  /// Host-device transfer time for `bytes` on a slot; zero on CPU slots.
  double transfer_time(const Slot& slot, const PlatformConfig& config, std::size_t bytes) const;

 private:
  double noise(const Slot& slot, std::string_view kernel, double clock) const;

  Fleet fleet_;
  std::optional<NoiseModel> noise_;
};

struct SlotWork {
  Slot slot;
  std::size_t elements = 0;
  std::size_t bytes = 0;
};

/// Per-slot duration of one kernel: compute plus (GPU) transfer.
std::vector<double> simulate_execution(const SimulatedPlatform& platform, std::span<const SlotWork> work,
                                       const PlatformConfig& config, const KernelSpec& kernel, double clock);

}  // namespace skelrt
