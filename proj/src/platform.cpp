#include "skelrt/platform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "skelrt/error.hpp"

namespace skelrt {

std::string_view to_string(FissionLevel f) {
  switch (f) {
    case FissionLevel::L1: return "L1";
    case FissionLevel::L2: return "L2";
    case FissionLevel::L3: return "L3";
    case FissionLevel::Numa: return "NUMA";
    case FissionLevel::NoFission: return "NO_FISSION";
  }
  return "NO_FISSION";
}

FissionLevel parse_fission(std::string_view s) {
  if (s == "L1") return FissionLevel::L1;
  if (s == "L2") return FissionLevel::L2;
  if (s == "L3") return FissionLevel::L3;
  if (s == "NUMA") return FissionLevel::Numa;
  if (s == "NO_FISSION") return FissionLevel::NoFission;
  throw InvalidSpec("unknown fission level '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Device models

std::size_t CpuDeviceModel::subdevices(FissionLevel level) const {
  if (level == FissionLevel::NoFission) return 1;
  auto it = cache_topology.find(level);
  if (it == cache_topology.end())
    throw InvalidSpec("CPU '" + name + "' does not support fission level " + std::string(to_string(level)));
  return it->second;
}

double CpuDeviceModel::efficiency(FissionLevel level) const {
  auto it = fission_efficiency.find(level);
  return it == fission_efficiency.end() ? 1.0 : it->second;
}

double CpuDeviceModel::load_at(double clock) const {
  double m = 1.0;
  double latest = -std::numeric_limits<double>::infinity();
  for (const auto& e : load_profile)
    if (e.from <= clock && e.from >= latest) {
      latest = e.from;
      m = e.multiplier;
    }
  return m;
}

void CpuDeviceModel::validate() const {
  if (cores < 1) throw InvalidSpec("CPU '" + name + "': cores must be >= 1");
  std::size_t previous = std::numeric_limits<std::size_t>::max();
  for (auto level : {FissionLevel::L1, FissionLevel::L2, FissionLevel::L3, FissionLevel::Numa}) {
    auto it = cache_topology.find(level);
    if (it == cache_topology.end()) continue;
    if (it->second < 1) throw InvalidSpec("CPU '" + name + "': subdevice counts must be >= 1");
    if (it->second > previous)
      throw InvalidSpec("CPU '" + name + "': subdevice counts must not increase from L1 to NUMA");
    previous = it->second;
  }
  for (const auto& [level, eff] : fission_efficiency)
    if (!(eff > 0.0)) throw InvalidSpec("CPU '" + name + "': fission efficiency must be positive");
  for (const auto& [kernel, tp] : base_throughput)
    if (!(tp > 0.0)) throw InvalidSpec("CPU '" + name + "': throughput for '" + kernel + "' must be positive");
  for (const auto& e : load_profile)
    if (!(e.multiplier >= 1.0)) throw InvalidSpec("CPU '" + name + "': load multipliers must be >= 1");
  if (launch_overhead_ms < 0.0) throw InvalidSpec("CPU '" + name + "': negative launch overhead");
}

void GpuDeviceModel::validate() const {
  if (compute_units < 1 || max_wg_per_cu < 1 || local_mem_per_cu < 1 || registers_per_cu < 1)
    throw InvalidSpec("GPU '" + name + "': capacities must be positive");
  if (min_work_group_size < 1 || max_work_group_size < min_work_group_size)
    throw InvalidSpec("GPU '" + name + "': invalid work-group size range");
  if (!(relative_perf > 0.0)) throw InvalidSpec("GPU '" + name + "': relative_perf must be positive");
  if (!(transfer_bandwidth > 0.0)) throw InvalidSpec("GPU '" + name + "': transfer bandwidth must be positive");
  if (overlap_efficiency < 0.0 || overlap_efficiency > 1.0)
    throw InvalidSpec("GPU '" + name + "': overlap efficiency must lie in [0, 1]");
  for (const auto& [kernel, tp] : throughput)
    if (!(tp > 0.0)) throw InvalidSpec("GPU '" + name + "': throughput for '" + kernel + "' must be positive");
  if (launch_overhead_ms < 0.0) throw InvalidSpec("GPU '" + name + "': negative launch overhead");
}

std::vector<double> Fleet::gpu_weights() const {
  std::vector<double> w;
  double total = 0.0;
  for (const auto& g : gpus) total += g.relative_perf;
  for (const auto& g : gpus) w.push_back(g.relative_perf / total);
  return w;
}

void Fleet::validate() const {
  if (!cpu && gpus.empty()) throw InvalidSpec("device fleet is empty");
  if (cpu) cpu->validate();
  for (const auto& g : gpus) g.validate();
}

std::vector<Slot> slot_layout(const Fleet& fleet, const PlatformConfig& config) {
  std::vector<Slot> slots;
  if (fleet.cpu) {
    std::size_t n = fleet.cpu->subdevices(config.fission);
    for (std::size_t i = 0; i < n; ++i) slots.push_back({DeviceType::Cpu, 0, i});
  }
  for (std::size_t g = 0; g < fleet.gpus.size(); ++g)
    for (std::size_t o = 0; o < config.overlap; ++o) slots.push_back({DeviceType::Gpu, g, o});
  return slots;
}

// ---------------------------------------------------------------------------
// Configuration spaces

double occupancy(const GpuDeviceModel& gpu, const KernelSpec& kernel, std::size_t wgs) {
  const std::size_t cap = gpu.max_wg_per_cu;
  std::size_t by_slots = cap;
  std::size_t by_local = cap;
  std::size_t by_regs = cap;
  if (kernel.resources.local_mem_per_group > 0)
    by_local = std::min(cap, gpu.local_mem_per_cu / kernel.resources.local_mem_per_group);
  if (kernel.resources.registers_per_thread > 0)
    by_regs = std::min(cap, gpu.registers_per_cu / (kernel.resources.registers_per_thread * std::max<std::size_t>(wgs, 1)));
  return static_cast<double>(std::min({by_slots, by_local, by_regs})) / static_cast<double>(cap);
}

std::vector<FissionLevel> cpu_get_configurations(const CpuDeviceModel& cpu) {
  std::vector<FissionLevel> out;
  for (auto level : {FissionLevel::L1, FissionLevel::L2, FissionLevel::L3, FissionLevel::Numa})
    if (cpu.cache_topology.count(level)) out.push_back(level);
  out.push_back(FissionLevel::NoFission);
  return out;
}

namespace {

WgsCandidate evaluate_size(std::span<const GpuDeviceModel> gpus, const std::vector<const KernelSpec*>& kernels,
                           std::size_t size) {
  WgsCandidate c;
  c.size = size;
  c.occupancy = 1.0;
  for (const KernelSpec* k : kernels) {
    std::size_t wgs = k->fixed_group_size().value_or(size);
    c.assignment[k->id] = wgs;
    for (const auto& g : gpus) c.occupancy = std::min(c.occupancy, occupancy(g, *k, wgs));
  }
  return c;
}

bool better(const WgsCandidate& a, const WgsCandidate& b) {
  if (a.occupancy != b.occupancy) return a.occupancy > b.occupancy;
  return a.size > b.size;
}

std::vector<WgsCandidate> all_candidates(std::span<const GpuDeviceModel> gpus, const Sct& sct) {
  auto kernels = sct.kernels();
  bool any_free = std::any_of(kernels.begin(), kernels.end(), [](const KernelSpec* k) { return !k->fixed_wgs; });
  if (gpus.empty() || !any_free) {
    // Nothing to choose: every kernel runs at its mandated size (or 1 without GPUs).
    std::size_t size = 1;
    for (const KernelSpec* k : kernels)
      if (auto f = k->fixed_group_size()) size = *f;
    auto c = evaluate_size(gpus, kernels, size);
    if (gpus.empty()) c.occupancy = 1.0;
    return {c};
  }
  std::size_t lo = 1, hi = std::numeric_limits<std::size_t>::max();
  for (const auto& g : gpus) {
    lo = std::max(lo, g.min_work_group_size);
    hi = std::min(hi, g.max_work_group_size);
  }
  std::vector<WgsCandidate> out;
  for (std::size_t s = 1; s <= hi; s *= 2)
    if (s >= lo) out.push_back(evaluate_size(gpus, kernels, s));
  if (out.empty()) out.push_back(evaluate_size(gpus, kernels, lo));
  return out;
}

}  // namespace

GpuConfigurations gpu_get_configurations(std::span<const GpuDeviceModel> gpus, const Sct& sct,
                                         double occupancy_threshold, std::size_t overlap_cap) {
  if (!(occupancy_threshold > 0.0)) throw InvalidSpec("occupancy threshold must be positive");
  GpuConfigurations out;
  std::size_t cap = gpus.empty() ? 1 : std::max<std::size_t>(overlap_cap, 1);
  for (std::size_t o = 1; o <= cap; ++o) out.overlaps.push_back(o);

  auto candidates = all_candidates(gpus, sct);
  std::stable_sort(candidates.begin(), candidates.end(), better);
  for (const auto& c : candidates)
    if (c.occupancy >= occupancy_threshold) out.wgs_candidates.push_back(c);
  if (out.wgs_candidates.empty()) out.wgs_candidates.push_back(candidates.front());
  return out;
}

WgsAssignment best_occupancy_wgs(std::span<const GpuDeviceModel> gpus, const Sct& sct) {
  auto candidates = all_candidates(gpus, sct);
  return std::min_element(candidates.begin(), candidates.end(), better)->assignment;
}

std::size_t slot_wgs(const Slot& slot, const PlatformConfig& config, const KernelSpec& kernel) {
  if (auto f = kernel.fixed_group_size()) return *f;
  if (slot.type == DeviceType::Cpu) return 1;
  auto it = config.wgs_per_kernel.find(kernel.id);
  return it == config.wgs_per_kernel.end() ? 1 : it->second;
}

// ---------------------------------------------------------------------------
// Cost model

SimulatedPlatform::SimulatedPlatform(Fleet fleet, std::optional<NoiseModel> noise)
    : fleet_(std::move(fleet)), noise_(noise) {
  fleet_.validate();
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

double SimulatedPlatform::noise(const Slot& slot, std::string_view kernel, double clock) const {
  if (!noise_ || noise_->amplitude == 0.0) return 1.0;
  std::uint64_t h = splitmix64(noise_->seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(std::llround(clock * 1024.0)));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(slot.type) << 40) ^ (slot.device << 20) ^ slot.lane);
  for (char c : kernel) h = splitmix64(h ^ static_cast<unsigned char>(c));
  double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return 1.0 + noise_->amplitude * (2.0 * u - 1.0);
}

double SimulatedPlatform::kernel_time(const Slot& slot, const PlatformConfig& config, const KernelSpec& kernel,
                                      std::size_t elements, double clock) const {
  if (elements == 0) return 0.0;
  const double n = static_cast<double>(elements);
  if (slot.type == DeviceType::Cpu) {
    const CpuDeviceModel& cpu = *fleet_.cpu;
    auto it = cpu.base_throughput.find(kernel.id);
    if (it == cpu.base_throughput.end()) throw UnknownKernelThroughput(cpu.name, kernel.id);
    double per_subdevice = it->second * cpu.efficiency(config.fission) / static_cast<double>(cpu.subdevices(config.fission));
    return (n / per_subdevice * cpu.load_at(clock) + cpu.launch_overhead_ms) * noise(slot, kernel.id, clock);
  }
  const GpuDeviceModel& gpu = fleet_.gpus.at(slot.device);
  auto it = gpu.throughput.find(kernel.id);
  if (it == gpu.throughput.end()) throw UnknownKernelThroughput(gpu.name, kernel.id);
  std::size_t wgs = slot_wgs(slot, config, kernel);
  double factor = 1.0;
  if (auto w = gpu.wgs_efficiency.find(wgs); w != gpu.wgs_efficiency.end()) factor = w->second;
  double effective = it->second * occupancy(gpu, kernel, wgs) * factor;
  if (!(effective > 0.0)) return std::numeric_limits<double>::infinity();
  // The `overlap` concurrent executions share the device.
  double compute = n * static_cast<double>(config.overlap) / effective;
  return (compute + gpu.launch_overhead_ms) * noise(slot, kernel.id, clock);
}

double SimulatedPlatform::transfer_time(const Slot& slot, const PlatformConfig& config, std::size_t bytes) const {
  if (slot.type == DeviceType::Cpu || bytes == 0) return 0.0;
  const GpuDeviceModel& gpu = fleet_.gpus.at(slot.device);
  double o = static_cast<double>(config.overlap);
  double raw = static_cast<double>(bytes) * o / gpu.transfer_bandwidth;
  return raw * std::pow(1.0 - gpu.overlap_efficiency, o - 1.0);
}

std::vector<double> simulate_execution(const SimulatedPlatform& platform, std::span<const SlotWork> work,
                                       const PlatformConfig& config, const KernelSpec& kernel, double clock) {
  std::vector<double> out;
  out.reserve(work.size());
  for (const auto& w : work)
    out.push_back(platform.kernel_time(w.slot, config, kernel, w.elements, clock) +
                  platform.transfer_time(w.slot, config, w.bytes));
  return out;
}

}  // namespace skelrt
