#pragma once

// Shared fixtures, generators and independent oracles for the test suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "skelrt/decomp.hpp"
#include "skelrt/engine.hpp"
#include "skelrt/platform.hpp"
#include "skelrt/sct.hpp"
#include "skelrt/tuner.hpp"

namespace skelrt::test {

/// splitmix64 stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [lo, hi].
  std::size_t uniform(std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(next() % (hi - lo + 1)); }
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double real(double lo, double hi) { return lo + (hi - lo) * unit(); }
  bool coin() { return next() & 1; }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[uniform(0, v.size() - 1)];
  }

  /// Random fractions summing to 1; some may be zero when `allow_zero`.
  std::vector<double> fractions(std::size_t n, bool allow_zero = false) {
    std::vector<double> w(n);
    double sum = 0.0;
    for (auto& x : w) {
      x = allow_zero && uniform(0, 4) == 0 ? 0.0 : real(0.05, 1.0);
      sum += x;
    }
    if (sum == 0.0) {
      w[0] = 1.0;
      sum = 1.0;
    }
    for (auto& x : w) x /= sum;
    return w;
  }

 private:
  std::uint64_t state_;
};

inline KernelSpec kernel(std::string id, std::vector<KernelArg> args) {
  KernelSpec k;
  k.id = std::move(id);
  k.label = k.id;
  k.args = std::move(args);
  return k;
}

/// CPU with no fission levels plus one GPU; both at the given throughput for `kernels`.
inline Fleet linear_fleet(double cpu_tp, double gpu_tp, const std::vector<std::string>& kernels,
                          double bandwidth = 1e12) {
  Fleet f;
  CpuDeviceModel cpu;
  for (const auto& k : kernels) cpu.base_throughput[k] = cpu_tp;
  f.cpu = cpu;
  GpuDeviceModel gpu;
  gpu.name = "gpu0";
  gpu.min_work_group_size = 1;
  gpu.max_work_group_size = 1;
  gpu.transfer_bandwidth = bandwidth;
  for (const auto& k : kernels) gpu.throughput[k] = gpu_tp;
  f.gpus.push_back(gpu);
  return f;
}

/// Occupancy computed straight from the three resource limits.
inline double occupancy_oracle(std::size_t max_wg, std::size_t lmem_cu, std::size_t regs_cu, std::size_t lmem_group,
                               std::size_t regs_thread, std::size_t wgs) {
  std::size_t by_slots = max_wg;
  std::size_t by_lmem = lmem_group == 0 ? max_wg : std::min(max_wg, lmem_cu / lmem_group);
  std::size_t by_regs = regs_thread == 0 ? max_wg : std::min(max_wg, regs_cu / (regs_thread * wgs));
  return static_cast<double>(std::min({by_slots, by_lmem, by_regs})) / static_cast<double>(max_wg);
}

/// Least positive g up to `limit` such that every constraint divides g.
inline std::size_t least_common_size(const std::vector<std::size_t>& divisors, std::size_t limit = 1 << 16) {
  for (std::size_t g = 1; g <= limit; ++g)
    if (std::all_of(divisors.begin(), divisors.end(), [&](std::size_t d) { return g % d == 0; })) return g;
  return 0;
}

/// Exhaustive minimum of `time(cpu_share)` over splits that move whole granules.
template <typename F>
std::pair<double, double> brute_force_split(std::size_t length, std::size_t granule, F&& time) {
  double best_share = 0.0, best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c <= length; c += granule) {
    double share = static_cast<double>(c) / static_cast<double>(length);
    double t = time(share);
    if (t < best) {
      best = t;
      best_share = share;
    }
  }
  return {best_share, best};
}

/// Synthetic profile target. The CPU processes `cpu_rate(fission)` shares per
/// ms and the GPU `gpu_rate(overlap, wgs)`; both pay `offset(config)`.
class SyntheticTarget : public ProfileTarget {
 public:
  std::vector<FissionLevel> levels{FissionLevel::NoFission};
  GpuConfigurations gpu{{1}, {WgsCandidate{1, {{"k", 1}}, 1.0}}};
  bool cpu = true, gpu_present = true;
  double granule = 1.0 / 1024;
  std::function<double(FissionLevel)> cpu_rate = [](FissionLevel) { return 1.0; };
  std::function<double(std::size_t, std::size_t)> gpu_rate = [](std::size_t, std::size_t) { return 1.0; };
  std::function<double(const PlatformConfig&)> offset = [](const PlatformConfig&) { return 0.0; };
  std::vector<std::pair<PlatformConfig, Split>> calls;

  bool has_cpu() const override { return cpu; }
  bool has_gpu() const override { return gpu_present; }
  std::vector<FissionLevel> cpu_configurations() const override { return levels; }
  GpuConfigurations gpu_configurations(double, std::size_t) const override { return gpu; }
  double granule_share(const PlatformConfig&) const override { return granule; }

  TypeTimes times(const PlatformConfig& c, const Split& s) const {
    std::size_t wgs = c.wgs_per_kernel.empty() ? 1 : c.wgs_per_kernel.begin()->second;
    double off = offset(c);
    return {s.cpu / cpu_rate(c.fission) + off, s.gpu / gpu_rate(c.overlap, wgs) + off};
  }
  double time(const PlatformConfig& c, const Split& s) const {
    auto t = times(c, s);
    return std::max(s.cpu > 0 ? t.cpu : 0.0, s.gpu > 0 ? t.gpu : 0.0);
  }

  Evaluation evaluate(const PlatformConfig& c, const Split& s, std::size_t) override {
    calls.emplace_back(c, s);
    return {time(c, s), times(c, s)};
  }

  /// Every (fission, overlap, wgs) configuration the target exposes.
  std::vector<PlatformConfig> all_configs() const {
    std::vector<PlatformConfig> out;
    for (auto f : levels)
      for (auto o : gpu.overlaps)
        for (const auto& w : gpu.wgs_candidates) out.push_back({f, o, w.assignment});
    return out;
  }
};

/// Exhaustive optimum over all configurations and granule-resolution splits.
inline std::pair<PlatformConfig, double> brute_force_profile(const SyntheticTarget& t) {
  PlatformConfig best_cfg;
  double best = std::numeric_limits<double>::infinity();
  const auto steps = static_cast<std::size_t>(std::llround(1.0 / t.granule));
  for (const auto& c : t.all_configs()) {
    auto [share, time] = brute_force_split(steps, 1, [&](double x) { return t.time(c, Split::from_cpu(x)); });
    (void)share;
    if (time < best) {
      best = time;
      best_cfg = c;
    }
  }
  return {best_cfg, best};
}

}  // namespace skelrt::test
