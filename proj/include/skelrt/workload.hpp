#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace skelrt {

enum class FpPrecision { Single, Double, None };

std::string_view to_string(FpPrecision p);
FpPrecision parse_precision(std::string_view s);

/// Workload characterization used as half of a knowledge-base key.
struct WorkloadId {
  std::vector<std::size_t> elements_per_dimension;
  FpPrecision precision = FpPrecision::None;

  std::size_t dimensions() const noexcept { return elements_per_dimension.size(); }
  std::size_t total_elements() const noexcept;

  /// Throws InvalidSpec on zero dimensions or zero-sized dimensions.
  void validate() const;

  friend auto operator<=>(const WorkloadId&, const WorkloadId&) = default;
  friend bool operator==(const WorkloadId&, const WorkloadId&) = default;
};

std::string to_string(const WorkloadId& w);

/// Share of the workload per device type. cpu + gpu == 1.
struct Split {
  double cpu = 0.5;
  double gpu = 0.5;

  static Split from_cpu(double cpu_share) { return {cpu_share, 1.0 - cpu_share}; }

  friend bool operator==(const Split&, const Split&) = default;
};

enum class DeviceType { Cpu, Gpu };

std::string_view to_string(DeviceType t);

/// Aggregate completion time per device type for one execution.
struct TypeTimes {
  double cpu = 0.0;
  double gpu = 0.0;
};

}  // namespace skelrt
