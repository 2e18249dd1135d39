#pragma once

// Scenario files: device fleet, kernels, trees, run schedule and parameters.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "skelrt/engine.hpp"

namespace skelrt {

inline constexpr const char* kScenarioFormat = "skelrt-scenario";
inline constexpr int kScenarioVersion = 1;

struct ScheduleEntry {
  std::string sct;  // name in Scenario::scts
  RunArguments args;
  std::size_t repeat = 1;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  Fleet fleet;
  std::map<std::string, KernelSpec> kernels;
  std::map<std::string, Sct> scts;
  std::vector<ScheduleEntry> schedule;
  EngineOptions options;
  double noise_amplitude = 0.0;

  /// Engine options with the noise model seeded from `seed`.
  EngineOptions engine_options() const;
  std::size_t total_runs() const;
};

/// Throws InvalidSpec whose message starts with the path of the failing field.
Scenario parse_scenario(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace skelrt
