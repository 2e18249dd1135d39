#pragma once

// Profile construction: an ordered search over (CPU fission, GPU overlap,
// work-group sizes) with a binary-search workload distribution generator in
// the innermost loop.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "skelrt/kb.hpp"
#include "skelrt/platform.hpp"
#include "skelrt/workload.hpp"

namespace skelrt {

struct TunerParams {
  double occupancy_threshold = 0.8;
  /// Absolute time precision in ms; unset means 1% of the first measured time.
  std::optional<double> precision;
  std::size_t number_executions = 3;
  std::size_t overlap_cap = kDefaultOverlapCap;
  /// Stop the split search on the first non-improving probe and measure
  /// precision against the stored best, instead of bracketing the balance point.
  bool literal_breaks = false;

  void validate() const;
};

/// transferableSize(n, size) = size / 2^n
double transferable_size(std::size_t n, double size);

struct WldGenState {
  double bound_cpu = 0.0;
  double bound_gpu = 0.0;
  double transferable = 1.0;
  std::size_t iteration = 0;
  double granule = 0.0;  // smallest share change worth probing
};

/// Next candidate: the transferable share split evenly on top of the bound shares.
Split wld_next(const WldGenState& state);

/// Binds half of the transferable share to the faster type (ties go to the GPU).
WldGenState wld_feedback(const WldGenState& state, const TypeTimes& times);

/// Result of running the tree under one candidate configuration.
struct Evaluation {
  double time = 0.0;  // ms, best of the repeated executions
  TypeTimes per_type;
};

/// What the search needs from the runtime: the configuration spaces of the
/// platforms and a way to execute the tree under a candidate.
class ProfileTarget {
 public:
  virtual ~ProfileTarget() = default;
  virtual bool has_cpu() const = 0;
  virtual bool has_gpu() const = 0;
  virtual std::vector<FissionLevel> cpu_configurations() const = 0;
  virtual GpuConfigurations gpu_configurations(double occupancy_threshold, std::size_t overlap_cap) const = 0;
  /// Share of the workload one granule represents under `config`.
  virtual double granule_share(const PlatformConfig& config) const = 0;
  virtual Evaluation evaluate(const PlatformConfig& config, const Split& split, std::size_t executions) = 0;
};

enum class SearchAction { Stored, Evaluated, PrecisionBreak, Exhausted, DiscardWgs, DiscardOverlap, DiscardFission };

std::string_view to_string(SearchAction a);

struct SearchRecord {
  FissionLevel fission = FissionLevel::NoFission;
  std::size_t overlap = 1;
  std::size_t wgs = 1;
  std::size_t inner_iteration = 0;
  Split split;
  double time = 0.0;
  double best_time = 0.0;  // stored best after this record
  SearchAction action = SearchAction::Evaluated;
};

struct ProfileResult {
  Profile profile;
  std::vector<SearchRecord> trace;
  double precision = 0.0;
  std::size_t evaluations = 0;
};

/// Runs the search and persists every improvement to `kb` tagged "built".
ProfileResult build_profile(const std::string& sct_id, const WorkloadId& workload, const TunerParams& params,
                            ProfileTarget& target, KnowledgeBase& kb);

}  // namespace skelrt
