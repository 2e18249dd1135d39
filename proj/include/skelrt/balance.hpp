#pragma once

// Dynamic load balancing: the load-balancing threshold (lbt) recurrence and
// the Adaptive Binary Search over the CPU share.

#include <optional>
#include <string_view>

#include "skelrt/workload.hpp"

namespace skelrt {

struct BalancerParams {
  double weight = 2.0 / 3.0;        // weight of the latest run against history
  double max_dev = 0.85;            // a run is balanced when dev / c_factor >= max_dev
  double c_factor = 1.0;
  double trigger_threshold = 0.95;  // lbt at or above this means "unbalanced"
  double fallback_transferable = 0.125;

  void validate() const;
};

/// 1 when the run is unbalanced. `dev` is the best-to-worst time ratio.
int is_unbalanced(double dev, const BalancerParams& params);

/// lbt(n) = isUnbalanced(dev) * weight + lbt(n-1) * (1 - weight)
double lbt_update(double prev_lbt, double dev, const BalancerParams& params);

bool should_balance(double lbt, const BalancerParams& params);

enum class AbsPhase { Shifting, Refining };
enum class AbsEvent { Trigger, Shift, Double, Refine, Hold };

std::string_view to_string(AbsPhase);
std::string_view to_string(AbsEvent);

struct AbsState {
  double lo = 0.0;           // interval of CPU share under inspection
  double hi = 1.0;
  double transferable = 0.125;
  int shift_count = 0;       // signed: consecutive same-direction shifts
  int last_direction = 0;    // -1 toward GPU, +1 toward CPU, 0 before the first step
  AbsPhase phase = AbsPhase::Refining;
  std::size_t steps = 0;
};

/// Opens a session around `current`. The first step size is the gap to the
/// derived reference when one exists and differs, else the fallback share.
AbsState abs_start(const Split& current, std::optional<Split> derived_reference, const BalancerParams& params);

struct AbsStep {
  Split split;
  AbsState state;
  AbsEvent event = AbsEvent::Hold;
};

/// Moves work from the slower to the faster device type.
AbsStep abs_step(const AbsState& state, const TypeTimes& times, const Split& current);

}  // namespace skelrt
