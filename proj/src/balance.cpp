#include "skelrt/balance.hpp"

#include <algorithm>
#include <cmath>

#include "skelrt/error.hpp"

namespace skelrt {

namespace {
// Gap below which the probe is considered to sit on the interval boundary.
constexpr double kBoundaryEps = 1e-9;
constexpr double kMaxTransferable = 0.5;
}  // namespace

void BalancerParams::validate() const {
  if (!(weight > 0.0 && weight < 1.0)) throw InvalidSpec("balancer weight must lie in (0, 1)");
  if (!(max_dev > 0.0 && max_dev <= 1.0)) throw InvalidSpec("balancer maxDev must lie in (0, 1]");
  if (!(c_factor > 0.0)) throw InvalidSpec("balancer cFactor must be positive");
  if (!(trigger_threshold > 0.0 && trigger_threshold <= 1.0))
    throw InvalidSpec("balancer trigger threshold must lie in (0, 1]");
  if (!(fallback_transferable > 0.0 && fallback_transferable <= kMaxTransferable))
    throw InvalidSpec("balancer fallback transferable must lie in (0, 0.5]");
}

int is_unbalanced(double dev, const BalancerParams& params) { return dev / params.c_factor < params.max_dev ? 1 : 0; }

double lbt_update(double prev_lbt, double dev, const BalancerParams& params) {
  return is_unbalanced(dev, params) * params.weight + prev_lbt * (1.0 - params.weight);
}

bool should_balance(double lbt, const BalancerParams& params) { return lbt >= params.trigger_threshold; }

std::string_view to_string(AbsPhase p) { return p == AbsPhase::Shifting ? "shifting" : "refining"; }

std::string_view to_string(AbsEvent e) {
  switch (e) {
    case AbsEvent::Trigger: return "trigger";
    case AbsEvent::Shift: return "shift";
    case AbsEvent::Double: return "double";
    case AbsEvent::Refine: return "refine";
    case AbsEvent::Hold: return "hold";
  }
  return "hold";
}

AbsState abs_start(const Split& current, std::optional<Split> derived_reference, const BalancerParams& params) {
  AbsState s;
  s.transferable = params.fallback_transferable;
  if (derived_reference) {
    double gap = std::abs(current.cpu - derived_reference->cpu);
    if (gap > kBoundaryEps) s.transferable = std::min(gap, kMaxTransferable);
  }
  // A degenerate interval: the first move is always a shift.
  s.lo = s.hi = std::clamp(current.cpu, 0.0, 1.0);
  return s;
}

AbsStep abs_step(const AbsState& state, const TypeTimes& times, const Split& current) {
  AbsStep out{current, state, AbsEvent::Hold};
  if (times.cpu == times.gpu) return out;
  const int d = times.cpu > times.gpu ? -1 : +1;  // toward the faster type
  const double x = std::clamp(current.cpu, 0.0, 1.0);
  AbsState& s = out.state;
  ++s.steps;

  const double boundary = d < 0 ? s.lo : s.hi;
  double next = x;
  if (std::abs(boundary - x) > kBoundaryEps && (d < 0 ? boundary < x : boundary > x)) {
    // Balance point lies strictly inside the interval: bisect toward it.
    next = 0.5 * (x + boundary);
    if (d < 0)
      s.hi = x;
    else
      s.lo = x;
    s.transferable = std::abs(next - x);
    s.shift_count = 0;
    s.phase = AbsPhase::Refining;
    out.event = AbsEvent::Refine;
  } else {
    // At the boundary: slide the interval one transferable-width sideways.
    next = std::clamp(x + d * s.transferable, 0.0, 1.0);
    if (d < 0) {
      s.hi = x;
      s.lo = next;
    } else {
      s.lo = x;
      s.hi = next;
    }
    s.shift_count = (s.last_direction == d && s.phase == AbsPhase::Shifting) ? s.shift_count + 1 : 1;
    s.phase = AbsPhase::Shifting;
    out.event = AbsEvent::Shift;
    if (s.shift_count > 2) {
      s.transferable = std::min(2.0 * s.transferable, kMaxTransferable);
      out.event = AbsEvent::Double;
    }
  }
  s.last_direction = d;
  out.split = Split::from_cpu(next);
  return out;
}

}  // namespace skelrt
