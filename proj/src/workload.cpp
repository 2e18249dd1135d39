#include "skelrt/workload.hpp"

#include <numeric>

#include "skelrt/error.hpp"

namespace skelrt {

std::string_view to_string(FpPrecision p) {
  switch (p) {
    case FpPrecision::Single: return "single";
    case FpPrecision::Double: return "double";
    case FpPrecision::None: return "none";
  }
  return "none";
}

FpPrecision parse_precision(std::string_view s) {
  if (s == "single") return FpPrecision::Single;
  if (s == "double") return FpPrecision::Double;
  if (s == "none") return FpPrecision::None;
  throw InvalidSpec("unknown floating-point precision '" + std::string(s) + "'");
}

std::size_t WorkloadId::total_elements() const noexcept {
  return std::accumulate(elements_per_dimension.begin(), elements_per_dimension.end(), std::size_t{1},
                         std::multiplies<>());
}

void WorkloadId::validate() const {
  if (elements_per_dimension.empty()) throw InvalidSpec("workload has no dimensions");
  for (auto n : elements_per_dimension)
    if (n == 0) throw InvalidSpec("workload dimension with zero elements");
}

std::string to_string(const WorkloadId& w) {
  std::string out;
  for (std::size_t i = 0; i < w.elements_per_dimension.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(w.elements_per_dimension[i]);
  }
  out += '/';
  out += to_string(w.precision);
  return out;
}

std::string_view to_string(DeviceType t) { return t == DeviceType::Cpu ? "cpu" : "gpu"; }

}  // namespace skelrt
