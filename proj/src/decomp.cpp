#include "skelrt/decomp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "skelrt/error.hpp"

namespace skelrt {

const Partition& PartitionPlan::at(std::string_view vector, std::size_t slot) const {
  auto it = partitions.find(std::string(vector));
  if (it == partitions.end()) throw ShapeMismatch("plan has no vector '" + std::string(vector) + "'");
  return it->second.at(slot);
}

std::size_t granule(std::string_view vector, std::span<const KernelSpec* const> kernels,
                    const WgsAssignment& slot_wgs) {
  std::size_t g = 1;
  for (const KernelSpec* k : kernels) {
    const KernelArg* a = k->find_arg(vector);
    if (!a || !a->is_vector()) continue;
    std::size_t nu = k->nu(vector);
    if (a->epu % nu != 0) throw EpuNuViolation(k->id, std::string(vector));
    g = std::lcm(g, a->epu / nu);
    std::size_t wgs = 1;
    if (auto it = slot_wgs.find(k->id); it != slot_wgs.end())
      wgs = it->second;
    else if (auto fixed = k->fixed_group_size())
      wgs = *fixed;
    g = std::lcm(g, std::max<std::size_t>(wgs, 1));
  }
  return g;
}

namespace {

// Counts c_j >= 0 with sum c_j * g_j == residual, preferring `first`.
std::optional<std::vector<std::size_t>> cover_residual(std::size_t residual, std::span<const std::size_t> granules,
                                                       const std::vector<bool>& eligible, std::size_t first) {
  std::vector<std::size_t> order;
  order.push_back(first);
  for (std::size_t j = 0; j < granules.size(); ++j)
    if (j != first) order.push_back(j);
  // reach[r] = slot whose granule was last added to reach r.
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> reach(residual + 1, kNone);
  reach[0] = 0;
  for (std::size_t r = 1; r <= residual; ++r)
    for (std::size_t j : order)
      if (eligible[j] && granules[j] <= r && reach[r - granules[j]] != kNone) {
        reach[r] = j;
        break;
      }
  if (reach[residual] == kNone) return std::nullopt;
  std::vector<std::size_t> counts(granules.size(), 0);
  for (std::size_t r = residual; r > 0; r -= granules[reach[r]]) ++counts[reach[r]];
  return counts;
}

}  // namespace

std::vector<std::size_t> apportion(std::size_t length, std::span<const double> fractions,
                                   std::span<const std::size_t> granules, std::size_t residue_slot,
                                   std::string_view vector) {
  const std::size_t p = fractions.size();
  if (p == 0 || granules.size() != p) throw InvalidSpec("apportionment needs one fraction and one granule per slot");
  double total = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw InvalidSpec("negative slot fraction");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidSpec("slot fractions must sum to 1");

  const std::string name = vector.empty() ? std::string("vector") : "vector '" + std::string(vector) + "'";
  std::size_t minimal = 0;
  for (std::size_t j = 0; j < p; ++j)
    if (fractions[j] > 0.0) minimal += granules[j];
  if (length < minimal)
    throw InfeasiblePartition(name + " of length " + std::to_string(length) +
                              " is shorter than the sum of per-slot granules (" + std::to_string(minimal) + ")");

  std::vector<std::size_t> lengths(p, 0);
  std::vector<double> remainders(p, 0.0);
  std::size_t assigned = 0;
  const double L = static_cast<double>(length);
  for (std::size_t j = 0; j < p; ++j) {
    double target = fractions[j] * L;
    double g = static_cast<double>(granules[j]);
    // Tolerate representation error just below an exact multiple.
    auto k = static_cast<std::size_t>(std::floor(target / g + 1e-9));
    lengths[j] = std::min(k * granules[j], length);
    remainders[j] = target - static_cast<double>(lengths[j]);
    assigned += lengths[j];
  }
  if (assigned > length) {
    // Only reachable through the tolerance above; take the excess back from the largest slot.
    auto big = static_cast<std::size_t>(std::max_element(lengths.begin(), lengths.end()) - lengths.begin());
    while (assigned > length && lengths[big] >= granules[big]) {
      lengths[big] -= granules[big];
      assigned -= granules[big];
    }
  }
  std::size_t residual = length - assigned;

  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t j : order) {
    if (fractions[j] > 0.0 && remainders[j] > 0.0 && granules[j] <= residual) {
      lengths[j] += granules[j];
      residual -= granules[j];
    }
  }
  if (residual == 0) return lengths;

  std::size_t target_slot = residue_slot < p && fractions[residue_slot] > 0.0
                                ? residue_slot
                                : static_cast<std::size_t>(std::max_element(fractions.begin(), fractions.end()) -
                                                           fractions.begin());
  std::vector<bool> eligible(p);
  for (std::size_t j = 0; j < p; ++j) eligible[j] = fractions[j] > 0.0;
  auto counts = cover_residual(residual, granules, eligible, target_slot);
  if (!counts)
    throw InfeasiblePartition(name + " of length " + std::to_string(length) + ": " + std::to_string(residual) +
                              " trailing elements cannot be expressed in multiples of the slot granules");
  for (std::size_t j = 0; j < p; ++j) lengths[j] += (*counts)[j] * granules[j];
  return lengths;
}

PartitionPlan partition_input(const Sct& sct, const PartitionRequest& request) {
  const std::size_t p = request.fractions.size();
  if (request.slot_wgs.size() != p) throw InvalidSpec("partition request needs one work-group assignment per slot");

  PartitionPlan plan;
  plan.parallelism = p;

  // Partitioned vectors of equal length are split identically, so kernels
  // reading one and writing another see aligned partitions.
  std::map<std::size_t, std::vector<std::string>> groups;
  for (const auto& v : sct.vectors()) {
    auto it = request.vector_lengths.find(v.name);
    if (it == request.vector_lengths.end()) throw ShapeMismatch("no length given for vector '" + v.name + "'");
    const std::size_t length = it->second;
    if (v.transfer == TransferMode::Copy) {
      auto& parts = plan.partitions[v.name];
      for (std::size_t j = 0; j < p; ++j) parts.push_back({0, length, j});
      continue;
    }
    groups[length].push_back(v.name);
  }

  for (const auto& [length, names] : groups) {
    std::vector<std::size_t> joint(p, 1);
    for (const auto& name : names) {
      auto kernels = sct.kernels_touching(name);
      for (std::size_t j = 0; j < p; ++j) joint[j] = std::lcm(joint[j], granule(name, kernels, request.slot_wgs[j]));
    }
    auto lengths = apportion(length, request.fractions, joint, request.residue_slot, names.front());
    std::vector<Partition> parts;
    std::size_t offset = 0;
    for (std::size_t j = 0; j < p; ++j) {
      parts.push_back({offset, lengths[j], j});
      offset += lengths[j];
    }
    for (const auto& name : names) {
      plan.partitions[name] = parts;
      plan.granularity[name] = joint;
    }
  }
  return plan;
}

}  // namespace skelrt
