#pragma once

// Locality-aware domain decomposition. Every partitioned vector is split into
// one contiguous partition per parallel execution (slot) such that each
// partition length is a multiple of epu(V)/nu(V,K) and of wgs_j(K) for every
// kernel K touching V.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "skelrt/platform.hpp"
#include "skelrt/sct.hpp"

namespace skelrt {

struct Partition {
  std::size_t offset = 0;
  std::size_t length = 0;
  std::size_t slot = 0;
};

struct PartitionPlan {
  std::size_t parallelism = 0;
  /// Per vector, one partition per slot, ordered by slot. COPY vectors get
  /// the whole vector on every slot.
  std::map<std::string, std::vector<Partition>> partitions;
  /// Per partitioned vector, the granule each slot's length is a multiple of.
  std::map<std::string, std::vector<std::size_t>> granularity;

  const Partition& at(std::string_view vector, std::size_t slot) const;
};

/// Least g such that every multiple of g satisfies the divisibility
/// constraints of all `kernels` on `vector` for one slot.
std::size_t granule(std::string_view vector, std::span<const KernelSpec* const> kernels, const WgsAssignment& slot_wgs);

struct PartitionRequest {
  std::map<std::string, std::size_t> vector_lengths;
  std::vector<double> fractions;          // one per slot, summing to 1
  std::vector<WgsAssignment> slot_wgs;    // one per slot
  std::size_t residue_slot = 0;           // receives granules left after apportionment
};

PartitionPlan partition_input(const Sct& sct, const PartitionRequest& request);

/// Largest-remainder apportionment of `length` into per-slot multiples of
/// `granules`. Exposed for testing; partition_input applies it per vector group.
std::vector<std::size_t> apportion(std::size_t length, std::span<const double> fractions,
                                   std::span<const std::size_t> granules, std::size_t residue_slot,
                                   std::string_view vector = {});

}  // namespace skelrt
