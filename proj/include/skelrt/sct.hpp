#pragma once

// Skeleton computation trees and the kernel interface metadata that drives
// decomposition and scheduling.

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace skelrt {

enum class ArgKind { Vector, Scalar };
enum class Mutability { Immutable, Mutable };
enum class MemorySpace { Global, Local };
enum class TransferMode { Partition, Copy };
enum class Trait { None, Size, Offset };

std::string_view to_string(ArgKind);
std::string_view to_string(Mutability);
std::string_view to_string(MemorySpace);
std::string_view to_string(TransferMode);
std::string_view to_string(Trait);

struct KernelArg {
  std::string name;
  ArgKind kind = ArgKind::Vector;
  Mutability mutability = Mutability::Immutable;
  MemorySpace memory = MemorySpace::Global;
  std::size_t element_width = 4;  // bytes, vectors only
  TransferMode transfer = TransferMode::Partition;
  std::size_t epu = 1;            // elementary partitioning unit, in elements
  Trait trait = Trait::None;      // scalars only

  static KernelArg vector_in(std::string name, std::size_t width = 4, std::size_t epu = 1);
  static KernelArg vector_out(std::string name, std::size_t width = 4, std::size_t epu = 1);
  static KernelArg copy_in(std::string name, std::size_t width = 4);
  static KernelArg scalar(std::string name, Trait trait = Trait::None);

  bool is_vector() const noexcept { return kind == ArgKind::Vector; }
  bool is_partitioned() const noexcept { return is_vector() && transfer == TransferMode::Partition; }
  bool is_mutable() const noexcept { return mutability == Mutability::Mutable; }

  void validate() const;
};

/// What a kernel body sees for one partition on one execution slot.
struct KernelInvocation {
  std::size_t slot = 0;
  std::map<std::string, std::span<double>> outputs;
  std::map<std::string, std::span<const double>> inputs;
  std::map<std::string, double> scalars;
};

using KernelBody = std::function<void(KernelInvocation&)>;

struct KernelResources {
  std::size_t registers_per_thread = 0;
  std::size_t local_mem_per_group = 0;  // bytes
};

struct KernelSpec {
  std::string id;
  std::string label;  // opaque kernel file/function name
  std::vector<KernelArg> args;
  std::map<std::string, std::size_t> work_per_thread;  // nu(V, K), default 1
  std::optional<std::vector<std::size_t>> fixed_wgs;
  KernelResources resources;
  std::size_t dimensionality = 1;
  KernelBody body;  // optional host emulation of the kernel

  std::size_t nu(std::string_view vector) const;
  const KernelArg* find_arg(std::string_view name) const;
  /// Total work-group size when the kernel mandates one.
  std::optional<std::size_t> fixed_group_size() const;
  /// First partitioned vector; it sizes the kernel's work per partition.
  const KernelArg* primary_vector() const;

  /// Throws InvalidSpec, or EpuNuViolation when epu(V) mod nu(V, K) != 0.
  void validate() const;
};

/// Loop state: the host-side stop condition, the items refreshed each
/// iteration, and whether the refresh needs all slots to synchronize.
struct LoopState {
  using Condition = std::function<bool(std::size_t iteration, const std::map<std::string, double>& state)>;

  std::string name;
  Condition condition;             // true: run another iteration
  std::string condition_label;     // part of the tree id, since functions cannot be hashed
  std::vector<std::string> updated_items;
  bool global_sync = false;
  std::size_t max_iterations = 1'000'000;

  static LoopState fixed(std::string name, std::size_t iterations, bool global_sync = false,
                         std::vector<std::string> updated_items = {});
};

struct HostReducer {
  enum class Op { Add, Sub, Mul, Div, User };

  Op op = Op::Add;
  std::string name;
  std::function<double(double, double)> combine;  // User only
  bool associative = true;
  std::string target;  // reduced vector; empty selects the map stage's last mutable partitioned output

  static HostReducer add(std::string target = {});
  static HostReducer sub(std::string target = {});
  static HostReducer mul(std::string target = {});
  static HostReducer div(std::string target = {});
  static HostReducer user(std::string name, std::function<double(double, double)> fn, bool associative,
                          std::string target = {});

  double apply(double lhs, double rhs) const;
};

std::string_view to_string(HostReducer::Op);

/// Metadata of one vector as seen across the whole tree.
struct VectorInfo {
  std::string name;
  std::size_t element_width = 4;
  TransferMode transfer = TransferMode::Partition;
  std::size_t epu = 1;
  bool written = false;
};

/// Immutable skeleton computation tree. Copies share structure.
class Sct {
 public:
  enum class Kind { Leaf, Pipeline, Loop, Map, MapReduce };

  Kind kind() const noexcept;
  /// SHA-256 of the canonical serialization, hex encoded.
  const std::string& id() const noexcept;

  const KernelSpec& kernel() const;            // Leaf
  std::span<const Sct> children() const;       // stages / body / tree / map (+ reduction tree)
  const LoopState& loop_state() const;         // Loop
  const HostReducer* host_reducer() const;     // MapReduce with a host reduction, else null

  /// Distinct kernels in depth-first order.
  std::vector<const KernelSpec*> kernels() const;
  /// Distinct vectors in first-use order.
  std::vector<VectorInfo> vectors() const;
  /// Distinct scalar args.
  std::vector<KernelArg> scalars() const;
  std::vector<const KernelSpec*> kernels_touching(std::string_view vector) const;
  bool has_bodies() const;

  const std::string& canonical() const noexcept;

  friend bool operator==(const Sct& a, const Sct& b) { return a.id() == b.id(); }

  friend Sct leaf(KernelSpec kernel);
  friend Sct pipeline(std::vector<Sct> stages);
  friend Sct loop(Sct body, LoopState state);
  friend Sct map(Sct tree);
  friend Sct map_reduce(Sct map_stage, HostReducer reduction);
  friend Sct map_reduce(Sct map_stage, Sct reduction);

 private:
  struct Node;
  explicit Sct(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
};

Sct leaf(KernelSpec kernel);
Sct pipeline(std::vector<Sct> stages);
template <typename... Stages>
Sct pipeline(Sct first, Stages... rest) {
  return pipeline(std::vector<Sct>{std::move(first), std::move(rest)...});
}
Sct loop(Sct body, LoopState state);
Sct map(Sct tree);
Sct map_reduce(Sct map_stage, HostReducer reduction);
Sct map_reduce(Sct map_stage, Sct reduction);

/// Sequential single-device kernel order: depth-first, loop bodies repeated
/// per the count given for each loop name.
std::vector<std::string> kernel_execution_order(const Sct& sct,
                                                const std::map<std::string, std::size_t>& loop_iteration_counts);

std::string sha256_hex(std::string_view data);

}  // namespace skelrt
