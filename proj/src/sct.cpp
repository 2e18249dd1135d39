#include "skelrt/sct.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <set>
#include <utility>

#include "skelrt/error.hpp"

namespace skelrt {

std::string_view to_string(ArgKind k) { return k == ArgKind::Vector ? "vector" : "scalar"; }
std::string_view to_string(Mutability m) { return m == Mutability::Mutable ? "mutable" : "immutable"; }
std::string_view to_string(MemorySpace m) { return m == MemorySpace::Local ? "local" : "global"; }
std::string_view to_string(TransferMode t) { return t == TransferMode::Copy ? "COPY" : "PARTITION"; }

std::string_view to_string(Trait t) {
  switch (t) {
    case Trait::Size: return "SIZE";
    case Trait::Offset: return "OFFSET";
    case Trait::None: break;
  }
  return "NONE";
}

std::string_view to_string(HostReducer::Op op) {
  switch (op) {
    case HostReducer::Op::Add: return "ADD";
    case HostReducer::Op::Sub: return "SUB";
    case HostReducer::Op::Mul: return "MUL";
    case HostReducer::Op::Div: return "DIV";
    case HostReducer::Op::User: return "USER";
  }
  return "USER";
}

// ---------------------------------------------------------------------------
// KernelArg / KernelSpec

KernelArg KernelArg::vector_in(std::string name, std::size_t width, std::size_t epu) {
  KernelArg a;
  a.name = std::move(name);
  a.element_width = width;
  a.epu = epu;
  return a;
}

KernelArg KernelArg::vector_out(std::string name, std::size_t width, std::size_t epu) {
  KernelArg a = vector_in(std::move(name), width, epu);
  a.mutability = Mutability::Mutable;
  return a;
}

KernelArg KernelArg::copy_in(std::string name, std::size_t width) {
  KernelArg a = vector_in(std::move(name), width);
  a.transfer = TransferMode::Copy;
  return a;
}

KernelArg KernelArg::scalar(std::string name, Trait trait) {
  KernelArg a;
  a.name = std::move(name);
  a.kind = ArgKind::Scalar;
  a.element_width = 0;
  a.trait = trait;
  return a;
}

void KernelArg::validate() const {
  if (name.empty()) throw InvalidSpec("kernel argument without a name");
  if (trait != Trait::None && kind != ArgKind::Scalar)
    throw InvalidSpec("argument '" + name + "': traits bind scalars only");
  if (kind == ArgKind::Vector) {
    if (epu < 1) throw InvalidSpec("argument '" + name + "': epu must be at least 1");
    if (element_width < 1) throw InvalidSpec("argument '" + name + "': element width must be at least 1 byte");
    if (transfer == TransferMode::Copy && mutability == Mutability::Mutable)
      throw InvalidSpec("argument '" + name + "': mutable COPY vectors have no merge semantics");
  }
}

std::size_t KernelSpec::nu(std::string_view vector) const {
  auto it = work_per_thread.find(std::string(vector));
  return it == work_per_thread.end() ? 1 : it->second;
}

const KernelArg* KernelSpec::find_arg(std::string_view name) const {
  for (const auto& a : args)
    if (a.name == name) return &a;
  return nullptr;
}

std::optional<std::size_t> KernelSpec::fixed_group_size() const {
  if (!fixed_wgs) return std::nullopt;
  std::size_t total = 1;
  for (auto d : *fixed_wgs) total *= d;
  return total;
}

const KernelArg* KernelSpec::primary_vector() const {
  for (const auto& a : args)
    if (a.is_partitioned()) return &a;
  return nullptr;
}

void KernelSpec::validate() const {
  if (id.empty()) throw InvalidSpec("kernel without an id");
  if (dimensionality < 1 || dimensionality > 3)
    throw InvalidSpec("kernel '" + id + "': dimensionality must be 1..3");
  std::set<std::string> names;
  for (const auto& a : args) {
    a.validate();
    if (!names.insert(a.name).second) throw InvalidSpec("kernel '" + id + "': duplicate argument '" + a.name + "'");
  }
  for (const auto& [name, nu] : work_per_thread) {
    const KernelArg* a = find_arg(name);
    if (!a || !a->is_vector())
      throw InvalidSpec("kernel '" + id + "': work-per-thread given for unknown vector '" + name + "'");
    if (nu < 1) throw InvalidSpec("kernel '" + id + "': work-per-thread must be at least 1");
  }
  if (fixed_wgs) {
    if (fixed_wgs->size() != dimensionality)
      throw InvalidSpec("kernel '" + id + "': fixed work-group size needs one entry per dimension");
    for (auto d : *fixed_wgs)
      if (d < 1) throw InvalidSpec("kernel '" + id + "': fixed work-group size entries must be >= 1");
  }
  for (const auto& a : args)
    if (a.is_partitioned() && a.epu % nu(a.name) != 0) throw EpuNuViolation(id, a.name);
}

// ---------------------------------------------------------------------------
// LoopState / HostReducer

LoopState LoopState::fixed(std::string name, std::size_t iterations, bool global_sync,
                           std::vector<std::string> updated_items) {
  LoopState s;
  s.name = std::move(name);
  s.condition = [iterations](std::size_t it, const std::map<std::string, double>&) { return it < iterations; };
  s.condition_label = "fixed:" + std::to_string(iterations);
  s.updated_items = std::move(updated_items);
  s.global_sync = global_sync;
  return s;
}

namespace {
HostReducer builtin(HostReducer::Op op, bool associative, std::string target) {
  HostReducer r;
  r.op = op;
  r.name = std::string(to_string(op));
  r.associative = associative;
  r.target = std::move(target);
  return r;
}
}  // namespace

HostReducer HostReducer::add(std::string target) { return builtin(Op::Add, true, std::move(target)); }
HostReducer HostReducer::sub(std::string target) { return builtin(Op::Sub, false, std::move(target)); }
HostReducer HostReducer::mul(std::string target) { return builtin(Op::Mul, true, std::move(target)); }
HostReducer HostReducer::div(std::string target) { return builtin(Op::Div, false, std::move(target)); }

HostReducer HostReducer::user(std::string name, std::function<double(double, double)> fn, bool associative,
                              std::string target) {
  HostReducer r = builtin(Op::User, associative, std::move(target));
  r.name = std::move(name);
  r.combine = std::move(fn);
  return r;
}

double HostReducer::apply(double lhs, double rhs) const {
  switch (op) {
    case Op::Add: return lhs + rhs;
    case Op::Sub: return lhs - rhs;
    case Op::Mul: return lhs * rhs;
    case Op::Div: return lhs / rhs;
    case Op::User: return combine(lhs, rhs);
  }
  return lhs;
}

// ---------------------------------------------------------------------------
// Tree

struct Sct::Node {
  Kind kind = Kind::Leaf;
  std::optional<KernelSpec> kernel;
  std::vector<Sct> children;
  std::optional<LoopState> loop;
  std::optional<HostReducer> reducer;
  std::string canonical;
  std::string id;
};

Sct::Sct(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Sct::Kind Sct::kind() const noexcept { return node_->kind; }
const std::string& Sct::id() const noexcept { return node_->id; }
const std::string& Sct::canonical() const noexcept { return node_->canonical; }

const KernelSpec& Sct::kernel() const {
  if (!node_->kernel) throw InvalidSpec("not a leaf node");
  return *node_->kernel;
}

std::span<const Sct> Sct::children() const { return node_->children; }

const LoopState& Sct::loop_state() const {
  if (!node_->loop) throw InvalidSpec("not a loop node");
  return *node_->loop;
}

const HostReducer* Sct::host_reducer() const { return node_->reducer ? &*node_->reducer : nullptr; }

namespace {

std::string field(std::string_view s) { return std::to_string(s.size()) + ':' + std::string(s); }

std::string canonical_kernel(const KernelSpec& k) {
  std::string out = "K(" + field(k.id) + field(k.label) + "d" + std::to_string(k.dimensionality);
  out += ";r" + std::to_string(k.resources.registers_per_thread) + ";m" +
         std::to_string(k.resources.local_mem_per_group) + ";f";
  if (k.fixed_wgs)
    for (auto d : *k.fixed_wgs) out += std::to_string(d) + ',';
  out += ";a[";
  for (const auto& a : k.args) {
    out += field(a.name);
    out += std::string(to_string(a.kind)) + '/' + std::string(to_string(a.mutability)) + '/' +
           std::string(to_string(a.memory)) + '/' + std::to_string(a.element_width) + '/' +
           std::string(to_string(a.transfer)) + '/' + std::to_string(a.epu) + '/' +
           std::string(to_string(a.trait)) + '/' + std::to_string(k.nu(a.name)) + ';';
  }
  return out + "])";
}

void collect_kernels(const Sct& t, std::vector<const KernelSpec*>& out, std::set<std::string>& seen) {
  if (t.kind() == Sct::Kind::Leaf) {
    if (seen.insert(t.kernel().id).second) out.push_back(&t.kernel());
    return;
  }
  for (const auto& c : t.children()) collect_kernels(c, out, seen);
}

// Every kernel id maps to one declaration and every vector name to one shape.
void check_consistency(const std::vector<Sct>& parts) {
  std::map<std::string, std::string> kernel_forms;
  std::map<std::string, KernelArg> args;
  for (const auto& p : parts) {
    for (const KernelSpec* k : p.kernels()) {
      auto form = canonical_kernel(*k);
      auto [it, fresh] = kernel_forms.emplace(k->id, form);
      if (!fresh && it->second != form)
        throw InvalidSpec("kernel id '" + k->id + "' declared twice with different interfaces");
      for (const auto& a : k->args) {
        auto [ait, afresh] = args.emplace(a.name, a);
        if (afresh) continue;
        const KernelArg& b = ait->second;
        if (a.kind != b.kind) throw InvalidSpec("'" + a.name + "' is a vector in one kernel and a scalar in another");
        if (a.is_vector() && (a.element_width != b.element_width || a.transfer != b.transfer || a.epu != b.epu))
          throw InvalidSpec("vector '" + a.name + "' is declared with different width, transfer mode or epu");
      }
    }
  }
}

}  // namespace

std::vector<const KernelSpec*> Sct::kernels() const {
  std::vector<const KernelSpec*> out;
  std::set<std::string> seen;
  collect_kernels(*this, out, seen);
  return out;
}

std::vector<VectorInfo> Sct::vectors() const {
  std::vector<VectorInfo> out;
  for (const KernelSpec* k : kernels()) {
    for (const auto& a : k->args) {
      if (!a.is_vector()) continue;
      auto it = std::find_if(out.begin(), out.end(), [&](const VectorInfo& v) { return v.name == a.name; });
      if (it == out.end()) {
        out.push_back({a.name, a.element_width, a.transfer, a.epu, a.is_mutable()});
      } else {
        it->written = it->written || a.is_mutable();
      }
    }
  }
  return out;
}

std::vector<KernelArg> Sct::scalars() const {
  std::vector<KernelArg> out;
  std::set<std::string> seen;
  for (const KernelSpec* k : kernels())
    for (const auto& a : k->args)
      if (!a.is_vector() && seen.insert(a.name).second) out.push_back(a);
  return out;
}

std::vector<const KernelSpec*> Sct::kernels_touching(std::string_view vector) const {
  std::vector<const KernelSpec*> out;
  for (const KernelSpec* k : kernels())
    if (const KernelArg* a = k->find_arg(vector); a && a->is_vector()) out.push_back(k);
  return out;
}

bool Sct::has_bodies() const {
  for (const KernelSpec* k : kernels())
    if (k->body) return true;
  return false;
}

// The factories need Node access; they are friends of Sct.
Sct leaf(KernelSpec kernel) {
  kernel.validate();
  auto node = std::make_shared<Sct::Node>();
  node->kind = Sct::Kind::Leaf;
  node->canonical = canonical_kernel(kernel);
  node->id = sha256_hex(node->canonical);
  node->kernel = std::move(kernel);
  return Sct(std::move(node));
}

Sct pipeline(std::vector<Sct> stages) {
  if (stages.size() < 2) throw InvalidSpec("a pipeline needs at least two stages");
  check_consistency(stages);
  auto node = std::make_shared<Sct::Node>();
  node->kind = Sct::Kind::Pipeline;
  node->canonical = "P[";
  for (const auto& s : stages) node->canonical += s.canonical() + ',';
  node->canonical += ']';
  node->id = sha256_hex(node->canonical);
  node->children = std::move(stages);
  return Sct(std::move(node));
}

Sct loop(Sct body, LoopState state) {
  if (state.name.empty()) throw InvalidSpec("loop without a name");
  if (!state.condition) throw InvalidSpec("loop '" + state.name + "' has no condition");
  for (const auto& item : state.updated_items) {
    bool ok = false;
    for (const KernelSpec* k : body.kernels())
      if (const KernelArg* a = k->find_arg(item); a && a->is_mutable()) ok = true;
    if (!ok) throw InvalidSpec("loop '" + state.name + "' updates '" + item + "', which no body kernel writes");
  }
  auto node = std::make_shared<Sct::Node>();
  node->kind = Sct::Kind::Loop;
  node->canonical = "L{" + field(state.name) + field(state.condition_label) + (state.global_sync ? "S" : "A");
  for (const auto& item : state.updated_items) node->canonical += field(item);
  node->canonical += ';' + body.canonical() + '}';
  node->id = sha256_hex(node->canonical);
  node->children.push_back(std::move(body));
  node->loop = std::move(state);
  return Sct(std::move(node));
}

Sct map(Sct tree) {
  auto node = std::make_shared<Sct::Node>();
  node->kind = Sct::Kind::Map;
  node->canonical = "M(" + tree.canonical() + ')';
  node->id = sha256_hex(node->canonical);
  node->children.push_back(std::move(tree));
  return Sct(std::move(node));
}

Sct map_reduce(Sct map_stage, HostReducer reduction) {
  if (reduction.op == HostReducer::Op::User && !reduction.combine)
    throw InvalidSpec("user reduction '" + reduction.name + "' has no combine function");
  std::string target = reduction.target;
  for (const KernelSpec* k : map_stage.kernels())
    for (const auto& a : k->args)
      if (a.is_partitioned() && a.is_mutable() && reduction.target.empty()) target = a.name;
  if (target.empty()) throw InvalidSpec("map-reduce stage writes no partitioned vector to reduce");
  bool found = false;
  for (const KernelSpec* k : map_stage.kernels())
    if (const KernelArg* a = k->find_arg(target); a && a->is_partitioned() && a->is_mutable()) found = true;
  if (!found) throw InvalidSpec("reduction target '" + target + "' is not a partitioned output of the map stage");
  reduction.target = target;

  auto node = std::make_shared<Sct::Node>();
  node->kind = Sct::Kind::MapReduce;
  node->canonical = "R(" + map_stage.canonical() + ";H" + field(reduction.name) + field(target) +
                    (reduction.associative ? "a" : "n") + ')';
  node->id = sha256_hex(node->canonical);
  node->children.push_back(std::move(map_stage));
  node->reducer = std::move(reduction);
  return Sct(std::move(node));
}

Sct map_reduce(Sct map_stage, Sct reduction) {
  std::vector<Sct> parts{map_stage, reduction};
  check_consistency(parts);
  auto node = std::make_shared<Sct::Node>();
  node->kind = Sct::Kind::MapReduce;
  node->canonical = "R(" + map_stage.canonical() + ";T" + reduction.canonical() + ')';
  node->id = sha256_hex(node->canonical);
  node->children = std::move(parts);
  return Sct(std::move(node));
}

// ---------------------------------------------------------------------------

namespace {

void walk_order(const Sct& t, const std::map<std::string, std::size_t>& counts, std::vector<std::string>& out) {
  switch (t.kind()) {
    case Sct::Kind::Leaf:
      out.push_back(t.kernel().id);
      return;
    case Sct::Kind::Loop: {
      auto it = counts.find(t.loop_state().name);
      if (it == counts.end()) throw MissingIterationCount(t.loop_state().name);
      for (std::size_t i = 0; i < it->second; ++i) walk_order(t.children()[0], counts, out);
      return;
    }
    default:
      for (const auto& c : t.children()) walk_order(c, counts, out);
  }
}

}  // namespace

std::vector<std::string> kernel_execution_order(const Sct& sct,
                                                const std::map<std::string, std::size_t>& loop_iteration_counts) {
  std::vector<std::string> out;
  walk_order(sct, loop_iteration_counts, out);
  return out;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

}  // namespace skelrt
