#include "skelrt/scenario.hpp"

#include <fstream>

#include "skelrt/error.hpp"

namespace skelrt {

EngineOptions Scenario::engine_options() const {
  EngineOptions o = options;
  if (noise_amplitude > 0.0) o.noise = NoiseModel{seed, noise_amplitude};
  return o;
}

std::size_t Scenario::total_runs() const {
  std::size_t n = 0;
  for (const auto& e : schedule) n += e.repeat;
  return n;
}

namespace {

using json = nlohmann::json;

/// A JSON node with the path that led to it, for error messages.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& what) const { throw InvalidSpec(path_ + ": " + what); }

  bool has(const char* key) const { return j_.is_object() && j_.contains(key); }

  Node at(const char* key) const {
    if (!j_.is_object()) fail("expected an object");
    if (!j_.contains(key)) Node(j_, path_ + "." + key).fail("missing");
    return {j_.at(key), path_ + "." + key};
  }

  Node at(std::size_t i) const { return {j_.at(i), path_ + "[" + std::to_string(i) + "]"}; }

  std::size_t size() const {
    if (!j_.is_array()) fail("expected an array");
    return j_.size();
  }

  std::string str() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }

  double num() const {
    if (!j_.is_number()) fail("expected a number");
    return j_.get<double>();
  }

  double positive() const {
    double v = num();
    if (!(v > 0.0)) fail("must be positive");
    return v;
  }

  std::size_t count() const {
    if (!j_.is_number_unsigned()) fail("expected a non-negative integer");
    return j_.get<std::size_t>();
  }

  bool boolean() const {
    if (!j_.is_boolean()) fail("expected true or false");
    return j_.get<bool>();
  }

  template <typename F>
  void each(F&& f) const {
    if (!j_.is_object()) fail("expected an object");
    for (const auto& [k, v] : j_.items()) f(k, Node(v, path_ + "." + k));
  }

  std::string str_or(const char* key, std::string fallback) const { return has(key) ? at(key).str() : fallback; }
  double num_or(const char* key, double fallback) const { return has(key) ? at(key).num() : fallback; }
  std::size_t count_or(const char* key, std::size_t fallback) const { return has(key) ? at(key).count() : fallback; }
  bool bool_or(const char* key, bool fallback) const { return has(key) ? at(key).boolean() : fallback; }

 private:
  const json& j_;
  std::string path_;
};

template <typename F>
auto rethrow_at(const Node& n, F&& f) {
  try {
    return f();
  } catch (const InvalidSpec& e) {
    if (std::string(e.what()).rfind("scenario.", 0) == 0) throw;
    n.fail(e.what());
  }
}

FissionLevel fission_at(const Node& n, const std::string& key) {
  try {
    return parse_fission(key);
  } catch (const InvalidSpec&) {
    n.fail("unknown fission level '" + key + "'");
  }
}

CpuDeviceModel parse_cpu(const Node& n) {
  CpuDeviceModel cpu;
  cpu.name = n.str_or("name", "cpu");
  cpu.cores = n.count_or("cores", 1);
  if (n.has("cache_topology"))
    n.at("cache_topology").each([&](const std::string& k, const Node& v) {
      cpu.cache_topology[fission_at(v, k)] = v.count();
    });
  if (n.has("fission_efficiency"))
    n.at("fission_efficiency").each([&](const std::string& k, const Node& v) {
      cpu.fission_efficiency[fission_at(v, k)] = v.positive();
    });
  cpu.launch_overhead_ms = n.num_or("launch_overhead_ms", 0.0);
  rethrow_at(n, [&] { cpu.validate(); });
  return cpu;
}

GpuDeviceModel parse_gpu(const Node& n) {
  GpuDeviceModel g;
  g.name = n.at("name").str();
  g.compute_units = n.count_or("compute_units", g.compute_units);
  g.max_wg_per_cu = n.count_or("max_wg_per_cu", g.max_wg_per_cu);
  g.local_mem_per_cu = n.count_or("local_mem_per_cu", g.local_mem_per_cu);
  g.registers_per_cu = n.count_or("registers_per_cu", g.registers_per_cu);
  g.min_work_group_size = n.count_or("min_work_group_size", g.min_work_group_size);
  g.max_work_group_size = n.count_or("max_work_group_size", g.max_work_group_size);
  g.relative_perf = n.num_or("relative_perf", g.relative_perf);
  g.transfer_bandwidth = n.num_or("transfer_bandwidth", g.transfer_bandwidth);
  g.overlap_efficiency = n.num_or("overlap_efficiency", g.overlap_efficiency);
  g.launch_overhead_ms = n.num_or("launch_overhead_ms", g.launch_overhead_ms);
  if (n.has("wgs_efficiency"))
    n.at("wgs_efficiency").each([&](const std::string& k, const Node& v) {
      std::size_t size = 0;
      try {
        size = std::stoul(k);
      } catch (const std::exception&) {
        v.fail("work-group size keys must be integers");
      }
      g.wgs_efficiency[size] = v.positive();
    });
  rethrow_at(n, [&] { g.validate(); });
  return g;
}

template <typename E>
E enum_at(const Node& n, std::initializer_list<std::pair<const char*, E>> options) {
  std::string s = n.str();
  for (const auto& [name, value] : options)
    if (s == name) return value;
  n.fail("unknown value '" + s + "'");
}

KernelArg parse_arg(const Node& n) {
  KernelArg a;
  a.name = n.at("name").str();
  a.kind = enum_at<ArgKind>(n.at("kind"), {{"vector", ArgKind::Vector}, {"scalar", ArgKind::Scalar}});
  if (n.has("mutability"))
    a.mutability = enum_at<Mutability>(n.at("mutability"),
                                       {{"immutable", Mutability::Immutable}, {"mutable", Mutability::Mutable}});
  if (n.has("memory"))
    a.memory = enum_at<MemorySpace>(n.at("memory"), {{"global", MemorySpace::Global}, {"local", MemorySpace::Local}});
  if (n.has("transfer"))
    a.transfer =
        enum_at<TransferMode>(n.at("transfer"), {{"partition", TransferMode::Partition}, {"copy", TransferMode::Copy}});
  if (n.has("trait"))
    a.trait = enum_at<Trait>(n.at("trait"), {{"none", Trait::None}, {"size", Trait::Size}, {"offset", Trait::Offset}});
  a.element_width = n.count_or("width", a.element_width);
  a.epu = n.count_or("epu", a.epu);
  rethrow_at(n, [&] { a.validate(); });
  return a;
}

KernelSpec parse_kernel(const Node& n, Fleet& fleet) {
  KernelSpec k;
  k.id = n.at("id").str();
  k.label = n.str_or("label", k.id);
  Node args = n.at("args");
  for (std::size_t i = 0; i < args.size(); ++i) k.args.push_back(parse_arg(args.at(i)));
  if (n.has("work_per_thread"))
    n.at("work_per_thread").each([&](const std::string& v, const Node& c) { k.work_per_thread[v] = c.count(); });
  if (n.has("fixed_wgs")) {
    Node f = n.at("fixed_wgs");
    std::vector<std::size_t> dims;
    for (std::size_t i = 0; i < f.size(); ++i) dims.push_back(f.at(i).count());
    k.fixed_wgs = dims;
  }
  if (n.has("resources")) {
    Node r = n.at("resources");
    k.resources.registers_per_thread = r.count_or("registers_per_thread", 0);
    k.resources.local_mem_per_group = r.count_or("local_mem_per_group", 0);
  }
  k.dimensionality = n.count_or("dimensionality", 1);
  rethrow_at(n, [&] { k.validate(); });

  Node tp = n.at("throughput");
  tp.each([&](const std::string& device, const Node& v) {
    if (fleet.cpu && fleet.cpu->name == device) {
      fleet.cpu->base_throughput[k.id] = v.positive();
      return;
    }
    for (auto& g : fleet.gpus)
      if (g.name == device) {
        g.throughput[k.id] = v.positive();
        return;
      }
    v.fail("no device named '" + device + "'");
  });
  return k;
}

std::optional<HostReducer> builtin_reducer(const std::string& s) {
  if (s == "ADD") return HostReducer::add();
  if (s == "SUB") return HostReducer::sub();
  if (s == "MUL") return HostReducer::mul();
  if (s == "DIV") return HostReducer::div();
  return std::nullopt;
}

Sct parse_tree(const Node& n, const std::map<std::string, KernelSpec>& kernels) {
  if (!n.raw().is_object() || n.raw().size() != 1) n.fail("expected exactly one of leaf, pipeline, loop, map, map_reduce");
  return rethrow_at(n, [&]() -> Sct {
    if (n.has("leaf")) {
      std::string id = n.at("leaf").str();
      auto it = kernels.find(id);
      if (it == kernels.end()) n.at("leaf").fail("unknown kernel '" + id + "'");
      return leaf(it->second);
    }
    if (n.has("pipeline")) {
      Node stages = n.at("pipeline");
      std::vector<Sct> out;
      for (std::size_t i = 0; i < stages.size(); ++i) out.push_back(parse_tree(stages.at(i), kernels));
      return pipeline(std::move(out));
    }
    if (n.has("loop")) {
      Node l = n.at("loop");
      std::vector<std::string> updates;
      if (l.has("updates")) {
        Node u = l.at("updates");
        for (std::size_t i = 0; i < u.size(); ++i) updates.push_back(u.at(i).str());
      }
      LoopState state =
          LoopState::fixed(l.at("name").str(), l.at("iterations").count(), l.bool_or("global_sync", false), updates);
      return loop(parse_tree(l.at("body"), kernels), std::move(state));
    }
    if (n.has("map")) return map(parse_tree(n.at("map"), kernels));
    if (n.has("map_reduce")) {
      Node mr = n.at("map_reduce");
      Sct stage = parse_tree(mr.at("map"), kernels);
      Node r = mr.at("reduce");
      if (r.raw().is_string()) {
        auto red = builtin_reducer(r.str());
        if (!red) r.fail("expected ADD, SUB, MUL, DIV or a tree");
        if (mr.has("target")) red->target = mr.at("target").str();
        return map_reduce(std::move(stage), *red);
      }
      return map_reduce(std::move(stage), parse_tree(r, kernels));
    }
    n.fail("expected one of leaf, pipeline, loop, map, map_reduce");
  });
}

RunArguments parse_args(const Node& n) {
  RunArguments a;
  Node w = n.at("workload");
  Node sizes = w.at("sizes");
  for (std::size_t i = 0; i < sizes.size(); ++i) a.workload.elements_per_dimension.push_back(sizes.at(i).count());
  a.workload.precision = rethrow_at(w, [&] { return parse_precision(w.str_or("precision", "none")); });
  rethrow_at(w, [&] { a.workload.validate(); });
  if (n.has("lengths"))
    n.at("lengths").each([&](const std::string& v, const Node& c) { a.vector_lengths[v] = c.count(); });
  if (n.has("scalars"))
    n.at("scalars").each([&](const std::string& k, const Node& c) { a.scalars[k] = c.num(); });
  return a;
}

}  // namespace

Scenario parse_scenario(const json& root) {
  Node n(root, "scenario");
  if (n.at("format").str() != kScenarioFormat) n.at("format").fail("expected \"" + std::string(kScenarioFormat) + "\"");
  if (n.at("version").count() != static_cast<std::size_t>(kScenarioVersion))
    n.at("version").fail("unsupported version");

  Scenario s;
  s.name = n.str_or("name", "scenario");
  s.seed = n.has("seed") ? n.at("seed").count() : 0;
  s.options.profiling = n.bool_or("profiling", true);

  Node devices = n.at("devices");
  if (devices.has("cpu")) s.fleet.cpu = parse_cpu(devices.at("cpu"));
  if (devices.has("gpus")) {
    Node gpus = devices.at("gpus");
    for (std::size_t i = 0; i < gpus.size(); ++i) s.fleet.gpus.push_back(parse_gpu(gpus.at(i)));
  }
  if (!s.fleet.has_cpu() && !s.fleet.has_gpu()) devices.fail("declares no device");

  if (n.has("load_events")) {
    Node ev = n.at("load_events");
    if (!s.fleet.cpu && ev.size() > 0) ev.fail("load events need a CPU device");
    for (std::size_t i = 0; i < ev.size(); ++i)
      s.fleet.cpu->load_profile.push_back({ev.at(i).at("run").num(), ev.at(i).at("multiplier").num()});
  }

  Node kernels = n.at("kernels");
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    KernelSpec k = parse_kernel(kernels.at(i), s.fleet);
    if (s.kernels.count(k.id)) kernels.at(i).at("id").fail("duplicate kernel '" + k.id + "'");
    s.kernels.emplace(k.id, std::move(k));
  }
  rethrow_at(devices, [&] { s.fleet.validate(); });

  n.at("scts").each([&](const std::string& name, const Node& t) { s.scts.emplace(name, parse_tree(t, s.kernels)); });

  Node sched = n.at("schedule");
  if (sched.size() == 0) sched.fail("must not be empty");
  for (std::size_t i = 0; i < sched.size(); ++i) {
    Node e = sched.at(i);
    ScheduleEntry entry;
    entry.sct = e.at("sct").str();
    if (!s.scts.count(entry.sct)) e.at("sct").fail("unknown tree '" + entry.sct + "'");
    entry.args = parse_args(e);
    entry.repeat = e.count_or("repeat", 1);
    if (entry.repeat == 0) e.at("repeat").fail("must be at least 1");
    const Sct& tree = s.scts.at(entry.sct);
    for (const KernelSpec* k : tree.kernels()) {
      if (s.fleet.cpu && !s.fleet.cpu->base_throughput.count(k->id))
        kernels.fail("kernel '" + k->id + "' has no throughput for device '" + s.fleet.cpu->name + "'");
      for (const auto& g : s.fleet.gpus)
        if (!g.throughput.count(k->id))
          kernels.fail("kernel '" + k->id + "' has no throughput for device '" + g.name + "'");
    }
    for (const auto& [v, len] : entry.args.vector_lengths) {
      bool known = false;
      for (const auto& info : tree.vectors()) known |= info.name == v;
      if (!known) e.at("lengths").fail("tree '" + entry.sct + "' has no vector '" + v + "'");
      if (len == 0) e.at("lengths").fail("vector '" + v + "' has zero length");
    }
    s.schedule.push_back(std::move(entry));
  }

  if (n.has("tuner")) {
    Node t = n.at("tuner");
    auto& p = s.options.tuner;
    p.occupancy_threshold = t.num_or("occupancy_threshold", p.occupancy_threshold);
    if (t.has("precision")) p.precision = t.at("precision").num();
    p.number_executions = t.count_or("number_executions", p.number_executions);
    p.overlap_cap = t.count_or("overlap_cap", p.overlap_cap);
    p.literal_breaks = t.bool_or("literal_breaks", p.literal_breaks);
    rethrow_at(t, [&] { p.validate(); });
  }
  if (n.has("balancer")) {
    Node b = n.at("balancer");
    auto& p = s.options.balancer;
    p.weight = b.num_or("weight", p.weight);
    p.max_dev = b.num_or("max_dev", p.max_dev);
    p.c_factor = b.num_or("c_factor", p.c_factor);
    p.trigger_threshold = b.num_or("trigger_threshold", p.trigger_threshold);
    p.fallback_transferable = b.num_or("fallback_transferable", p.fallback_transferable);
    rethrow_at(b, [&] { p.validate(); });
  }
  if (n.has("engine")) {
    Node e = n.at("engine");
    s.noise_amplitude = e.num_or("noise", 0.0);
    if (s.noise_amplitude < 0.0 || s.noise_amplitude >= 1.0) e.at("noise").fail("must lie in [0, 1)");
    s.options.record_events = e.bool_or("record_events", false);
    if (e.has("host")) {
      Node h = e.at("host");
      s.options.host.condition_ms = h.num_or("condition_ms", 0.0);
      s.options.host.update_ms = h.num_or("update_ms", 0.0);
      s.options.host.reduce_ms_per_partial = h.num_or("reduce_ms_per_partial", 0.0);
    }
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidSpec("cannot read scenario file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidSpec(path.string() + ": " + e.what());
  }
  return parse_scenario(j);
}

}  // namespace skelrt
