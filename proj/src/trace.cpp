#include "skelrt/trace.hpp"

#include "skelrt/error.hpp"

namespace skelrt {

using ojson = nlohmann::ordered_json;

namespace {

ojson wgs_json(const WgsAssignment& a) {
  ojson j = ojson::object();
  for (const auto& [k, v] : a) j[k] = v;
  return j;
}

ojson workload_json(const WorkloadId& w) {
  return {{"dims", w.dimensions()}, {"sizes", w.elements_per_dimension}, {"precision", to_string(w.precision)}};
}

ojson slot_json(const Slot& s) { return {{"type", to_string(s.type)}, {"device", s.device}, {"lane", s.lane}}; }

}  // namespace

ojson to_json(const FrameworkConfig& c) {
  ojson j;
  j["fission"] = to_string(c.platform.fission);
  j["overlap"] = c.platform.overlap;
  j["wgs"] = wgs_json(c.platform.wgs_per_kernel);
  j["split"] = {{"cpu", c.split.cpu}, {"gpu", c.split.gpu}};
  j["gpu_weights"] = c.per_gpu_weights;
  j["parallelism"] = c.parallelism;
  return j;
}

ojson to_json(const ExecutionEvent& e) {
  ojson j;
  j["kind"] = to_string(e.kind);
  j["slot"] = e.slot ? ojson(*e.slot) : ojson(nullptr);
  j["name"] = e.name;
  j["iteration"] = e.iteration;
  if (!e.scalars.empty()) {
    j["scalars"] = ojson::object();
    for (const auto& [k, v] : e.scalars) j["scalars"][k] = v;
  }
  j["start"] = e.start;
  j["duration"] = e.duration;
  return j;
}

ojson to_json(const AbsState& s) {
  return {{"lo", s.lo},
          {"hi", s.hi},
          {"transferable", s.transferable},
          {"shift_count", s.shift_count},
          {"last_direction", s.last_direction},
          {"phase", to_string(s.phase)},
          {"steps", s.steps}};
}

ojson to_json(const RunRecord& r) {
  ojson j;
  j["run"] = r.run;
  j["sct_id"] = r.sct_id;
  j["workload"] = workload_json(r.workload);
  j["config"] = to_json(r.config);
  j["slots"] = ojson::array();
  for (std::size_t i = 0; i < r.slots.size(); ++i) {
    ojson s = slot_json(r.slots[i]);
    s["time"] = r.per_slot_times.at(i);
    j["slots"].push_back(std::move(s));
  }
  j["per_type"] = {{"cpu", r.per_type.cpu}, {"gpu", r.per_type.gpu}};
  j["dev"] = r.dev ? ojson(*r.dev) : ojson(nullptr);
  j["lbt"] = r.lbt;
  j["wall_time"] = r.wall_time;
  j["host_time"] = r.host_time;
  j["actions"] = r.actions;
  j["abs"] = r.abs ? to_json(*r.abs) : ojson(nullptr);
  if (!r.events.empty()) {
    j["events"] = ojson::array();
    for (const auto& e : r.events) j["events"].push_back(to_json(e));
  }
  return j;
}

ojson to_json(const SearchRecord& r) {
  return {{"fission", to_string(r.fission)},
          {"overlap", r.overlap},
          {"wgs", r.wgs},
          {"iteration", r.inner_iteration},
          {"split", {{"cpu", r.split.cpu}, {"gpu", r.split.gpu}}},
          {"time", r.time},
          {"best_time", r.best_time},
          {"action", to_string(r.action)}};
}

ojson to_json(const ProfileTrace& p) {
  ojson j;
  j["run"] = p.run;
  j["sct_id"] = p.sct_id;
  j["workload"] = workload_json(p.workload);
  j["precision"] = p.result.precision;
  j["evaluations"] = p.result.evaluations;
  j["profile"] = to_json(p.result.profile);
  j["search"] = ojson::array();
  for (const auto& r : p.result.trace) j["search"].push_back(to_json(r));
  return j;
}

ojson make_trace(const std::string& scenario, std::uint64_t seed, const std::vector<RunRecord>& runs,
                 const std::vector<ProfileTrace>& profiles) {
  ojson j;
  j["format"] = kTraceFormat;
  j["version"] = kTraceVersion;
  j["scenario"] = scenario;
  j["seed"] = seed;
  j["runs"] = ojson::array();
  for (const auto& r : runs) j["runs"].push_back(to_json(r));
  j["profiles"] = ojson::array();
  for (const auto& p : profiles) j["profiles"].push_back(to_json(p));
  return j;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

const nlohmann::json& field(const nlohmann::json& j, const std::string& path, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw InvalidSpec(path + "." + key + ": missing");
  return j.at(key);
}

void number(const nlohmann::json& j, const std::string& path, const char* key, bool nullable = false) {
  const auto& v = field(j, path, key);
  if (nullable && v.is_null()) return;
  if (!v.is_number()) throw InvalidSpec(path + "." + key + ": expected a number");
}

void unsigned_int(const nlohmann::json& j, const std::string& path, const char* key) {
  if (!field(j, path, key).is_number_unsigned()) throw InvalidSpec(path + "." + key + ": expected a count");
}

void string(const nlohmann::json& j, const std::string& path, const char* key) {
  if (!field(j, path, key).is_string()) throw InvalidSpec(path + "." + key + ": expected a string");
}

}  // namespace

void validate_run_record(const nlohmann::json& j) {
  const std::string p = "run";
  unsigned_int(j, p, "run");
  string(j, p, "sct_id");
  const auto& w = field(j, p, "workload");
  unsigned_int(w, p + ".workload", "dims");
  if (!field(w, p + ".workload", "sizes").is_array()) throw InvalidSpec("run.workload.sizes: expected an array");
  string(w, p + ".workload", "precision");
  const auto& c = field(j, p, "config");
  parse_fission(field(c, p + ".config", "fission").get<std::string>());
  unsigned_int(c, p + ".config", "overlap");
  if (!field(c, p + ".config", "wgs").is_object()) throw InvalidSpec("run.config.wgs: expected an object");
  number(field(c, p + ".config", "split"), p + ".config.split", "cpu");
  number(field(c, p + ".config", "split"), p + ".config.split", "gpu");
  unsigned_int(c, p + ".config", "parallelism");
  const auto& slots = field(j, p, "slots");
  if (!slots.is_array() || slots.size() != c.at("parallelism").get<std::size_t>())
    throw InvalidSpec("run.slots: expected one entry per parallel execution");
  for (const auto& s : slots) {
    string(s, p + ".slots[]", "type");
    number(s, p + ".slots[]", "time");
  }
  number(field(j, p, "per_type"), p + ".per_type", "cpu");
  number(field(j, p, "per_type"), p + ".per_type", "gpu");
  number(j, p, "dev", true);
  number(j, p, "lbt");
  double lbt = j.at("lbt").get<double>();
  if (lbt < 0.0 || lbt > 1.0) throw InvalidSpec("run.lbt: outside [0, 1]");
  number(j, p, "wall_time");
  number(j, p, "host_time");
  if (!field(j, p, "actions").is_array()) throw InvalidSpec("run.actions: expected an array");
  field(j, p, "abs");
}

void validate_trace(const nlohmann::json& j) {
  if (field(j, "trace", "format") != kTraceFormat) throw InvalidSpec("trace.format: not a skelrt trace");
  if (field(j, "trace", "version") != kTraceVersion) throw InvalidSpec("trace.version: unsupported");
  if (!field(j, "trace", "runs").is_array()) throw InvalidSpec("trace.runs: expected an array");
  for (const auto& r : j.at("runs")) validate_run_record(r);
  if (!field(j, "trace", "profiles").is_array()) throw InvalidSpec("trace.profiles: expected an array");
}

}  // namespace skelrt
