#include "skelrt/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "skelrt/error.hpp"

namespace skelrt::cli {

namespace fs = std::filesystem;

ScenarioRun run_scenario(const Scenario& scenario, KnowledgeBase& kb) {
  ScenarioRun out;
  Engine engine(scenario.fleet, kb, scenario.engine_options());
  for (const auto& entry : scenario.schedule) {
    const Sct& sct = scenario.scts.at(entry.sct);
    for (std::size_t r = 0; r < entry.repeat; ++r) {
      RunOutcome o = engine.run(sct, entry.args).get();
      if (o.profile) out.profiles.push_back({o.record.run, sct.id(), entry.args.workload, std::move(*o.profile)});
      out.runs.push_back(std::move(o.record));
    }
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw PersistenceFailure("cannot write " + path.string());
  f << content;
  if (!f) throw PersistenceFailure("write to " + path.string() + " failed");
}

fs::path kb_path(const Options& opts) { return opts.kb ? *opts.kb : opts.out / "kb.jsonl"; }

Scenario load(const fs::path& path, const Options& opts) {
  Scenario s = load_scenario(path);
  if (opts.seed) s.seed = *opts.seed;
  if (opts.no_profiling) s.options.profiling = false;
  return s;
}

const ScheduleEntry& pick(const Scenario& s, const Options& opts) {
  if (opts.entry >= s.schedule.size())
    throw InvalidSpec("scenario.schedule: no entry " + std::to_string(opts.entry));
  return s.schedule[opts.entry];
}

template <typename F>
int guarded(std::ostream& err, F&& f) {
  try {
    return f();
  } catch (const InvalidSpec& e) {
    err << "skelrt: invalid input: " << e.what() << '\n';
    return kValidation;
  } catch (const nlohmann::json::exception& e) {
    err << "skelrt: invalid input: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "skelrt: " << e.what() << '\n';
    return kRuntime;
  }
}

}  // namespace

std::string series_csv(const std::vector<RunRecord>& runs) {
  std::ostringstream o;
  o << "run,cpu_share,gpu_share,dev,lbt,wall_time\n";
  for (const auto& r : runs)
    o << r.run << ',' << fmt(r.config.split.cpu) << ',' << fmt(r.config.split.gpu) << ','
      << (r.dev ? fmt(*r.dev) : std::string()) << ',' << fmt(r.lbt) << ',' << fmt(r.wall_time) << '\n';
  return o.str();
}

std::string render_report(const nlohmann::json& trace) {
  validate_trace(trace);
  const auto& runs = trace.at("runs");
  std::map<std::string, std::size_t> counts;
  std::size_t shifting_runs = 0;

  struct Session {
    std::size_t trigger = 0;
    std::optional<std::size_t> converge;
    std::size_t steps = 0;
    std::size_t shifting = 0;
    double from = 0.0, to = 0.0;
  };
  std::vector<Session> sessions;
  double prev_cpu = 0.0;

  for (const auto& r : runs) {
    const double cpu = r.at("config").at("split").at("cpu").get<double>();
    for (const auto& a : r.at("actions")) {
      const std::string s = a.get<std::string>();
      ++counts[s.substr(0, s.find(':'))];
      if (s == "balance:trigger") sessions.push_back({r.at("run").get<std::size_t>(), {}, 0, 0, prev_cpu, cpu});
      if (s == "balance:converge" && !sessions.empty()) sessions.back().converge = r.at("run").get<std::size_t>();
      if (s == "balance:shift" || s == "balance:double" || s == "balance:refine" || s == "balance:hold") {
        if (!sessions.empty()) {
          ++sessions.back().steps;
          sessions.back().to = cpu;
        }
      }
      if (s == "balance:shift" || s == "balance:double") {
        ++shifting_runs;
        if (!sessions.empty()) ++sessions.back().shifting;
      }
    }
    prev_cpu = cpu;
  }

  std::ostringstream o;
  o << "scenario " << trace.at("scenario").get<std::string>() << ", seed " << trace.at("seed").get<std::uint64_t>()
    << ", " << runs.size() << " runs\n\n";

  o << "action       runs\n";
  for (const auto& [k, v] : counts) o << std::left << std::setw(12) << k << ' ' << v << '\n';
  o << "shifting-phase runs: " << shifting_runs << "\n\n";

  if (!sessions.empty()) {
    o << "balancing sessions\n";
    o << "trigger  converge  steps  shifting  cpu_from    cpu_to\n";
    for (const auto& s : sessions)
      o << std::left << std::setw(8) << s.trigger << ' ' << std::setw(9)
        << (s.converge ? std::to_string(*s.converge) : std::string("-")) << ' ' << std::setw(6) << s.steps << ' '
        << std::setw(9) << s.shifting << ' ' << std::setw(11) << fmt(s.from) << ' ' << fmt(s.to) << '\n';
    o << '\n';
  }

  const auto& profiles = trace.at("profiles");
  if (!profiles.empty()) {
    o << "profiles built\n";
    o << "run  evaluations  best_time  fission     overlap  cpu_share\n";
    for (const auto& p : profiles) {
      const auto& prof = p.at("profile");
      o << std::left << std::setw(4) << p.at("run").get<std::size_t>() << ' ' << std::setw(12)
        << p.at("evaluations").get<std::size_t>() << ' ' << std::setw(10) << fmt(prof.at("best_time").get<double>())
        << ' ' << std::setw(11) << prof.at("fission").get<std::string>() << ' ' << std::setw(8)
        << prof.at("overlap").get<std::size_t>() << ' ' << fmt(prof.at("split").at("cpu").get<double>()) << '\n';
    }
    o << '\n';
  }

  if (!runs.empty()) {
    const auto& last = runs.back();
    o << "final: cpu share " << fmt(last.at("config").at("split").at("cpu").get<double>()) << ", dev "
      << (last.at("dev").is_null() ? std::string("-") : fmt(last.at("dev").get<double>())) << ", lbt "
      << fmt(last.at("lbt").get<double>()) << ", wall " << fmt(last.at("wall_time").get<double>()) << " ms\n";
  }
  return o.str();
}

int cmd_run(const fs::path& scenario, const Options& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    Scenario s = load(scenario, opts);
    fs::create_directories(opts.out);
    KnowledgeBase kb(kb_path(opts));
    ScenarioRun result = run_scenario(s, kb);
    kb.compact();
    auto trace = make_trace(s.name, s.seed, result.runs, result.profiles);
    write_file(opts.out / "trace.json", trace.dump(1) + "\n");
    write_file(opts.out / "series.csv", series_csv(result.runs));
    out << "ran " << result.runs.size() << " runs; wrote " << (opts.out / "trace.json").string() << ", "
        << (opts.out / "series.csv").string() << ", " << kb_path(opts).string() << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_profile(const fs::path& scenario, const Options& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    Scenario s = load(scenario, opts);
    const ScheduleEntry& entry = pick(s, opts);
    const Sct& sct = s.scts.at(entry.sct);
    fs::create_directories(opts.out);
    KnowledgeBase kb(kb_path(opts));
    ProfileResult pr;
    {
      Engine engine(s.fleet, kb, s.engine_options());
      pr = engine.profile(sct, entry.args).get();
    }
    kb.compact();
    std::vector<ProfileTrace> traces{{0, sct.id(), entry.args.workload, pr}};
    write_file(opts.out / "search_trace.json", make_trace(s.name, s.seed, {}, traces).dump(1) + "\n");
    auto stored = kb.lookup(sct.id(), entry.args.workload);
    out << to_json(stored ? *stored : pr.profile).dump(2) << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_derive(const fs::path& scenario, const Options& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    Scenario s = load(scenario, opts);
    const ScheduleEntry& entry = pick(s, opts);
    const Sct& sct = s.scts.at(entry.sct);
    KnowledgeBase kb(kb_path(opts));
    Derivation d = kb.derive(sct.id(), entry.args.workload);
    if (d.exact) {
      out << to_json(*d.exact).dump(2) << '\n';
      return static_cast<int>(kOk);
    }
    FrameworkConfig c = materialize(s.fleet, sct, d.platform, d.split);
    nlohmann::ordered_json j;
    j["sct_id"] = sct.id();
    j["scope"] = to_string(d.scope);
    j["scope_size"] = d.scope_size;
    j["config"] = to_json(c);
    out << j.dump(2) << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_report(const fs::path& trace, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::ifstream in(trace);
    if (!in) throw InvalidSpec("cannot read trace file " + trace.string());
    out << render_report(nlohmann::json::parse(in));
    return static_cast<int>(kOk);
  });
}

}  // namespace skelrt::cli
