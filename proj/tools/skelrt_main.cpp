#include <iostream>

#include <CLI11.hpp>

#include "skelrt/cli.hpp"

int main(int argc, char** argv) {
  using namespace skelrt::cli;
  CLI::App app{"skelrt: heterogeneous skeleton runtime simulator"};
  app.require_subcommand(1);

  Options opts;
  std::string scenario, trace, kb, out = "out";
  std::uint64_t seed = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--kb", kb, "knowledge-base file (default <out>/kb.jsonl)");
    sub->add_option("--seed", seed, "override the scenario seed");
    sub->add_option("--out", out, "output directory")->capture_default_str();
  };

  auto* run = app.add_subcommand("run", "execute a scenario schedule");
  run->add_option("scenario", scenario, "scenario file")->required();
  common(run);
  run->add_flag("--no-profiling", opts.no_profiling, "never build profiles");

  auto* profile = app.add_subcommand("profile", "build a profile for one schedule entry");
  profile->add_option("scenario", scenario, "scenario file")->required();
  profile->add_option("--entry", opts.entry, "schedule entry index")->capture_default_str();
  common(profile);

  auto* derive = app.add_subcommand("derive", "print the configuration the KB derives for one schedule entry");
  derive->add_option("scenario", scenario, "scenario file")->required();
  derive->add_option("--entry", opts.entry, "schedule entry index")->capture_default_str();
  common(derive);

  auto* report = app.add_subcommand("report", "summarize a trace file");
  report->add_option("trace", trace, "trace file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  opts.out = out;
  if (!kb.empty()) opts.kb = kb;
  for (auto* sub : {run, profile, derive})
    if (sub->parsed() && sub->count("--seed")) opts.seed = seed;

  if (run->parsed()) return cmd_run(scenario, opts, std::cout, std::cerr);
  if (profile->parsed()) return cmd_profile(scenario, opts, std::cout, std::cerr);
  if (derive->parsed()) return cmd_derive(scenario, opts, std::cout, std::cerr);
  return cmd_report(trace, std::cout, std::cerr);
}
