#pragma once

// Scenario harness behind the skelrt command-line tool.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "skelrt/engine.hpp"
#include "skelrt/kb.hpp"
#include "skelrt/scenario.hpp"
#include "skelrt/trace.hpp"

namespace skelrt::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2 };

struct Options {
  std::optional<std::filesystem::path> kb;  // default: <out>/kb.jsonl
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = "out";
  bool no_profiling = false;
  std::size_t entry = 0;  // schedule entry used by profile and derive
};

struct ScenarioRun {
  std::vector<RunRecord> runs;
  std::vector<ProfileTrace> profiles;
};

/// Executes the whole schedule in order on one engine.
ScenarioRun run_scenario(const Scenario& scenario, KnowledgeBase& kb);

/// Output helpers shared by the commands and tests.
std::string series_csv(const std::vector<RunRecord>& runs);
std::string render_report(const nlohmann::json& trace);

int cmd_run(const std::filesystem::path& scenario, const Options& opts, std::ostream& out, std::ostream& err);
int cmd_profile(const std::filesystem::path& scenario, const Options& opts, std::ostream& out, std::ostream& err);
int cmd_derive(const std::filesystem::path& scenario, const Options& opts, std::ostream& out, std::ostream& err);
int cmd_report(const std::filesystem::path& trace, std::ostream& out, std::ostream& err);

}  // namespace skelrt::cli
