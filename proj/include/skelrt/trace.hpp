#pragma once

// JSON forms of run records, search records and whole trace files.

#include <string>
#include <vector>

#include <json.hpp>

#include "skelrt/engine.hpp"
#include "skelrt/tuner.hpp"

namespace skelrt {

inline constexpr const char* kTraceFormat = "skelrt-trace";
inline constexpr int kTraceVersion = 1;

nlohmann::ordered_json to_json(const FrameworkConfig& c);
nlohmann::ordered_json to_json(const ExecutionEvent& e);
nlohmann::ordered_json to_json(const AbsState& s);
nlohmann::ordered_json to_json(const RunRecord& r);
nlohmann::ordered_json to_json(const SearchRecord& r);

struct ProfileTrace {
  std::size_t run = 0;  // run index the construction happened before
  std::string sct_id;
  WorkloadId workload;
  ProfileResult result;
};

nlohmann::ordered_json to_json(const ProfileTrace& p);

nlohmann::ordered_json make_trace(const std::string& scenario, std::uint64_t seed,
                                  const std::vector<RunRecord>& runs, const std::vector<ProfileTrace>& profiles);

/// Throws InvalidSpec naming the first offending field.
void validate_run_record(const nlohmann::json& j);
void validate_trace(const nlohmann::json& j);

}  // namespace skelrt
