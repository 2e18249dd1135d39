#include "skelrt/kb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "skelrt/error.hpp"
#include "skelrt/rbf.hpp"

namespace skelrt {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Derived: return "derived";
    case Provenance::Balanced: return "balanced";
    case Provenance::Built: return "built";
  }
  return "derived";
}

Provenance parse_provenance(std::string_view s) {
  if (s == "derived") return Provenance::Derived;
  if (s == "balanced") return Provenance::Balanced;
  if (s == "built") return Provenance::Built;
  throw InvalidSpec("unknown provenance '" + std::string(s) + "'");
}

std::string_view to_string(DerivationScope s) {
  switch (s) {
    case DerivationScope::Exact: return "exact";
    case DerivationScope::SameSct: return "same-sct";
    case DerivationScope::SameWorkload: return "same-workload";
    case DerivationScope::SameDimensionality: return "same-dimensionality";
    case DerivationScope::ColdStart: return "cold-start";
  }
  return "cold-start";
}

void Profile::validate() const {
  if (sct_id.empty()) throw InvalidSpec("profile without an SCT id");
  workload.validate();
  if (split.cpu < 0.0 || split.gpu < 0.0 || std::abs(split.cpu + split.gpu - 1.0) > 1e-9)
    throw InvalidSpec("profile split fractions must be non-negative and sum to 1");
  if (!(best_time > 0.0)) throw InvalidSpec("profile best time must be positive");
  if (platform.overlap < 1) throw InvalidSpec("profile overlap must be >= 1");
}

nlohmann::ordered_json to_json(const Profile& p) {
  nlohmann::ordered_json j;
  j["sct_id"] = p.sct_id;
  j["workload"] = {{"dims", p.workload.dimensions()},
                   {"sizes", p.workload.elements_per_dimension},
                   {"precision", to_string(p.workload.precision)}};
  j["split"] = {{"cpu", p.split.cpu}, {"gpu", p.split.gpu}};
  j["fission"] = to_string(p.platform.fission);
  j["overlap"] = p.platform.overlap;
  j["wgs"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : p.platform.wgs_per_kernel) j["wgs"][k] = v;
  j["best_time"] = p.best_time;
  j["provenance"] = to_string(p.provenance);
  return j;
}

Profile profile_from_json(const nlohmann::json& j) {
  Profile p;
  p.sct_id = j.at("sct_id").get<std::string>();
  const auto& w = j.at("workload");
  p.workload.elements_per_dimension = w.at("sizes").get<std::vector<std::size_t>>();
  if (w.at("dims").get<std::size_t>() != p.workload.dimensions())
    throw InvalidSpec("workload dims disagree with the number of sizes");
  p.workload.precision = parse_precision(w.at("precision").get<std::string>());
  p.split.cpu = j.at("split").at("cpu").get<double>();
  p.split.gpu = j.at("split").at("gpu").get<double>();
  p.platform.fission = parse_fission(j.at("fission").get<std::string>());
  p.platform.overlap = j.at("overlap").get<std::size_t>();
  for (const auto& [k, v] : j.at("wgs").items()) p.platform.wgs_per_kernel[k] = v.get<std::size_t>();
  p.best_time = j.at("best_time").get<double>();
  p.provenance = parse_provenance(j.at("provenance").get<std::string>());
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Storage

KnowledgeBase::KnowledgeBase(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(*path_);
  if (!in) {
    if (std::filesystem::exists(*path_)) throw PersistenceFailure("cannot read KB file " + path_->string());
    return;
  }
  std::string line;
  std::size_t number = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (!header) {
        if (j.value("format", "") != kFormat || j.value("version", 0) != kVersion)
          throw PersistenceFailure("not a version " + std::to_string(kVersion) + " KB file");
        header = true;
        continue;
      }
      Profile p = profile_from_json(j);
      profiles_[{p.sct_id, p.workload}] = std::move(p);
    } catch (const PersistenceFailure&) {
      throw;
    } catch (const std::exception& e) {
      throw PersistenceFailure(path_->string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void KnowledgeBase::write_header(std::ostream& out) const {
  nlohmann::ordered_json h;
  h["format"] = kFormat;
  h["version"] = kVersion;
  out << h.dump() << '\n';
}

void KnowledgeBase::append(const Profile& p) {
  if (!path_) return;
  bool fresh = !std::filesystem::exists(*path_) || std::filesystem::file_size(*path_) == 0;
  std::ofstream out(*path_, std::ios::app);
  if (!out) throw PersistenceFailure("cannot open KB file " + path_->string() + " for writing");
  if (fresh) write_header(out);
  out << to_json(p).dump() << '\n';
  out.flush();
  if (!out) throw PersistenceFailure("write to KB file " + path_->string() + " failed");
}

bool KnowledgeBase::store(const Profile& profile) {
  profile.validate();
  std::unique_lock lock(mutex_);
  Key key{profile.sct_id, profile.workload};
  auto it = profiles_.find(key);
  if (it != profiles_.end()) {
    const Profile& old = it->second;
    bool faster = profile.best_time < old.best_time;
    bool escalates = static_cast<int>(profile.provenance) > static_cast<int>(old.provenance);
    if (!faster && !escalates) return false;
    if (profile == old) return false;
  }
  append(profile);
  profiles_[key] = profile;
  return true;
}

std::optional<Profile> KnowledgeBase::lookup(const std::string& sct_id, const WorkloadId& workload) const {
  std::shared_lock lock(mutex_);
  auto it = profiles_.find({sct_id, workload});
  if (it == profiles_.end()) return std::nullopt;
  return it->second;
}

bool KnowledgeBase::has_built(const std::string& sct_id, const WorkloadId& workload) const {
  auto p = lookup(sct_id, workload);
  return p && p->provenance == Provenance::Built;
}

std::vector<Profile> KnowledgeBase::profiles() const {
  std::shared_lock lock(mutex_);
  std::vector<Profile> out;
  for (const auto& [k, p] : profiles_) out.push_back(p);
  return out;
}

std::size_t KnowledgeBase::size() const {
  std::shared_lock lock(mutex_);
  return profiles_.size();
}

void KnowledgeBase::compact() {
  if (!path_) return;
  std::shared_lock lock(mutex_);
  auto tmp = *path_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw PersistenceFailure("cannot write " + tmp.string());
    write_header(out);
    for (const auto& [k, p] : profiles_) out << to_json(p).dump() << '\n';
    if (!out) throw PersistenceFailure("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, *path_, ec);
  if (ec) throw PersistenceFailure("cannot replace " + path_->string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// Derivation

namespace {

using Vec = Eigen::VectorXd;

Vec log_coords(const WorkloadId& w) {
  Vec v(static_cast<Eigen::Index>(w.dimensions()));
  for (std::size_t i = 0; i < w.dimensions(); ++i)
    v(static_cast<Eigen::Index>(i)) = std::log10(static_cast<double>(w.elements_per_dimension[i]));
  return v;
}

const Profile& nearest(const std::vector<const Profile*>& scope, const Vec& query) {
  const Profile* best = scope.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (const Profile* p : scope) {
    double d = (log_coords(p->workload) - query).norm();
    if (d < best_d || (d == best_d && static_cast<int>(p->provenance) > static_cast<int>(best->provenance))) {
      best = p;
      best_d = d;
    }
  }
  return *best;
}

double interpolate_cpu_share(const std::vector<const Profile*>& scope, const Vec& query) {
  // Coincident workloads (possible across trees) are merged by averaging.
  std::vector<std::pair<Vec, std::pair<double, int>>> points;
  for (const Profile* p : scope) {
    Vec c = log_coords(p->workload);
    auto it = std::find_if(points.begin(), points.end(), [&](const auto& q) { return q.first == c; });
    if (it == points.end())
      points.push_back({c, {p->split.cpu, 1}});
    else {
      it->second.first += p->split.cpu;
      ++it->second.second;
    }
  }
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd centers(n, query.size());
  Vec values(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    centers.row(i) = points[static_cast<std::size_t>(i)].first.transpose();
    values(i) = points[static_cast<std::size_t>(i)].second.first / points[static_cast<std::size_t>(i)].second.second;
  }
  GaussianRbf<double> rbf(centers, values, median_pairwise_distance(centers));
  return std::clamp(rbf(query), 0.0, 1.0);
}

}  // namespace

Derivation KnowledgeBase::derive(const std::string& sct_id, const WorkloadId& workload) const {
  std::shared_lock lock(mutex_);
  Derivation out;
  if (auto it = profiles_.find({sct_id, workload}); it != profiles_.end()) {
    out.split = it->second.split;
    out.platform = it->second.platform;
    out.scope = DerivationScope::Exact;
    out.scope_size = 1;
    out.exact = it->second;
    return out;
  }

  std::vector<const Profile*> scope;
  auto narrow = [&](DerivationScope tag, auto&& keep) {
    if (!scope.empty()) return;
    for (const auto& [k, p] : profiles_)
      if (keep(p)) scope.push_back(&p);
    if (!scope.empty()) out.scope = tag;
  };
  narrow(DerivationScope::SameSct, [&](const Profile& p) {
    return p.sct_id == sct_id && p.workload.dimensions() == workload.dimensions();
  });
  narrow(DerivationScope::SameWorkload, [&](const Profile& p) {
    return p.workload.elements_per_dimension == workload.elements_per_dimension;
  });
  narrow(DerivationScope::SameDimensionality,
         [&](const Profile& p) { return p.workload.dimensions() == workload.dimensions(); });

  if (scope.empty()) {
    out.scope = DerivationScope::ColdStart;
    out.split = Split{0.5, 0.5};
    out.platform = PlatformConfig{};
    return out;
  }

  out.scope_size = scope.size();
  const Vec query = log_coords(workload);
  const Profile& nn = nearest(scope, query);
  out.platform = nn.platform;
  double cpu = workload.dimensions() <= 3 ? interpolate_cpu_share(scope, query) : nn.split.cpu;
  out.split = Split::from_cpu(cpu);
  return out;
}

}  // namespace skelrt
