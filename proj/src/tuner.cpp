#include "skelrt/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "skelrt/error.hpp"

namespace skelrt {

void TunerParams::validate() const {
  if (!(occupancy_threshold > 0.0 && occupancy_threshold <= 1.0))
    throw InvalidSpec("occupancy threshold must lie in (0, 1]");
  if (precision && !(*precision > 0.0)) throw InvalidSpec("tuner precision must be positive");
  if (number_executions < 1) throw InvalidSpec("tuner needs at least one execution per candidate");
  if (overlap_cap < 1) throw InvalidSpec("overlap cap must be >= 1");
}

double transferable_size(std::size_t n, double size) { return std::ldexp(size, -static_cast<int>(n)); }

Split wld_next(const WldGenState& state) {
  if (!(state.transferable > 0.0) || state.transferable < state.granule) throw Exhausted();
  double half = 0.5 * state.transferable;
  return {state.bound_cpu + half, state.bound_gpu + half};
}

WldGenState wld_feedback(const WldGenState& state, const TypeTimes& times) {
  WldGenState next = state;
  double half = 0.5 * state.transferable;
  if (times.cpu < times.gpu)
    next.bound_cpu += half;
  else
    next.bound_gpu += half;
  next.transferable = half;
  ++next.iteration;
  return next;
}

std::string_view to_string(SearchAction a) {
  switch (a) {
    case SearchAction::Stored: return "stored";
    case SearchAction::Evaluated: return "evaluated";
    case SearchAction::PrecisionBreak: return "precision-break";
    case SearchAction::Exhausted: return "exhausted";
    case SearchAction::DiscardWgs: return "discard-wgs";
    case SearchAction::DiscardOverlap: return "discard-overlap";
    case SearchAction::DiscardFission: return "discard-fission";
  }
  return "evaluated";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Brackets the time-balance point with the probes on either side of it.
// CPU time grows and GPU time shrinks with the CPU share, so no split in
// between can beat max(cpu time at the CPU-faster probe, gpu time at the
// CPU-slower probe).
struct Bracket {
  double cpu_time_below = 0.0;  // probe with CPU faster, largest share so far
  double share_below = -1.0;
  double gpu_time_above = 0.0;  // probe with CPU slower, smallest share so far
  double share_above = 2.0;

  void add(double cpu_share, const TypeTimes& t) {
    if (t.cpu < t.gpu) {
      if (cpu_share > share_below) {
        share_below = cpu_share;
        cpu_time_below = t.cpu;
      }
    } else if (cpu_share < share_above) {
      share_above = cpu_share;
      gpu_time_above = t.gpu;
    }
  }

  bool closed() const { return share_below >= 0.0 && share_above <= 1.0; }
  double lower_bound() const { return std::max(cpu_time_below, gpu_time_above); }
};

class Search {
 public:
  Search(const std::string& sct_id, const WorkloadId& workload, const TunerParams& params, ProfileTarget& target,
         KnowledgeBase& kb)
      : sct_id_(sct_id), workload_(workload), params_(params), target_(target), kb_(kb) {
    if (params.precision) precision_ = *params.precision;
  }

  ProfileResult run() {
    std::vector<FissionLevel> levels =
        target_.has_cpu() ? target_.cpu_configurations() : std::vector<FissionLevel>{FissionLevel::NoFission};
    GpuConfigurations gpu = target_.gpu_configurations(params_.occupancy_threshold, params_.overlap_cap);
    if (!target_.has_gpu()) gpu.overlaps = {1};

    double fission_former = kInf;
    for (FissionLevel fission : levels) {
      double fission_best = kInf;
      double overlap_former = kInf;
      for (std::size_t overlap : gpu.overlaps) {
        double overlap_best = kInf;
        double wgs_former = kInf;
        for (const WgsCandidate& cand : gpu.wgs_candidates) {
          PlatformConfig config{fission, overlap, cand.assignment};
          double cand_best = distribute(config, cand.size);
          overlap_best = std::min(overlap_best, cand_best);
          if (!(cand_best < wgs_former)) {
            mark(SearchAction::DiscardWgs, config, cand.size);
            break;
          }
          wgs_former = cand_best;
        }
        fission_best = std::min(fission_best, overlap_best);
        if (!(overlap_best < overlap_former)) {
          mark(SearchAction::DiscardOverlap, {fission, overlap, {}}, 0);
          break;
        }
        overlap_former = overlap_best;
      }
      if (!(fission_best < fission_former)) {
        mark(SearchAction::DiscardFission, {fission, 1, {}}, 0);
        break;
      }
      fission_former = fission_best;
    }
    result_.precision = precision_.value_or(0.0);
    if (!best_) throw Error("profile search evaluated no candidate");
    result_.profile = *best_;
    return std::move(result_);
  }

 private:
  // Innermost loop: binary search over the CPU/GPU split for one
  // configuration. Returns the best time this configuration reached.
  double distribute(const PlatformConfig& config, std::size_t wgs) {
    if (!target_.has_cpu() || !target_.has_gpu()) {
      Split only = target_.has_cpu() ? Split{1.0, 0.0} : Split{0.0, 1.0};
      return probe(config, wgs, 0, only).time;
    }
    WldGenState state;
    state.granule = target_.granule_share(config);
    Bracket bracket;
    double cand_best = kInf;
    for (std::size_t i = 0;; ++i) {
      Split dist;
      try {
        dist = wld_next(state);
      } catch (const Exhausted&) {
        mark(SearchAction::Exhausted, config, wgs);
        break;
      }
      const double global_before = best_time();
      Evaluation ev = probe(config, wgs, i, dist);
      const double prev_cand = cand_best;
      cand_best = std::min(cand_best, ev.time);
      bracket.add(dist.cpu, ev.per_type);

      const double precision = *precision_;
      if (params_.literal_breaks) {
        if (ev.time < global_before) {
          if (global_before - ev.time < precision) {
            mark(SearchAction::PrecisionBreak, config, wgs);
            break;
          }
        } else {
          break;
        }
      } else if (ev.time < prev_cand && bracket.closed() && cand_best - bracket.lower_bound() < precision) {
        mark(SearchAction::PrecisionBreak, config, wgs);
        break;
      }
      state = wld_feedback(state, ev.per_type);
    }
    return cand_best;
  }

  Evaluation probe(const PlatformConfig& config, std::size_t wgs, std::size_t iteration, const Split& dist) {
    Evaluation ev = target_.evaluate(config, dist, params_.number_executions);
    ++result_.evaluations;
    if (!precision_) precision_ = 0.01 * ev.time;
    SearchRecord rec{config.fission, config.overlap, wgs, iteration, dist, ev.time, 0.0, SearchAction::Evaluated};
    if (ev.time < best_time()) {
      Profile p{sct_id_, workload_, dist, config, ev.time, Provenance::Built};
      kb_.store(p);
      best_ = std::move(p);
      rec.action = SearchAction::Stored;
    }
    rec.best_time = best_time();
    result_.trace.push_back(rec);
    return ev;
  }

  void mark(SearchAction action, const PlatformConfig& config, std::size_t wgs) {
    SearchRecord rec;
    rec.fission = config.fission;
    rec.overlap = config.overlap;
    rec.wgs = wgs;
    rec.action = action;
    rec.best_time = best_time();
    result_.trace.push_back(rec);
  }

  double best_time() const { return best_ ? best_->best_time : kInf; }

  const std::string& sct_id_;
  const WorkloadId& workload_;
  const TunerParams& params_;
  ProfileTarget& target_;
  KnowledgeBase& kb_;
  std::optional<double> precision_;
  std::optional<Profile> best_;
  ProfileResult result_;
};

}  // namespace

ProfileResult build_profile(const std::string& sct_id, const WorkloadId& workload, const TunerParams& params,
                            ProfileTarget& target, KnowledgeBase& kb) {
  params.validate();
  return Search(sct_id, workload, params, target, kb).run();
}

}  // namespace skelrt
