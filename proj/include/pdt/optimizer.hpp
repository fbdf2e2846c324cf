#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "pdt/belief.hpp"
#include "pdt/consolidation.hpp"
#include "pdt/policy.hpp"
#include "pdt/random.hpp"
#include "pdt/soil_priors.hpp"

namespace pdt {

enum class PolicyKind { bu, static_only };

constexpr std::string_view policy_name(PolicyKind k) noexcept {
  return k == PolicyKind::bu ? "bu" : "static";
}

/// Everything a rollout needs: physics, priors, requirements, economics and
/// the decision search grid.
struct DecisionProblem {
  std::shared_ptr<const SiteModel> site = std::make_shared<SiteModel>();
  SoilPriorSet priors;
  Requirements requirements;
  CostParams costs;
  std::vector<double> increment_grid = make_increment_grid();
  FilterOptions filter;
  GateMeasure gate = GateMeasure::cov;
  /// Largest initial surcharge the problem admits; sets the stress range
  /// every sampled soil must support.
  double max_h0_m = 2.0;

  double max_surcharge_m() const noexcept {
    return max_h0_m + (increment_grid.empty() ? 0.0 : increment_grid.back());
  }

  /// Soil draws must keep every layer below sigma_L under the heaviest load
  /// the problem can apply.
  SoilAdmissibility admissibility() const {
    const EmbankmentGeometry g = site->geometry;
    const double h = g.embankment_height_m + max_surcharge_m();
    return [g, h](const SoilSample& s) { return max_final_stress(s, g, s.gamma_emb * h) <= s.sigma_L; };
  }
};

struct RolloutInputs {
  std::uint64_t index = 0;
  SoilSample truth;
  std::vector<double> noise;  // standard normals, entry t-1 for week t
  std::uint64_t belief_seed = 0;

  std::uint64_t truth_hash() const noexcept {
    Hasher h;
    for (SoilParam q : kSoilParams) h.add(truth[q]);
    for (double x : noise) h.add(x);
    return h.value();
  }
};

/// Ground truth and measurement noise for rollout k. Depends only on
/// (seed, k), never on the policy being evaluated.
inline RolloutInputs draw_rollout_inputs(const DecisionProblem& p, std::uint64_t seed, std::uint64_t k) {
  RolloutInputs in;
  in.index = k;
  Rng truth_rng = make_stream(seed, "truth", k);
  in.truth = sample_soil(p.priors, truth_rng, 1, p.admissibility()).front();
  Rng noise_rng = make_stream(seed, "noise", k);
  std::normal_distribution<double> n(0.0, 1.0);
  in.noise.resize(static_cast<std::size_t>(p.requirements.t_max_week));
  for (double& x : in.noise) x = n(noise_rng);
  in.belief_seed = derive_seed(seed, "belief", k);
  return in;
}

struct RolloutRecord {
  std::uint64_t index = 0;
  std::uint64_t truth_hash = 0;
  int decision_week = -1;  // week the gate opened; -1 if never
  DecisionKind decision = DecisionKind::keep_measuring;
  double h_add_m = 0.0;
  bool grid_exhausted = false;
  double settlement_tmax_m = 0.0;
  double ocr_tmax = 0.0;
  CostBreakdown cost;
};

/// One synthetic project: measure weekly, update the belief, follow the
/// policy, and score the realized (true) trajectory.
inline RolloutRecord run_rollout(const DecisionProblem& p, const HeuristicParams& w, PolicyKind kind,
                                 const RolloutInputs& in, double sigma_eps, std::size_t n_bu) {
  const auto& req = p.requirements;
  ActionSchedule sched{w.h0_m, std::nullopt, 0.0};
  ConsolidationResponse truth(in.truth, *p.site, sched);
  RolloutRecord rec;
  rec.index = in.index;
  rec.truth_hash = in.truth_hash();

  if (kind == PolicyKind::bu) {
    Belief b = init_belief(p.priors, p.site, sched, n_bu, in.belief_seed, p.admissibility(), p.filter);
    for (int t = 1; t <= req.t_max_week; ++t) {
      const double z = truth.settlement(t) + sigma_eps * in.noise[static_cast<std::size_t>(t - 1)];
      b = update(b, Measurement{static_cast<double>(t), z, sigma_eps});
      const Decision d = heuristic_bu_decide(b, t, w, req, p.increment_grid, p.gate);
      if (d.kind == DecisionKind::keep_measuring) continue;
      rec.decision_week = t;
      rec.decision = d.kind;
      if (d.kind == DecisionKind::adjust) {
        rec.h_add_m = d.h_add_m;
        rec.grid_exhausted = d.grid_exhausted;
        truth = truth.with_increment(*p.site, t, d.h_add_m);
      }
      break;
    }
  } else {
    rec.decision = heuristic_static_decide(0.0).kind;
  }
  rec.settlement_tmax_m = truth.settlement(req.t_max_week);
  rec.ocr_tmax = truth.ocr(req.t_max_week);
  rec.cost = total_cost(truth, req, p.costs, p.site->geometry.road_length_m);
  return rec;
}

struct EvaluationResult {
  double mean_cost = 0.0;
  double std_cost = 0.0;  // n-1 denominator
  CostBreakdown component_means;
  std::vector<RolloutRecord> records;

  double standard_error() const noexcept {
    return records.empty() ? 0.0 : std_cost / std::sqrt(static_cast<double>(records.size()));
  }
};

inline EvaluationResult summarize(std::vector<RolloutRecord> records) {
  EvaluationResult r;
  const std::size_t n = records.size();
  std::vector<double> tot(n), a(n), b(n), c(n), d(n);
  for (std::size_t k = 0; k < n; ++k) {
    tot[k] = records[k].cost.total();
    a[k] = records[k].cost.sur_initial;
    b[k] = records[k].cost.sur_increase;
    c[k] = records[k].cost.delay;
    d[k] = records[k].cost.ocr;
  }
  const double dn = static_cast<double>(n);
  r.mean_cost = pairwise_sum(tot) / dn;
  r.component_means.sur_initial = pairwise_sum(a) / dn;
  r.component_means.sur_increase = pairwise_sum(b) / dn;
  r.component_means.delay = pairwise_sum(c) / dn;
  r.component_means.ocr = pairwise_sum(d) / dn;
  for (auto& x : tot) x = (x - r.mean_cost) * (x - r.mean_cost);
  r.std_cost = n > 1 ? std::sqrt(pairwise_sum(tot) / (dn - 1.0)) : 0.0;
  r.records = std::move(records);
  return r;
}

/// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
/// handled exactly once; callers write results by index.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < n; i += threads) body(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Monte Carlo estimate of the expected total cost of a policy. Rollout k
/// uses the same ground truth for every w (common random numbers).
inline EvaluationResult evaluate_policy(const HeuristicParams& w, const DecisionProblem& p, PolicyKind kind,
                                        std::size_t n_mc, std::size_t n_bu, std::uint64_t seed,
                                        double sigma_eps, unsigned threads = 1) {
  if (n_mc < 2) throw Error(Errc::invalid_argument, "n_mc must be >= 2");
  w.validate();
  if (kind == PolicyKind::bu && !(sigma_eps > 0.0)) throw Error(Errc::invalid_argument, "sigma_eps must be > 0");
  std::vector<RolloutRecord> recs(n_mc);
  parallel_for(n_mc, threads, [&](std::size_t k) {
    try {
      recs[k] = run_rollout(p, w, kind, draw_rollout_inputs(p, seed, k), sigma_eps, n_bu);
    } catch (const Error& e) {
      throw Error(e.code(), "rollout " + std::to_string(k) + ": " + e.what());
    }
  });
  return summarize(std::move(recs));
}

// ---------------------------------------------------------------------------
// Cross-entropy search

struct ParamBounds {
  double lo = 0.0;
  double hi = 1.0;
};

struct CeConfig {
  std::size_t n_ce = 100;
  std::size_t n_iter_max = 50;
  std::size_t n_mc = 100;
  std::size_t n_bu = 100;
  double elite_fraction = 0.1;
  double smoothing_alpha = 0.7;
  std::vector<double> init_mean = {1.0, 0.5, 0.5};
  std::vector<double> init_std = {0.5, 0.25, 0.25};
  std::vector<ParamBounds> bounds = {{0.0, 2.0}, {0.01, 1.0}, {0.01, 0.99}};
  double convergence_std_tol = 1e-3;
  std::uint64_t master_seed = 0;
  std::size_t restarts = 3;
  std::size_t final_n_mc = 5000;
  unsigned threads = 1;

  std::size_t dimension() const noexcept { return init_mean.size(); }

  std::size_t elite_count() const noexcept {
    return static_cast<std::size_t>(std::ceil(static_cast<double>(n_ce) * elite_fraction - 1e-9));
  }

  void validate() const {
    if (!(elite_fraction > 0.0 && elite_fraction < 1.0))
      throw Error(Errc::invalid_argument, "elite_fraction must lie in (0, 1)");
    if (!(smoothing_alpha > 0.0 && smoothing_alpha <= 1.0))
      throw Error(Errc::invalid_argument, "smoothing_alpha must lie in (0, 1]");
    if (static_cast<double>(n_ce) * elite_fraction < 2.0)
      throw Error(Errc::invalid_argument, "n_ce * elite_fraction must be >= 2");
    const std::size_t d = init_mean.size();
    if (d == 0 || init_std.size() != d || bounds.size() != d)
      throw Error(Errc::invalid_argument, "init_mean, init_std and bounds must have equal, non-zero size");
    for (std::size_t i = 0; i < d; ++i) {
      if (!(bounds[i].lo < bounds[i].hi)) throw Error(Errc::invalid_argument, "bounds must satisfy lo < hi");
      if (!(init_std[i] > 0.0)) throw Error(Errc::invalid_argument, "init_std must be > 0");
    }
    if (n_iter_max == 0) throw Error(Errc::invalid_argument, "n_iter_max must be >= 1");
  }

  /// Same settings restricted to the first `dims` parameters.
  CeConfig restricted(std::size_t dims) const {
    CeConfig c = *this;
    c.init_mean.resize(dims);
    c.init_std.resize(dims);
    c.bounds.resize(dims);
    return c;
  }
};

/// Noisy objective; the seed carries the common random numbers shared by all
/// candidates of one iteration.
using NoisyObjective = std::function<double(std::span<const double> w, std::uint64_t crn_seed)>;

struct CeIteration {
  std::size_t iteration = 0;
  std::uint64_t crn_seed = 0;
  std::vector<double> mean;  // sampling distribution used for this iteration
  std::vector<double> std;
  std::vector<std::vector<double>> candidates;
  std::vector<double> costs;  // +inf for failed evaluations
  std::vector<std::size_t> elite;
  double elite_mean_cost = 0.0;
  double best_cost = 0.0;
};

struct CeResult {
  std::vector<double> w_opt;
  std::vector<CeIteration> trace;
  bool converged = false;
};

class OptimizationFailed : public Error {
 public:
  OptimizationFailed(std::vector<CeIteration> trace, const std::string& what)
      : Error(Errc::optimization_failed, what), trace_(std::move(trace)) {}
  const std::vector<CeIteration>& trace() const noexcept { return trace_; }

 private:
  std::vector<CeIteration> trace_;
};

/// Draw from N(mean, sd) truncated to [lo, hi] by rejection; falls back to a
/// uniform draw in the box when the mass inside is negligible.
inline double sample_truncated_normal(Rng& rng, double mean, double sd, double lo, double hi) {
  std::normal_distribution<double> n(mean, sd);
  for (int i = 0; i < 1000; ++i) {
    const double x = n(rng);
    if (x >= lo && x <= hi) return x;
  }
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline CeResult cross_entropy_optimize(const NoisyObjective& objective, const CeConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.dimension();
  std::vector<double> mean = cfg.init_mean;
  std::vector<double> sd = cfg.init_std;
  for (std::size_t i = 0; i < d; ++i) mean[i] = std::clamp(mean[i], cfg.bounds[i].lo, cfg.bounds[i].hi);
  const std::size_t n_elite = cfg.elite_count();
  CeResult res;

  for (std::size_t it = 0; it < cfg.n_iter_max; ++it) {
    CeIteration rec;
    rec.iteration = it;
    rec.crn_seed = derive_seed(cfg.master_seed, "ce-crn", it);
    rec.mean = mean;
    rec.std = sd;
    Rng rng = make_stream(cfg.master_seed, "ce-sample", it);
    rec.candidates.resize(cfg.n_ce);
    for (auto& c : rec.candidates) {
      c.resize(d);
      for (std::size_t i = 0; i < d; ++i)
        c[i] = sample_truncated_normal(rng, mean[i], sd[i], cfg.bounds[i].lo, cfg.bounds[i].hi);
    }
    rec.costs.assign(cfg.n_ce, std::numeric_limits<double>::infinity());
    std::size_t failures = 0;
    for (std::size_t j = 0; j < cfg.n_ce; ++j) {
      try {
        rec.costs[j] = objective(rec.candidates[j], rec.crn_seed);
        if (std::isnan(rec.costs[j])) rec.costs[j] = std::numeric_limits<double>::infinity();
      } catch (const Error&) {
        ++failures;
      }
    }
    if (failures == cfg.n_ce) {
      res.trace.push_back(std::move(rec));
      throw OptimizationFailed(std::move(res.trace), "every candidate failed in iteration " + std::to_string(it));
    }
    std::vector<std::size_t> order(cfg.n_ce);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rec.costs[a] < rec.costs[b]; });
    rec.elite.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_elite));
    std::vector<double> ec;
    for (std::size_t j : rec.elite)
      if (std::isfinite(rec.costs[j])) ec.push_back(rec.costs[j]);
    rec.elite_mean_cost = ec.empty() ? std::numeric_limits<double>::infinity()
                                     : pairwise_sum(ec) / static_cast<double>(ec.size());
    rec.best_cost = rec.costs[order.front()];

    // Elite statistics over finite-cost members only.
    std::vector<std::size_t> usable;
    for (std::size_t j : rec.elite)
      if (std::isfinite(rec.costs[j])) usable.push_back(j);
    for (std::size_t i = 0; i < d; ++i) {
      std::vector<double> v;
      for (std::size_t j : usable) v.push_back(rec.candidates[j][i]);
      const double m = pairwise_sum(v) / static_cast<double>(v.size());
      for (double& x : v) x = (x - m) * (x - m);
      const double s = std::sqrt(pairwise_sum(v) / static_cast<double>(v.size()));
      mean[i] = cfg.smoothing_alpha * m + (1.0 - cfg.smoothing_alpha) * mean[i];
      sd[i] = cfg.smoothing_alpha * s + (1.0 - cfg.smoothing_alpha) * sd[i];
    }
    res.trace.push_back(std::move(rec));
    if (std::all_of(sd.begin(), sd.end(), [&](double s) { return s < cfg.convergence_std_tol; })) {
      res.converged = true;
      break;
    }
  }
  res.w_opt = mean;
  return res;
}

// ---------------------------------------------------------------------------
// Study

inline HeuristicParams heuristic_from_vector(std::span<const double> w) {
  HeuristicParams h;
  h.h0_m = w[0];
  if (w.size() > 1) h.cov_th = w[1];
  if (w.size() > 2) h.p_th = w[2];
  return h;
}

struct StudyRow {
  PolicyKind policy = PolicyKind::bu;
  std::optional<double> sigma_eps_m;
  HeuristicParams w_opt;
  std::size_t best_restart = 0;
  std::vector<CeResult> restarts;
  std::vector<EvaluationResult> restart_evaluations;  // final-n_mc evaluation of each restart
  EvaluationResult final_eval;                        // the selected restart's
};

struct StudyResult {
  std::vector<StudyRow> rows;  // BU rows in sigma order, then the static row
};

inline NoisyObjective make_policy_objective(const DecisionProblem& p, PolicyKind kind, double sigma_eps,
                                            const CeConfig& cfg) {
  return [&p, kind, sigma_eps, n_mc = cfg.n_mc, n_bu = cfg.n_bu, threads = cfg.threads](
             std::span<const double> w, std::uint64_t seed) {
    return evaluate_policy(heuristic_from_vector(w), p, kind, n_mc, n_bu, seed, sigma_eps, threads).mean_cost;
  };
}

/// CE optimization with restarts; each restart's w_opt is re-evaluated at
/// final_n_mc on a shared seed and the cheapest is kept.
inline StudyRow optimize_policy(const DecisionProblem& p, PolicyKind kind, double sigma_eps, const CeConfig& base) {
  const std::size_t dims = kind == PolicyKind::bu ? 3 : 1;
  CeConfig cfg = base.restricted(dims);
  StudyRow row;
  row.policy = kind;
  if (kind == PolicyKind::bu) row.sigma_eps_m = sigma_eps;
  const auto objective = make_policy_objective(p, kind, sigma_eps, cfg);
  const std::uint64_t final_seed = derive_seed(base.master_seed, "final-eval");
  const std::size_t restarts = std::max<std::size_t>(1, cfg.restarts);
  for (std::size_t r = 0; r < restarts; ++r) {
    CeConfig rc = cfg;
    rc.master_seed = derive_seed(base.master_seed, kind == PolicyKind::bu ? "ce-bu" : "ce-static", r);
    row.restarts.push_back(cross_entropy_optimize(objective, rc));
    row.restart_evaluations.push_back(evaluate_policy(heuristic_from_vector(row.restarts.back().w_opt), p, kind,
                                                      cfg.final_n_mc, cfg.n_bu, final_seed, sigma_eps,
                                                      cfg.threads));
    if (row.restart_evaluations.back().mean_cost < row.restart_evaluations[row.best_restart].mean_cost)
      row.best_restart = r;
  }
  row.w_opt = heuristic_from_vector(row.restarts[row.best_restart].w_opt);
  row.final_eval = row.restart_evaluations[row.best_restart];
  return row;
}

/// BU heuristic optimized per measurement error, plus the static baseline.
/// An empty sigma list yields an empty table.
inline StudyResult run_study(const DecisionProblem& p, std::span<const double> sigma_eps_list, const CeConfig& cfg) {
  StudyResult out;
  if (sigma_eps_list.empty()) return out;
  for (double s : sigma_eps_list) out.rows.push_back(optimize_policy(p, PolicyKind::bu, s, cfg));
  out.rows.push_back(optimize_policy(p, PolicyKind::static_only, sigma_eps_list.front(), cfg));
  return out;
}

}  // namespace pdt
