#pragma once

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "pdt/consolidation.hpp"
#include "pdt/error.hpp"
#include "pdt/random.hpp"
#include "pdt/soil_priors.hpp"

namespace pdt {

struct Measurement {
  double t_week = 0.0;
  double z_s_m = 0.0;
  double sigma_eps_m = 0.05;
};

enum class Resampling { multinomial, systematic };

/// log(DBL_MIN): below this every linear-space likelihood is zero.
inline const double kUnderflowLogLikelihood = std::log(DBL_MIN);

struct FilterOptions {
  Resampling resampling = Resampling::multinomial;
  /// Std of Gaussian log-space jitter applied after resampling; 0 disables.
  double jitter_log_std = 0.0;
  /// Update fails as degenerate when the best particle's log-likelihood is
  /// below this floor.
  double min_log_likelihood = kUnderflowLogLikelihood;
  /// Jittered soils failing this check keep their pre-jitter values.
  /// init_belief fills it from its admissibility argument when unset.
  SoilAdmissibility admissible;
};

struct Particle {
  ConsolidationResponse response;
  double weight = 0.0;

  const SoilSample& soil() const noexcept { return response.soil(); }
};

/// Weighted particle approximation of the digital state. Beliefs are
/// immutable values; every operation returns a new one.
class Belief {
 public:
  Belief(std::shared_ptr<const SiteModel> site, std::vector<Particle> particles, double t_current,
         ActionSchedule schedule, std::uint64_t seed, std::uint64_t update_count, FilterOptions options)
      : site_(std::move(site)),
        particles_(std::move(particles)),
        t_current_(t_current),
        schedule_(std::move(schedule)),
        seed_(seed),
        update_count_(update_count),
        options_(options) {
    if (particles_.size() < 2) throw Error(Errc::invalid_argument, "a belief needs at least 2 particles");
  }

  const std::vector<Particle>& particles() const noexcept { return particles_; }
  std::size_t size() const noexcept { return particles_.size(); }
  double t_current() const noexcept { return t_current_; }
  const ActionSchedule& schedule() const noexcept { return schedule_; }
  const SiteModel& site() const noexcept { return *site_; }
  const std::shared_ptr<const SiteModel>& site_ptr() const noexcept { return site_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t update_count() const noexcept { return update_count_; }
  const FilterOptions& options() const noexcept { return options_; }

  std::vector<double> weights() const {
    std::vector<double> w(particles_.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = particles_[i].weight;
    return w;
  }

  std::uint64_t hash() const noexcept {
    Hasher h;
    h.add(t_current_).add(schedule_.h0_m).add(schedule_.h_add_m).add(schedule_.t_add_week.value_or(-1.0));
    h.add(update_count_);
    for (const auto& p : particles_) {
      for (SoilParam q : kSoilParams) h.add(p.soil()[q]);
      h.add(p.weight);
    }
    return h.value();
  }

 private:
  std::shared_ptr<const SiteModel> site_;
  std::vector<Particle> particles_;
  double t_current_;
  ActionSchedule schedule_;
  std::uint64_t seed_;
  std::uint64_t update_count_;
  FilterOptions options_;
};

inline Belief init_belief(const SoilPriorSet& priors, std::shared_ptr<const SiteModel> site,
                          const ActionSchedule& initial, std::size_t n_s, std::uint64_t seed,
                          const SoilAdmissibility& admissible = {}, FilterOptions options = {}) {
  if (n_s < 2) throw Error(Errc::invalid_argument, "n_s must be >= 2");
  if (initial.has_increment())
    throw Error(Errc::invalid_argument, "initial schedule must not contain an increment");
  Rng rng = make_stream(seed, "prior");
  auto soils = sample_soil(priors, rng, n_s, admissible);
  if (!options.admissible) options.admissible = admissible;
  std::vector<Particle> ps;
  ps.reserve(n_s);
  const double w = 1.0 / static_cast<double>(n_s);
  for (const auto& s : soils) ps.push_back({ConsolidationResponse(s, *site, initial), w});
  return Belief(std::move(site), std::move(ps), 0.0, initial, seed, 0, options);
}

inline double log_likelihood(const Measurement& z, double s_pred) noexcept {
  const double r = (z.z_s_m - s_pred) / z.sigma_eps_m;
  return -0.5 * r * r - std::log(z.sigma_eps_m * std::sqrt(2.0 * std::numbers::pi));
}

/// Gaussian measurement-error density at z - s_pred.
inline double likelihood(const Measurement& z, double s_pred) {
  if (!(z.sigma_eps_m > 0.0)) throw Error(Errc::invalid_argument, "sigma_eps must be > 0");
  return std::exp(log_likelihood(z, s_pred));
}

/// Optional factor for property data; returns a non-negative likelihood.
using PropertyLikelihood = std::function<double(const SoilSample&)>;

struct UpdateDiagnostics {
  double max_log_likelihood = 0.0;
  double effective_sample_size = 0.0;  // before resampling
  double min_abs_residual_sigma = 0.0; // closest particle, in units of sigma_eps
  std::size_t unique_after_resampling = 0;
};

/// Normalized posterior weights before resampling: w_k proportional to the
/// prior weight times the likelihood, computed in log space.
inline std::vector<double> posterior_weights(const Belief& b, const Measurement& z,
                                             const PropertyLikelihood& property = {},
                                             UpdateDiagnostics* diag = nullptr) {
  if (!(z.sigma_eps_m > 0.0)) throw Error(Errc::invalid_argument, "sigma_eps must be > 0");
  const auto& ps = b.particles();
  std::vector<double> logw(ps.size());
  double max_ll = -std::numeric_limits<double>::infinity();
  double min_res = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < ps.size(); ++k) {
    const double s = ps[k].response.settlement(z.t_week);
    double ll = log_likelihood(z, s);
    if (property) {
      const double f = property(ps[k].soil());
      ll += f > 0.0 ? std::log(f) : -std::numeric_limits<double>::infinity();
    }
    max_ll = std::max(max_ll, ll);
    min_res = std::min(min_res, std::abs(z.z_s_m - s) / z.sigma_eps_m);
    logw[k] = ps[k].weight > 0.0 ? std::log(ps[k].weight) + ll : -std::numeric_limits<double>::infinity();
  }
  if (diag) {
    diag->max_log_likelihood = max_ll;
    diag->min_abs_residual_sigma = min_res;
  }
  if (!(max_ll >= b.options().min_log_likelihood))
    throw DegenerateUpdateError(max_ll, "all particle likelihoods underflow (max log-likelihood " +
                                            std::to_string(max_ll) + ")");
  const double top = *std::max_element(logw.begin(), logw.end());
  std::vector<double> w(ps.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::exp(logw[k] - top);
  const double total = pairwise_sum(w);
  for (double& x : w) x /= total;
  if (diag) {
    std::vector<double> sq(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) sq[k] = w[k] * w[k];
    diag->effective_sample_size = 1.0 / pairwise_sum(sq);
  }
  return w;
}

/// Indices drawn with replacement in proportion to `w` (which sums to 1).
inline std::vector<std::size_t> resample_indices(std::span<const double> w, std::size_t n, Resampling scheme,
                                                 Rng& rng) {
  std::vector<double> cdf(w.size());
  std::partial_sum(w.begin(), w.end(), cdf.begin());
  cdf.back() = 1.0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::size_t> idx(n);
  auto pick = [&](double u) {
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min(static_cast<std::size_t>(it - cdf.begin()), w.size() - 1);
  };
  if (scheme == Resampling::multinomial) {
    for (auto& i : idx) i = pick(unif(rng));
  } else {
    const double u0 = unif(rng) / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) idx[j] = pick(u0 + static_cast<double>(j) / static_cast<double>(n));
  }
  return idx;
}

/// Likelihood weighting followed by resampling to n_s equal-weight particles.
inline Belief update(const Belief& b, const Measurement& z, const PropertyLikelihood& property = {},
                     UpdateDiagnostics* diag = nullptr) {
  if (z.t_week < b.t_current())
    throw Error(Errc::out_of_order, "measurement at week " + std::to_string(z.t_week) +
                                        " precedes belief time " + std::to_string(b.t_current()));
  const auto w = posterior_weights(b, z, property, diag);
  const std::size_t n = b.size();
  Rng rng = make_stream(b.seed(), "resample", b.update_count());
  const auto idx = resample_indices(w, n, b.options().resampling, rng);

  std::vector<Particle> next;
  next.reserve(n);
  const double eq = 1.0 / static_cast<double>(n);
  const double jitter = b.options().jitter_log_std;
  Rng jrng = make_stream(b.seed(), "jitter", b.update_count());
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i : idx) {
    const auto& src = b.particles()[i];
    if (jitter > 0.0) {
      SoilSample s = src.soil();
      for (SoilParam q : kSoilParams) s[q] *= std::exp(jitter * gauss(jrng));
      const auto& ok = b.options().admissible;
      if (s.sigma_c <= s.sigma_L && (!ok || ok(s))) {
        try {
          next.push_back({ConsolidationResponse(s, b.site(), b.schedule()), eq});
          continue;
        } catch (const Error&) {
          // jittered state left the admissible stress range; keep the original
        }
      }
    }
    next.push_back({src.response, eq});
  }
  if (diag) {
    std::vector<std::size_t> u = idx;
    std::sort(u.begin(), u.end());
    diag->unique_after_resampling = static_cast<std::size_t>(std::unique(u.begin(), u.end()) - u.begin());
  }
  return Belief(b.site_ptr(), std::move(next), z.t_week, b.schedule(), b.seed(), b.update_count() + 1,
                b.options());
}

/// Records a surcharge increment placed at t_add and recomputes every
/// particle's response with settlement continuity at t_add.
inline Belief apply_action(const Belief& b, double t_add, double h_add) {
  if (b.schedule().has_increment())
    throw Error(Errc::unsupported_action, "a surcharge increment was already applied");
  if (!(h_add >= 0.0)) throw Error(Errc::invalid_argument, "h_add must be >= 0");
  if (h_add == 0.0) return b;
  ActionSchedule s = b.schedule();
  s.t_add_week = t_add;
  s.h_add_m = h_add;
  std::vector<Particle> next;
  next.reserve(b.size());
  for (const auto& p : b.particles())
    next.push_back({p.response.with_increment(b.site(), t_add, h_add), p.weight});
  return Belief(b.site_ptr(), std::move(next), b.t_current(), s, b.seed(), b.update_count(), b.options());
}

// ---------------------------------------------------------------------------
// Posterior summaries

struct SettlementAt {
  double t_week;
};
struct OcrAt {
  double t_week;
};
/// Long-term settlement under the full load history.
struct LongTermSettlement {};

using Functional = std::variant<SettlementAt, OcrAt, LongTermSettlement>;

inline double evaluate(const Functional& f, const ConsolidationResponse& r) {
  return std::visit(
      [&](const auto& q) -> double {
        using T = std::decay_t<decltype(q)>;
        if constexpr (std::is_same_v<T, SettlementAt>)
          return r.settlement(q.t_week);
        else if constexpr (std::is_same_v<T, OcrAt>)
          return r.ocr(q.t_week);
        else
          return r.s_inf_after();
      },
      f);
}

struct PosteriorStats {
  double mean = 0.0;
  double std = 0.0;
  std::optional<double> cov;  // empty when |mean| < 1e-9
  std::vector<double> probabilities;
  std::vector<double> quantiles;
};

inline constexpr double kCovMeanGuard = 1e-9;

/// Weighted quantile: smallest value whose cumulative weight reaches p.
inline double weighted_quantile(std::span<const std::pair<double, double>> sorted_value_weight, double p) {
  double cum = 0.0;
  for (const auto& [v, w] : sorted_value_weight) {
    cum += w;
    if (cum + 1e-12 >= p) return v;
  }
  return sorted_value_weight.back().first;
}

inline PosteriorStats posterior_stats(const Belief& b, const Functional& f, std::span<const double> ps = {}) {
  const auto& parts = b.particles();
  if (parts.empty()) throw Error(Errc::invalid_argument, "empty belief");
  std::vector<std::pair<double, double>> vw(parts.size());
  std::vector<double> wx(parts.size());
  std::vector<double> w(parts.size());
  for (std::size_t k = 0; k < parts.size(); ++k) {
    vw[k] = {evaluate(f, parts[k].response), parts[k].weight};
    w[k] = parts[k].weight;
  }
  const double wsum = pairwise_sum(w);
  for (std::size_t k = 0; k < parts.size(); ++k) wx[k] = vw[k].second * vw[k].first;
  PosteriorStats st;
  st.mean = pairwise_sum(wx) / wsum;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const double d = vw[k].first - st.mean;
    wx[k] = vw[k].second * d * d;
  }
  st.std = std::sqrt(pairwise_sum(wx) / wsum);
  if (std::abs(st.mean) >= kCovMeanGuard) st.cov = st.std / std::abs(st.mean);
  if (!ps.empty()) {
    std::stable_sort(vw.begin(), vw.end(), [](const auto& a, const auto& c) { return a.first < c.first; });
    for (auto& e : vw) e.second /= wsum;
    for (double p : ps) {
      st.probabilities.push_back(p);
      st.quantiles.push_back(weighted_quantile(vw, p));
    }
  }
  return st;
}

inline double coefficient_of_variation(const PosteriorStats& st) {
  if (!st.cov) throw Error(Errc::undefined_cov, "posterior mean too close to zero for a COV");
  return *st.cov;
}

/// Weighted fraction of particles whose S(t_max) falls short of s_target.
inline double prob_below_target(const Belief& b, double s_target, double t_max) {
  std::vector<double> hits(b.size());
  for (std::size_t k = 0; k < b.size(); ++k) {
    const auto& p = b.particles()[k];
    hits[k] = p.response.settlement(t_max) < s_target ? p.weight : 0.0;
  }
  return pairwise_sum(hits);
}

}  // namespace pdt
