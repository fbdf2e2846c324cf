#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "pdt/error.hpp"
#include "pdt/soil_priors.hpp"

namespace pdt {

inline constexpr double kWeeksPerYear = 52.0;

struct EmbankmentGeometry {
  double clay_thickness_m = 15.5;
  double crust_thickness_m = 0.3;
  double embankment_height_m = 1.2;
  int n_layers = 31;
  double groundwater_depth_m = 0.3;  // below ground surface
  double gamma_w = 9.81;             // kN/m3
  double road_length_m = 550.0;      // only scales costs

  void validate() const {
    if (!(clay_thickness_m > 0.0)) throw Error(Errc::invalid_geometry, "clay_thickness_m must be > 0");
    if (!(crust_thickness_m > 0.0)) throw Error(Errc::invalid_geometry, "crust_thickness_m must be > 0");
    if (!(embankment_height_m >= 0.0))
      throw Error(Errc::invalid_geometry, "embankment_height_m must be >= 0");
    if (n_layers < 1) throw Error(Errc::invalid_geometry, "n_layers must be >= 1");
    if (!(groundwater_depth_m >= 0.0))
      throw Error(Errc::invalid_geometry, "groundwater_depth_m must be >= 0");
    if (!(gamma_w > 0.0)) throw Error(Errc::invalid_geometry, "gamma_w must be > 0");
    if (!(road_length_m > 0.0)) throw Error(Errc::invalid_geometry, "road_length_m must be > 0");
  }

  friend bool operator==(const EmbankmentGeometry&, const EmbankmentGeometry&) = default;
};

enum class DrainPattern { square, triangular };
enum class Drainage { single, double_sided };

struct PvdDesign {
  double spacing_m = 1.2;
  DrainPattern pattern = DrainPattern::square;
  double drain_diameter_m = 0.066;
  Drainage drainage = Drainage::double_sided;

  /// Diameter of the soil cylinder drained by one PVD.
  double influence_diameter() const noexcept {
    return (pattern == DrainPattern::square ? 1.13 : 1.05) * spacing_m;
  }

  double drain_path(double clay_thickness_m) const noexcept {
    return drainage == Drainage::double_sided ? 0.5 * clay_thickness_m : clay_thickness_m;
  }

  void validate() const {
    if (!(drain_diameter_m > 0.0)) throw Error(Errc::invalid_geometry, "drain diameter must be > 0");
    if (!(spacing_m > drain_diameter_m))
      throw Error(Errc::invalid_geometry, "PVD spacing must exceed the drain diameter");
  }

  friend bool operator==(const PvdDesign&, const PvdDesign&) = default;
};

/// Everything the behavior model needs besides the soil realization.
struct SiteModel {
  EmbankmentGeometry geometry;
  PvdDesign pvd;
  double series_tolerance = 1e-10;

  void validate() const {
    geometry.validate();
    pvd.validate();
    if (!(pvd.influence_diameter() > pvd.drain_diameter_m))
      throw Error(Errc::invalid_geometry, "drain spacing ratio n must exceed 1");
    if (!(series_tolerance > 0.0)) throw Error(Errc::invalid_argument, "series_tolerance must be > 0");
  }
};

/// Surcharge decisions: initial height h0 and at most one increment.
struct ActionSchedule {
  double h0_m = 0.0;
  std::optional<double> t_add_week;
  double h_add_m = 0.0;

  bool has_increment() const noexcept { return t_add_week.has_value(); }

  void validate(double t_max_week) const {
    if (!(h0_m >= 0.0)) throw Error(Errc::invalid_argument, "h0 must be >= 0");
    if (!(h_add_m >= 0.0)) throw Error(Errc::invalid_argument, "h_add must be >= 0");
    if (t_add_week && (*t_add_week < 1.0 || *t_add_week > t_max_week))
      throw Error(Errc::invalid_argument, "t_add must lie in [1, t_max]");
    if (!t_add_week && h_add_m != 0.0)
      throw Error(Errc::invalid_argument, "h_add given without t_add");
  }

  friend bool operator==(const ActionSchedule&, const ActionSchedule&) = default;
};

// ---------------------------------------------------------------------------
// Degree of consolidation

inline constexpr double kSmallTimeFactor = 0.05;

namespace detail {
inline double ierfc(double x) noexcept {
  return std::exp(-x * x) / std::sqrt(std::numbers::pi) - x * std::erfc(x);
}
}  // namespace detail

/// Terzaghi average degree of consolidation for time factor T_v. The Fourier
/// series converges slowly for small T_v; there the equivalent image-source
/// series (which needs one or two terms) is used instead.
inline double vertical_degree_from_time_factor(double tv, double tol = 1e-10) noexcept {
  if (!(tv > 0.0)) return 0.0;
  if (tv < kSmallTimeFactor) {
    const double r = std::sqrt(tv);
    double s = 0.0;
    for (int n = 1;; ++n) {
      const double term = detail::ierfc(n / r);
      if (term < tol) break;
      s += (n % 2 == 0 ? term : -term);
    }
    return std::clamp(2.0 * r / std::sqrt(std::numbers::pi) + 4.0 * r * s, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int m = 0;; ++m) {
    const double big_m = (2 * m + 1) * std::numbers::pi / 2.0;
    const double term = 2.0 / (big_m * big_m) * std::exp(-big_m * big_m * tv);
    sum += term;
    if (term < tol) break;
  }
  return std::clamp(1.0 - sum, 0.0, 1.0);
}

inline double vertical_degree(double cv_m2_per_year, double drain_path_m, double t_week,
                              double tol = 1e-10) {
  if (!(cv_m2_per_year > 0.0) || !(drain_path_m > 0.0) || !(t_week >= 0.0))
    throw Error(Errc::invalid_argument, "vertical_degree requires cv > 0, drain_path > 0, t >= 0");
  const double tv = cv_m2_per_year * (t_week / kWeeksPerYear) / (drain_path_m * drain_path_m);
  return vertical_degree_from_time_factor(tv, tol);
}

/// Drain spacing factor mu(n) for an ideal drain (no smear, no well resistance).
inline double hansbo_mu(double n) {
  if (!(n > 1.0)) throw Error(Errc::invalid_geometry, "drain spacing ratio n must exceed 1");
  const double n2 = n * n;
  return n2 / (n2 - 1.0) * std::log(n) - (3.0 * n2 - 1.0) / (4.0 * n2);
}

inline double horizontal_degree(double ch_m2_per_year, const PvdDesign& pvd, double t_week) {
  if (!(ch_m2_per_year > 0.0) || !(t_week >= 0.0))
    throw Error(Errc::invalid_argument, "horizontal_degree requires ch > 0, t >= 0");
  const double de = pvd.influence_diameter();
  const double mu = hansbo_mu(de / pvd.drain_diameter_m);
  const double th = ch_m2_per_year * (t_week / kWeeksPerYear) / (de * de);
  return -std::expm1(-8.0 * th / mu);
}

constexpr double combined_degree(double uv, double uh) noexcept {
  return 1.0 - (1.0 - uv) * (1.0 - uh);
}

/// U(t) for one soil realization with the per-particle constants folded in.
class DegreeModel {
 public:
  DegreeModel() = default;
  DegreeModel(const SoilSample& soil, const SiteModel& site) : tol_(site.series_tolerance) {
    const double h = site.pvd.drain_path(site.geometry.clay_thickness_m);
    const double de = site.pvd.influence_diameter();
    kv_ = soil.cv / kWeeksPerYear / (h * h);
    kh_ = 8.0 * soil.ch / kWeeksPerYear / (de * de) / hansbo_mu(de / site.pvd.drain_diameter_m);
  }

  double vertical(double t_week) const noexcept {
    return vertical_degree_from_time_factor(kv_ * t_week, tol_);
  }
  double horizontal(double t_week) const noexcept {
    return t_week > 0.0 ? -std::expm1(-kh_ * t_week) : 0.0;
  }
  double operator()(double t_week) const noexcept {
    if (!(t_week > 0.0)) return 0.0;
    return combined_degree(vertical(t_week), horizontal(t_week));
  }

 private:
  double kv_ = 0.0;
  double kh_ = 0.0;
  double tol_ = 1e-10;
};

// ---------------------------------------------------------------------------
// Settlement magnitude

/// Strain from sigma0 to sigma0 + dsigma on the bilinear oedometer modulus:
/// M0 up to the preconsolidation pressure, ML from there up to sigma_L.
inline double strain_increment(double sigma0, double sigma_c, double sigma_L, double M0, double ML,
                               double dsigma) {
  if (!(sigma0 > 0.0)) throw Error(Errc::invalid_argument, "initial effective stress must be > 0");
  if (!(sigma_c <= sigma_L)) throw Error(Errc::invalid_argument, "sigma_c must not exceed sigma_L");
  if (!(M0 > 0.0) || !(ML > 0.0)) throw Error(Errc::invalid_argument, "moduli must be > 0");
  if (!(dsigma >= 0.0)) throw Error(Errc::invalid_argument, "load increment must be >= 0");
  const double sigma1 = sigma0 + dsigma;
  if (sigma1 > sigma_L)
    throw Error(Errc::stress_range_exceeded,
                "final stress " + std::to_string(sigma1) + " kPa exceeds sigma_L " +
                    std::to_string(sigma_L) + " kPa");
  const double stiff = std::max(0.0, std::min(sigma1, sigma_c) - sigma0) / M0;
  const double soft = std::max(0.0, sigma1 - std::max(sigma0, sigma_c)) / ML;
  return stiff + soft;
}

/// In-situ vertical effective stress at `depth_m` below ground surface. The
/// crust is assigned the clay unit weight; below the water table the buoyant
/// weight applies.
inline double initial_effective_stress(const EmbankmentGeometry& g, double gamma_cl, double depth_m) noexcept {
  return gamma_cl * depth_m - g.gamma_w * std::max(0.0, depth_m - g.groundwater_depth_m);
}

inline double clay_mid_depth(const EmbankmentGeometry& g) noexcept {
  return g.crust_thickness_m + 0.5 * g.clay_thickness_m;
}

inline double long_term_settlement(const SoilSample& soil, const EmbankmentGeometry& g, double load_kpa) {
  if (!(load_kpa >= 0.0)) throw Error(Errc::invalid_argument, "load must be >= 0");
  if (load_kpa == 0.0) return 0.0;
  const double b = g.clay_thickness_m / g.n_layers;
  double s = 0.0;
  for (int i = 0; i < g.n_layers; ++i) {
    const double depth = g.crust_thickness_m + (i + 0.5) * b;
    const double sigma0 = initial_effective_stress(g, soil.gamma_cl, depth);
    try {
      s += b * strain_increment(sigma0, soil.sigma_c, soil.sigma_L, soil.M0, soil.ML, load_kpa);
    } catch (const Error& e) {
      throw Error(e.code(), "layer " + std::to_string(i) + ": " + e.what());
    }
  }
  return s;
}

/// Highest final effective stress any layer reaches under `load_kpa`.
inline double max_final_stress(const SoilSample& soil, const EmbankmentGeometry& g, double load_kpa) noexcept {
  const double b = g.clay_thickness_m / g.n_layers;
  const double deepest = g.crust_thickness_m + (g.n_layers - 0.5) * b;
  return initial_effective_stress(g, soil.gamma_cl, deepest) + load_kpa;
}

inline double total_load(const ActionSchedule& s, const SoilSample& soil, const EmbankmentGeometry& g,
                         double t_week) noexcept {
  double load = soil.gamma_emb * (g.embankment_height_m + s.h0_m);
  if (s.t_add_week && t_week >= *s.t_add_week) load += soil.gamma_emb * s.h_add_m;
  return load;
}

/// Clock shift that keeps settlement continuous when S_inf jumps at t_add:
/// solves U(t_add - t_shift) * s_inf_new = U(t_add) * s_inf_old by bisection.
template <class DegreeFn>
double compute_t_shift(const DegreeFn& degree, double s_inf_old, double s_inf_new, double t_add,
                       double tol_week = 1e-10) {
  if (!(t_add >= 0.0)) throw Error(Errc::invalid_argument, "t_add must be >= 0");
  if (s_inf_new == s_inf_old) return 0.0;
  if (!(s_inf_new > s_inf_old) || s_inf_old < 0.0)
    throw Error(Errc::continuity_unsolvable, "no sign change: S_inf decreased at the increment");
  if (s_inf_old == 0.0) return t_add;
  const double target = degree(t_add) * s_inf_old;
  double lo = 0.0;      // U(lo) * s_new <= target
  double hi = t_add;    // U(hi) * s_new >= target
  if (degree(hi) * s_inf_new < target)
    throw Error(Errc::continuity_unsolvable, "no sign change in [0, t_add]");
  while (hi - lo > tol_week) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    if (degree(mid) * s_inf_new < target)
      lo = mid;
    else
      hi = mid;
  }
  return t_add - 0.5 * (lo + hi);
}

/// Closed-form response of one soil realization to a surcharge schedule.
/// Evaluable at any real time, including past t_max.
class ConsolidationResponse {
 public:
  ConsolidationResponse() = default;

  ConsolidationResponse(const SoilSample& soil, const SiteModel& site, const ActionSchedule& schedule)
      : soil_(soil), schedule_(schedule), degree_(soil, site) {
    const auto& g = site.geometry;
    sigma0_mid_ = initial_effective_stress(g, soil.gamma_cl, clay_mid_depth(g));
    dsig_emb_ = soil.gamma_emb * g.embankment_height_m;
    dsig_sur_ = soil.gamma_emb * schedule.h0_m;
    try {
      s_inf_base_ = pdt::long_term_settlement(soil, g, dsig_emb_ + dsig_sur_);
    } catch (const Error& e) {
      throw Error(e.code(), std::string("week 0: ") + e.what());
    }
    s_inf_after_ = s_inf_base_;
    if (schedule.has_increment()) apply_increment(site, *schedule.t_add_week, schedule.h_add_m);
  }

  /// Copy of this response with one increment placed at t_add.
  ConsolidationResponse with_increment(const SiteModel& site, double t_add, double h_add) const {
    if (schedule_.has_increment())
      throw Error(Errc::unsupported_action, "only one surcharge increment is supported");
    ConsolidationResponse r = *this;
    r.schedule_.t_add_week = t_add;
    r.schedule_.h_add_m = h_add;
    r.apply_increment(site, t_add, h_add);
    return r;
  }

  /// Base-clock degree of consolidation.
  double degree(double t) const noexcept { return degree_(t); }

  /// Degree on the clock that produces the settlement (shifted after t_add).
  double effective_degree(double t) const noexcept {
    return after_increment(t) ? degree_(t - t_shift_) : degree_(t);
  }

  double long_term_settlement(double t) const noexcept {
    return after_increment(t) ? s_inf_after_ : s_inf_base_;
  }

  double settlement(double t) const noexcept {
    if (!(t > 0.0)) return 0.0;
    return effective_degree(t) * long_term_settlement(t);
  }

  double load(double t) const noexcept {
    return dsig_emb_ + dsig_sur_ + (after_increment(t) ? dsig_add_ : 0.0);
  }

  /// Increment consolidation degree: the increment consolidates from its
  /// placement time on the unshifted clock.
  double increment_degree(double t) const noexcept {
    return after_increment(t) ? degree_(t - *schedule_.t_add_week) : 0.0;
  }

  double ocr(double t) const noexcept {
    const double u = degree_(t);
    const double num = sigma0_mid_ + u * (dsig_emb_ + dsig_sur_) + increment_degree(t) * dsig_add_;
    return num / (sigma0_mid_ + u * dsig_emb_);
  }

  double t_shift() const noexcept { return t_shift_; }
  double sigma0_mid() const noexcept { return sigma0_mid_; }
  double s_inf_base() const noexcept { return s_inf_base_; }
  double s_inf_after() const noexcept { return s_inf_after_; }
  const SoilSample& soil() const noexcept { return soil_; }
  const ActionSchedule& schedule() const noexcept { return schedule_; }

 private:
  bool after_increment(double t) const noexcept {
    return schedule_.t_add_week && t >= *schedule_.t_add_week;
  }

  void apply_increment(const SiteModel& site, double t_add, double h_add) {
    dsig_add_ = soil_.gamma_emb * h_add;
    try {
      s_inf_after_ = pdt::long_term_settlement(soil_, site.geometry, dsig_emb_ + dsig_sur_ + dsig_add_);
      t_shift_ = compute_t_shift(degree_, s_inf_base_, s_inf_after_, t_add);
    } catch (const Error& e) {
      throw Error(e.code(), "week " + std::to_string(t_add) + ": " + e.what());
    }
  }

  SoilSample soil_;
  ActionSchedule schedule_;
  DegreeModel degree_;
  double sigma0_mid_ = 0.0;
  double dsig_emb_ = 0.0;
  double dsig_sur_ = 0.0;
  double dsig_add_ = 0.0;
  double s_inf_base_ = 0.0;
  double s_inf_after_ = 0.0;
  double t_shift_ = 0.0;
};

/// Weekly samples of the response on weeks 0..t_max.
struct Trajectory {
  std::vector<double> week;
  std::vector<double> settlement_m;
  std::vector<double> ocr;
  std::vector<double> degree;
  std::vector<double> s_inf_m;
  std::vector<double> load_kpa;
  ConsolidationResponse response;

  int t_max() const noexcept { return static_cast<int>(week.size()) - 1; }
  double settlement_at_end() const { return settlement_m.back(); }
  double ocr_at_end() const { return ocr.back(); }
};

inline Trajectory sample_trajectory(const ConsolidationResponse& r, int t_max) {
  Trajectory tr;
  const auto n = static_cast<std::size_t>(t_max) + 1;
  tr.week.reserve(n);
  tr.settlement_m.reserve(n);
  tr.ocr.reserve(n);
  tr.degree.reserve(n);
  tr.s_inf_m.reserve(n);
  tr.load_kpa.reserve(n);
  for (int w = 0; w <= t_max; ++w) {
    const double t = w;
    tr.week.push_back(t);
    tr.settlement_m.push_back(r.settlement(t));
    tr.ocr.push_back(r.ocr(t));
    tr.degree.push_back(r.effective_degree(t));
    tr.s_inf_m.push_back(r.long_term_settlement(t));
    tr.load_kpa.push_back(r.load(t));
  }
  tr.response = r;
  return tr;
}

inline Trajectory simulate_trajectory(const SoilSample& soil, const SiteModel& site,
                                      const ActionSchedule& schedule, int t_max) {
  if (t_max < 1) throw Error(Errc::invalid_argument, "t_max must be >= 1");
  schedule.validate(t_max);
  return sample_trajectory(ConsolidationResponse(soil, site, schedule), t_max);
}

}  // namespace pdt
