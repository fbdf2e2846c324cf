#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pdt/belief.hpp"
#include "pdt/consolidation.hpp"
#include "pdt/error.hpp"

namespace pdt {

/// How S(t_max) is compared with s_target. `achieved` treats reaching the
/// target settlement as compliance; `residual` inverts the comparison.
enum class SettlementComparator { achieved, residual };

struct Requirements {
  double s_target_m = 1.27;
  double ocr_target = 1.10;
  int t_max_week = 72;
  SettlementComparator comparator = SettlementComparator::achieved;

  bool settlement_ok(double s) const noexcept {
    return comparator == SettlementComparator::achieved ? s >= s_target_m : s <= s_target_m;
  }

  void validate() const {
    if (!(s_target_m > 0.0)) throw Error(Errc::invalid_argument, "s_target must be > 0");
    if (!(ocr_target >= 1.0)) throw Error(Errc::invalid_argument, "ocr_target must be >= 1");
    if (t_max_week < 1) throw Error(Errc::invalid_argument, "t_max must be >= 1");
  }
};

/// Cost coefficients. Per-metre rates are multiplied by the road length.
struct CostParams {
  double c_sur_initial = 2000.0;      // SEK per m of surcharge height per m of road
  double c_sur_increase = 2500.0;     // SEK per m of added height per m of road
  double c_remobilization = 1000.0;   // SEK per m of road, charged once per increment
  double c_delay = 150000.0;          // SEK per week of delay
  int delay_cap_weeks = 52;
  double c_ocr_penalty = 3.0e6;       // SEK

  void validate() const {
    if (c_sur_initial < 0 || c_sur_increase < 0 || c_remobilization < 0 || c_delay < 0 ||
        delay_cap_weeks < 0 || c_ocr_penalty < 0)
      throw Error(Errc::invalid_argument, "cost parameters must be >= 0");
  }
};

struct HeuristicParams {
  double h0_m = 1.0;
  double cov_th = 0.5;
  double p_th = 0.5;

  void validate() const {
    if (!(h0_m >= 0.0)) throw Error(Errc::invalid_argument, "h0 must be >= 0");
    if (!(cov_th > 0.0)) throw Error(Errc::invalid_argument, "cov_th must be > 0");
    if (!(p_th > 0.0 && p_th < 1.0)) throw Error(Errc::invalid_argument, "p_th must lie in (0, 1)");
  }
};

/// Which spread statistic of S(t_max) the data-collection gate compares with
/// cov_th: the coefficient of variation, or the absolute std in metres.
enum class GateMeasure { cov, std };

struct ComplianceFlags {
  bool settlement_ok = false;
  bool ocr_ok = false;
};

inline ComplianceFlags check_requirements(const ConsolidationResponse& r, const Requirements& req) {
  const double t = req.t_max_week;
  return {req.settlement_ok(r.settlement(t)), r.ocr(t) >= req.ocr_target};
}

inline ComplianceFlags check_requirements(const Trajectory& tr, const Requirements& req) {
  if (tr.t_max() < req.t_max_week) throw Error(Errc::invalid_argument, "trajectory does not cover t_max");
  const auto i = static_cast<std::size_t>(req.t_max_week);
  return {req.settlement_ok(tr.settlement_m[i]), tr.ocr[i] >= req.ocr_target};
}

struct CostBreakdown {
  double sur_initial = 0.0;
  double sur_increase = 0.0;
  double delay = 0.0;
  double ocr = 0.0;
  int delay_weeks = 0;
  bool target_unreached = false;  // delay charged at the cap

  double total() const noexcept { return sur_initial + sur_increase + delay + ocr; }
};

/// Total cost of one realized trajectory. Delay is the number of whole weeks
/// past t_max until the settlement requirement holds, capped.
inline CostBreakdown total_cost(const ConsolidationResponse& r, const Requirements& req, const CostParams& c,
                                double road_length_m) {
  const auto& s = r.schedule();
  CostBreakdown out;
  out.sur_initial = c.c_sur_initial * s.h0_m * road_length_m;
  if (s.has_increment() && s.h_add_m > 0.0)
    out.sur_increase = (c.c_remobilization + c.c_sur_increase * s.h_add_m) * road_length_m;
  const int t_max = req.t_max_week;
  out.delay_weeks = c.delay_cap_weeks;
  out.target_unreached = true;
  for (int w = t_max; w <= t_max + c.delay_cap_weeks; ++w) {
    if (req.settlement_ok(r.settlement(w))) {
      out.delay_weeks = w - t_max;
      out.target_unreached = false;
      break;
    }
  }
  out.delay = c.c_delay * out.delay_weeks;
  if (!(r.ocr(t_max) >= req.ocr_target)) out.ocr = c.c_ocr_penalty;
  return out;
}

inline CostBreakdown total_cost(const Trajectory& tr, const Requirements& req, const CostParams& c,
                                double road_length_m) {
  return total_cost(tr.response, req, c, road_length_m);
}

inline std::vector<double> make_increment_grid(double min_m = 0.1, double max_m = 3.0, double step_m = 0.1) {
  if (!(min_m > 0.0) || !(step_m > 0.0) || !(max_m >= min_m))
    throw Error(Errc::invalid_argument, "increment grid needs 0 < min <= max and step > 0");
  std::vector<double> g;
  const auto n = static_cast<long>(std::floor((max_m - min_m) / step_m + 1e-9));
  for (long i = 0; i <= n; ++i) g.push_back(std::round((min_m + i * step_m) * 1e9) / 1e9);
  return g;
}

/// Probability that S(t_max) violates the settlement requirement.
inline double prob_noncompliant(const Belief& b, const Requirements& req) {
  if (req.comparator == SettlementComparator::achieved)
    return prob_below_target(b, req.s_target_m, req.t_max_week);
  std::vector<double> hits(b.size());
  for (std::size_t k = 0; k < b.size(); ++k) {
    const auto& p = b.particles()[k];
    hits[k] = req.settlement_ok(p.response.settlement(req.t_max_week)) ? 0.0 : p.weight;
  }
  return pairwise_sum(hits);
}

/// Same probability with every particle re-simulated under an increment
/// h_add placed at t_add. The belief itself is not modified.
inline double prob_noncompliant_after(const Belief& b, const Requirements& req, double t_add, double h_add) {
  if (h_add == 0.0) return prob_noncompliant(b, req);
  std::vector<double> hits(b.size());
  const double t_max = req.t_max_week;
  for (std::size_t k = 0; k < b.size(); ++k) {
    const auto& p = b.particles()[k];
    const auto r = p.response.with_increment(b.site(), t_add, h_add);
    hits[k] = req.settlement_ok(r.settlement(t_max)) ? 0.0 : p.weight;
  }
  return pairwise_sum(hits);
}

enum class DecisionKind { keep_measuring, on_track, adjust };

constexpr std::string_view decision_name(DecisionKind k) noexcept {
  switch (k) {
    case DecisionKind::keep_measuring: return "keep-measuring";
    case DecisionKind::on_track: return "on-track";
    case DecisionKind::adjust: return "adjust";
  }
  return "unknown";
}

struct Decision {
  DecisionKind kind = DecisionKind::keep_measuring;
  double h_add_m = 0.0;
  bool grid_exhausted = false;  // no grid value met p_th; largest chosen
  double gate_value = 0.0;      // COV (or std) of S(t_max)
  double prob_noncompliant = 0.0;
  std::optional<double> prob_after;

  bool is_action() const noexcept { return kind == DecisionKind::adjust; }
};

inline double gate_statistic(const Belief& b, const Requirements& req, GateMeasure m) {
  const auto st = posterior_stats(b, SettlementAt{static_cast<double>(req.t_max_week)});
  return m == GateMeasure::cov ? coefficient_of_variation(st) : st.std;
}

/// Bayesian-updating heuristic: wait until the spread of S(t_max) drops below
/// cov_th, then act only if the non-compliance probability exceeds p_th, with
/// the smallest grid increment that brings it to p_th or below.
inline Decision heuristic_bu_decide(const Belief& b, double t_week, const HeuristicParams& w,
                                    const Requirements& req, std::span<const double> grid,
                                    GateMeasure measure = GateMeasure::cov) {
  if (b.schedule().has_increment())
    throw Error(Errc::unsupported_action, "decision requested after the single increment");
  Decision d;
  d.gate_value = gate_statistic(b, req, measure);
  d.prob_noncompliant = prob_noncompliant(b, req);
  if (d.gate_value >= w.cov_th) return d;
  if (d.prob_noncompliant <= w.p_th) {
    d.kind = DecisionKind::on_track;
    return d;
  }
  if (grid.empty()) throw Error(Errc::invalid_argument, "empty increment grid");
  d.kind = DecisionKind::adjust;
  for (double h : grid) {
    const double p = prob_noncompliant_after(b, req, t_week, h);
    if (p <= w.p_th) {
      d.h_add_m = h;
      d.prob_after = p;
      return d;
    }
  }
  d.h_add_m = grid.back();
  d.prob_after = prob_noncompliant_after(b, req, t_week, grid.back());
  d.grid_exhausted = true;
  return d;
}

/// Baseline that only fixes the initial surcharge: never acts after t = 0.
constexpr Decision heuristic_static_decide(double /*t_week*/) noexcept {
  return Decision{DecisionKind::on_track, 0.0, false, 0.0, 0.0, std::nullopt};
}

}  // namespace pdt
