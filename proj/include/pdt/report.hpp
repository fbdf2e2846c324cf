#pragma once

// Output formats: trajectory CSV, rollout CSV, study tables (TSV), study
// JSON and the CE trace (JSONL). Every delimited file starts with a comment
// line carrying the scenario hash and master seed.

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "pdt/consolidation.hpp"
#include "pdt/optimizer.hpp"
#include "pdt/soil_priors.hpp"

namespace pdt {

using json = nlohmann::json;

struct OutputProvenance {
  std::string scenario_hash;
  std::uint64_t seed = 0;
  std::string command;

  std::string comment_line() const {
    return "# scenario_hash=" + scenario_hash + " seed=" + std::to_string(seed) + " command=" + command + "\n";
  }

  json to_json() const { return {{"scenario_hash", scenario_hash}, {"seed", seed}, {"command", command}}; }
};

/// Shortest decimal text that reads back to the same double.
inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return json(x).dump();
}

inline json soil_json(const SoilSample& s) {
  json j;
  for (SoilParam p : kSoilParams) j[std::string(param_name(p))] = s[p];
  return j;
}

inline json schedule_json(const ActionSchedule& s) {
  return {{"h0_m", s.h0_m},
          {"t_add_week", s.t_add_week ? json(*s.t_add_week) : json(nullptr)},
          {"h_add_m", s.h_add_m}};
}

inline json cost_json(const CostBreakdown& c) {
  return {{"total_SEK", c.total()},
          {"surcharge_initial_SEK", c.sur_initial},
          {"surcharge_increase_SEK", c.sur_increase},
          {"delay_SEK", c.delay},
          {"ocr_penalty_SEK", c.ocr},
          {"delay_weeks", c.delay_weeks},
          {"target_unreached", c.target_unreached}};
}

inline void write_trajectory_csv(std::ostream& out, const Trajectory& tr, const OutputProvenance& prov) {
  out << prov.comment_line();
  out << "week,settlement_m,ocr,degree,s_inf_m,load_kPa\n";
  for (std::size_t i = 0; i < tr.week.size(); ++i)
    out << num(tr.week[i]) << ',' << num(tr.settlement_m[i]) << ',' << num(tr.ocr[i]) << ',' << num(tr.degree[i])
        << ',' << num(tr.s_inf_m[i]) << ',' << num(tr.load_kpa[i]) << '\n';
}

inline void write_rollouts_csv(std::ostream& out, const EvaluationResult& r, const OutputProvenance& prov) {
  out << prov.comment_line();
  out << "rollout,truth_hash,decision_week,decision,h_add_m,grid_exhausted,settlement_tmax_m,ocr_tmax,"
         "cost_total_SEK,surcharge_initial_SEK,surcharge_increase_SEK,delay_SEK,ocr_penalty_SEK,delay_weeks\n";
  for (const auto& rec : r.records)
    out << rec.index << ',' << to_hex(rec.truth_hash) << ',' << rec.decision_week << ','
        << decision_name(rec.decision) << ',' << num(rec.h_add_m) << ',' << (rec.grid_exhausted ? 1 : 0) << ','
        << num(rec.settlement_tmax_m) << ',' << num(rec.ocr_tmax) << ',' << num(rec.cost.total()) << ','
        << num(rec.cost.sur_initial) << ',' << num(rec.cost.sur_increase) << ',' << num(rec.cost.delay) << ','
        << num(rec.cost.ocr) << ',' << rec.cost.delay_weeks << '\n';
}

inline json heuristic_json(const HeuristicParams& w, PolicyKind kind) {
  json j = {{"h0_m", w.h0_m}};
  if (kind == PolicyKind::bu) {
    j["cov_th"] = w.cov_th;
    j["p_th"] = w.p_th;
  }
  return j;
}

inline json evaluation_json(const EvaluationResult& r) {
  return {{"n_mc", r.records.size()},
          {"expected_cost_SEK", r.mean_cost},
          {"std_cost_SEK", r.std_cost},
          {"standard_error_SEK", r.standard_error()},
          {"component_means_SEK",
           {{"surcharge_initial", r.component_means.sur_initial},
            {"surcharge_increase", r.component_means.sur_increase},
            {"delay", r.component_means.delay},
            {"ocr_penalty", r.component_means.ocr}}}};
}

inline json ce_result_json(const CeResult& r) {
  return {{"w_opt", r.w_opt}, {"iterations", r.trace.size()}, {"converged", r.converged}};
}

inline json study_row_json(const StudyRow& row) {
  json restarts = json::array();
  for (std::size_t i = 0; i < row.restarts.size(); ++i) {
    json e = ce_result_json(row.restarts[i]);
    e["final_evaluation"] = evaluation_json(row.restart_evaluations[i]);
    restarts.push_back(e);
  }
  return {{"policy", policy_name(row.policy)},
          {"sigma_eps_m", row.sigma_eps_m ? json(*row.sigma_eps_m) : json(nullptr)},
          {"w_opt", heuristic_json(row.w_opt, row.policy)},
          {"best_restart", row.best_restart},
          {"restarts", restarts},
          {"final_evaluation", evaluation_json(row.final_eval)}};
}

inline json study_json(const StudyResult& s, const OutputProvenance& prov) {
  json rows = json::array();
  for (const auto& r : s.rows) rows.push_back(study_row_json(r));
  return {{"provenance", prov.to_json()}, {"rows", rows}};
}

/// One CE iteration per line, tagged with the row and restart it belongs to.
inline void write_ce_trace(std::ostream& out, const CeResult& r, const json& tags) {
  for (const auto& it : r.trace) {
    json j = tags;
    j["iteration"] = it.iteration;
    j["crn_seed"] = it.crn_seed;
    j["mean"] = it.mean;
    j["std"] = it.std;
    json costs = json::array();
    for (double c : it.costs) costs.push_back(std::isfinite(c) ? json(c) : json(nullptr));
    j["candidates"] = it.candidates;
    j["costs_SEK"] = costs;
    j["elite"] = it.elite;
    j["elite_mean_cost_SEK"] = std::isfinite(it.elite_mean_cost) ? json(it.elite_mean_cost) : json(nullptr);
    j["best_cost_SEK"] = std::isfinite(it.best_cost) ? json(it.best_cost) : json(nullptr);
    out << j.dump() << '\n';
  }
}

inline void write_study_trace(std::ostream& out, const StudyResult& s) {
  for (const auto& row : s.rows)
    for (std::size_t r = 0; r < row.restarts.size(); ++r)
      write_ce_trace(out, row.restarts[r],
                     {{"policy", policy_name(row.policy)},
                      {"sigma_eps_m", row.sigma_eps_m ? json(*row.sigma_eps_m) : json(nullptr)},
                      {"restart", r}});
}

namespace detail {

inline std::string opt_num(const json& j) { return j.is_null() ? std::string("-") : num(j.get<double>()); }

inline std::string header_line(const json& study) {
  const auto& p = study.at("provenance");
  return "# scenario_hash=" + p.at("scenario_hash").get<std::string>() +
         " seed=" + std::to_string(p.at("seed").get<std::uint64_t>()) +
         " command=" + p.at("command").get<std::string>() + "\n";
}

}  // namespace detail

/// Optimal heuristic parameters and expected costs, one row per policy and
/// measurement error.
inline std::string table2_tsv(const json& study) {
  std::ostringstream o;
  o << detail::header_line(study);
  o << "policy\tsigma_eps_m\th0_m\tcov_th\tp_th\texpected_cost_SEK\tstd_cost_SEK\tstandard_error_SEK\tn_mc\n";
  for (const auto& r : study.at("rows")) {
    const auto& w = r.at("w_opt");
    const auto& e = r.at("final_evaluation");
    o << r.at("policy").get<std::string>() << '\t' << detail::opt_num(r.at("sigma_eps_m")) << '\t'
      << num(w.at("h0_m").get<double>()) << '\t' << (w.contains("cov_th") ? num(w["cov_th"].get<double>()) : "-")
      << '\t' << (w.contains("p_th") ? num(w["p_th"].get<double>()) : "-") << '\t'
      << num(e.at("expected_cost_SEK").get<double>()) << '\t' << num(e.at("std_cost_SEK").get<double>()) << '\t'
      << num(e.at("standard_error_SEK").get<double>()) << '\t' << e.at("n_mc").get<std::size_t>() << '\n';
  }
  return o.str();
}

/// Each BU row against the static baseline: cost difference and the
/// combined standard error sqrt(se_bu^2 + se_static^2).
inline std::string table3_tsv(const json& study) {
  std::ostringstream o;
  o << detail::header_line(study);
  o << "policy\tsigma_eps_m\texpected_cost_SEK\tstatic_expected_cost_SEK\tdifference_SEK\tcombined_se_SEK\t"
       "margin_in_se\n";
  const json* stat = nullptr;
  for (const auto& r : study.at("rows"))
    if (r.at("policy") == "static") stat = &r;
  if (!stat) return o.str();
  const auto& se = stat->at("final_evaluation");
  const double cs = se.at("expected_cost_SEK").get<double>();
  const double ss = se.at("standard_error_SEK").get<double>();
  for (const auto& r : study.at("rows")) {
    const auto& e = r.at("final_evaluation");
    const double c = e.at("expected_cost_SEK").get<double>();
    const double s = e.at("standard_error_SEK").get<double>();
    const double comb = std::sqrt(s * s + ss * ss);
    o << r.at("policy").get<std::string>() << '\t' << detail::opt_num(r.at("sigma_eps_m")) << '\t' << num(c) << '\t'
      << num(cs) << '\t' << num(cs - c) << '\t' << num(comb) << '\t' << num(comb > 0 ? (cs - c) / comb : 0.0)
      << '\n';
  }
  return o.str();
}

/// Expected cost split into its components for every row.
inline std::string cost_breakdown_tsv(const json& study) {
  std::ostringstream o;
  o << detail::header_line(study);
  o << "policy\tsigma_eps_m\tsurcharge_initial_SEK\tsurcharge_increase_SEK\tdelay_SEK\tocr_penalty_SEK\t"
       "expected_cost_SEK\n";
  for (const auto& r : study.at("rows")) {
    const auto& e = r.at("final_evaluation");
    const auto& c = e.at("component_means_SEK");
    o << r.at("policy").get<std::string>() << '\t' << detail::opt_num(r.at("sigma_eps_m")) << '\t'
      << num(c.at("surcharge_initial").get<double>()) << '\t' << num(c.at("surcharge_increase").get<double>())
      << '\t' << num(c.at("delay").get<double>()) << '\t' << num(c.at("ocr_penalty").get<double>()) << '\t'
      << num(e.at("expected_cost_SEK").get<double>()) << '\n';
  }
  return o.str();
}

}  // namespace pdt
