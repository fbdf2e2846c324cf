#pragma once

// Scenario files: strict JSON with units in key names. Loading validates the
// schema, normalizes units (consolidation coefficients to m2/year) and keeps
// the normalized document, whose hash identifies the scenario in every
// output and session log.

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "pdt/consolidation.hpp"
#include "pdt/error.hpp"
#include "pdt/optimizer.hpp"
#include "pdt/policy.hpp"
#include "pdt/random.hpp"
#include "pdt/soil_priors.hpp"

#ifndef PDT_SCENARIO_DIR
#define PDT_SCENARIO_DIR "scenarios"
#endif

namespace pdt {

using json = nlohmann::json;

inline constexpr int kScenarioFormatVersion = 1;

namespace detail {

/// Strict reader over one JSON object: every key must be consumed.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& msg) {
    throw Error(Errc::schema_violation, (path.empty() ? "<root>" : path) + ": " + msg);
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json* find(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    used_.insert(key);
    return &*it;
  }

  const json& require(const std::string& key) {
    const json* v = find(key);
    if (!v) fail(child(key), "missing required field");
    return *v;
  }

  double number(const std::string& key, std::optional<double> def = std::nullopt) {
    const json* v = find(key);
    if (!v) {
      if (def) return *def;
      fail(child(key), "missing required field");
    }
    if (!v->is_number()) fail(child(key), "expected a number");
    return v->get<double>();
  }

  long long integer(const std::string& key, std::optional<long long> def = std::nullopt) {
    const json* v = find(key);
    if (!v) {
      if (def) return *def;
      fail(child(key), "missing required field");
    }
    if (!v->is_number_integer()) fail(child(key), "expected an integer");
    return v->get<long long>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<long long>() < 0))
      fail(child(key), "expected a non-negative integer");
    return v->get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_boolean()) fail(child(key), "expected a boolean");
    return v->get<bool>();
  }

  std::string string(const std::string& key, std::optional<std::string> def = std::nullopt) {
    const json* v = find(key);
    if (!v) {
      if (def) return *def;
      fail(child(key), "missing required field");
    }
    if (!v->is_string()) fail(child(key), "expected a string");
    return v->get<std::string>();
  }

  std::string choice(const std::string& key, std::initializer_list<const char*> allowed, const std::string& def) {
    std::string s = string(key, def);
    for (const char* a : allowed)
      if (s == a) return s;
    std::string msg = "expected one of";
    for (const char* a : allowed) msg += std::string(" '") + a + "'";
    fail(child(key), msg + ", got '" + s + "'");
  }

  std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> def = std::nullopt) {
    const json* v = find(key);
    if (!v) {
      if (def) return *def;
      fail(child(key), "missing required field");
    }
    if (!v->is_array()) fail(child(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number()) fail(child(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back((*v)[i].get<double>());
    }
    return out;
  }

  /// Rejects keys that were never read.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) fail(child(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace detail

/// One prior entry as written in the file: either samples or moments.
struct PriorEntry {
  std::string unit;
  std::vector<double> samples;
  std::optional<double> mean;
  std::optional<double> cov;
  std::string provenance = "user";
};

struct StudySettings {
  std::vector<double> sigma_eps_list = {0.05, 0.10, 0.15};
  CeConfig ce;
};

struct SessionDefaults {
  std::size_t n_particles = 100;
  HeuristicParams heuristic{1.09, 0.05, 0.43};
};

struct IncrementGridSpec {
  double min_m = 0.1;
  double max_m = 3.0;
  double step_m = 0.1;
};

/// Loaded, validated and unit-normalized scenario.
class Scenario {
 public:
  static Scenario from_json(const json& raw);

  const std::string& name() const noexcept { return name_; }
  const DecisionProblem& problem() const noexcept { return *problem_; }
  std::shared_ptr<const DecisionProblem> problem_ptr() const noexcept { return problem_; }
  const SiteModel& site() const noexcept { return *problem_->site; }
  const SoilPriorSet& priors() const noexcept { return problem_->priors; }
  const Requirements& requirements() const noexcept { return problem_->requirements; }
  const CostParams& costs() const noexcept { return problem_->costs; }
  double sigma_eps_m() const noexcept { return sigma_eps_m_; }
  const StudySettings& study() const noexcept { return study_; }
  const SessionDefaults& session() const noexcept { return session_; }
  const std::array<PriorEntry, kSoilParamCount>& prior_entries() const noexcept { return prior_entries_; }
  const std::map<std::string, std::string>& provenance() const noexcept { return provenance_; }

  /// Normalized document; saving and re-loading it reproduces this scenario.
  const json& normalized() const noexcept { return normalized_; }
  const std::string& hash() const noexcept { return hash_; }

 private:
  Scenario() = default;

  std::string name_;
  std::shared_ptr<const DecisionProblem> problem_;
  double sigma_eps_m_ = 0.05;
  StudySettings study_;
  SessionDefaults session_;
  std::array<PriorEntry, kSoilParamCount> prior_entries_;
  std::map<std::string, std::string> provenance_;
  json normalized_;
  std::string hash_;
};

namespace detail {

inline PriorEntry read_prior(ObjectReader& parent, SoilParam p, const std::string& cov_interp) {
  const std::string key(param_name(p));
  ObjectReader r(parent.require(key), parent.child(key));
  PriorEntry e;
  const std::string expected(param_unit(p));
  std::string unit = r.string("unit", expected);
  double scale = 1.0;
  if (unit != expected) {
    if ((p == SoilParam::cv || p == SoilParam::ch) && unit == "m2/week")
      scale = kWeeksPerYear;
    else
      throw Error(Errc::unit_mismatch,
                  r.child("unit") + ": expected '" + expected + "', got '" + unit + "'");
  }
  e.unit = expected;
  const bool has_samples = r.has("samples");
  const bool has_moments = r.has("mean") || r.has("cov");
  if (has_samples == has_moments)
    ObjectReader::fail(parent.child(key), "give either 'samples' or both 'mean' and 'cov'");
  if (has_samples) {
    e.samples = r.numbers("samples");
    for (std::size_t i = 0; i < e.samples.size(); ++i) {
      if (!(e.samples[i] > 0.0))
        throw Error(Errc::non_positive_sample,
                    r.child("samples") + "[" + std::to_string(i) + "]: sample must be > 0");
      e.samples[i] *= scale;
    }
    if (e.samples.size() < 2)
      throw Error(Errc::insufficient_data, r.child("samples") + ": need at least 2 samples");
  } else {
    const double mean = r.number("mean");
    const double c = r.number("cov");
    if (!(mean > 0.0)) ObjectReader::fail(r.child("mean"), "must be > 0");
    if (!(c > 0.0)) ObjectReader::fail(r.child("cov"), "must be > 0");
    // variance_fraction reads the tabulated spread as variance = c * mean.
    const double cov = cov_interp == "cov" ? c : std::sqrt(c * mean) / mean;
    e.mean = mean * scale;
    e.cov = cov;
  }
  e.provenance = r.choice("provenance", {"paper", "non-paper", "mixed", "user"}, "user");
  r.finish();
  return e;
}


}  // namespace detail

inline Scenario Scenario::from_json(const json& raw) {
  using detail::ObjectReader;
  ObjectReader root(raw, "");
  Scenario sc;
  const long long version = root.integer("format_version", kScenarioFormatVersion);
  if (version != kScenarioFormatVersion)
    ObjectReader::fail("format_version", "unsupported version " + std::to_string(version));
  sc.name_ = root.string("name", "unnamed");

  auto block = [&](const std::string& key) -> std::optional<ObjectReader> {
    if (!root.has(key)) return std::nullopt;
    return ObjectReader(root.require(key), key);
  };
  auto note_provenance = [&](const std::string& key, ObjectReader& r) {
    sc.provenance_[key] = r.choice("provenance", {"paper", "non-paper", "mixed", "user"}, "user");
  };

  auto site = std::make_shared<SiteModel>();
  if (auto r = block("geometry")) {
    auto& g = site->geometry;
    g.clay_thickness_m = r->number("clay_thickness_m", g.clay_thickness_m);
    g.crust_thickness_m = r->number("crust_thickness_m", g.crust_thickness_m);
    g.embankment_height_m = r->number("embankment_height_m", g.embankment_height_m);
    g.n_layers = static_cast<int>(r->integer("n_layers", g.n_layers));
    g.groundwater_depth_m = r->number("groundwater_depth_m", g.groundwater_depth_m);
    g.gamma_w = r->number("gamma_w_kN_m3", g.gamma_w);
    g.road_length_m = r->number("road_length_m", g.road_length_m);
    note_provenance("geometry", *r);
    r->finish();
  }
  if (auto r = block("pvd")) {
    auto& v = site->pvd;
    v.spacing_m = r->number("spacing_m", v.spacing_m);
    v.pattern = r->choice("pattern", {"square", "triangular"}, "square") == "square" ? DrainPattern::square
                                                                                      : DrainPattern::triangular;
    v.drain_diameter_m = r->number("drain_diameter_m", v.drain_diameter_m);
    v.drainage = r->choice("drainage", {"single", "double"}, "double") == "double" ? Drainage::double_sided
                                                                                  : Drainage::single;
    note_provenance("pvd", *r);
    r->finish();
  }

  std::string cov_interp = "cov";
  bool inflate = false;
  {
    ObjectReader r(root.require("priors"), "priors");
    cov_interp = r.choice("cov_interpretation", {"cov", "variance_fraction"}, "cov");
    inflate = r.boolean("predictive_inflation", false);
    note_provenance("priors", r);
    ObjectReader params(r.require("parameters"), "priors.parameters");
    for (SoilParam p : kSoilParams)
      sc.prior_entries_[static_cast<std::size_t>(p)] = detail::read_prior(params, p, cov_interp);
    params.finish();
    r.finish();
  }
  auto build = [&](SoilParam p) {
    const auto& e = sc.prior_entries_[static_cast<std::size_t>(p)];
    const std::string path = "priors.parameters." + std::string(param_name(p));
    try {
      if (!e.samples.empty()) return fit_lognormal(e.samples, e.unit, inflate);
      return from_moments(*e.mean, *e.cov, e.unit);
    } catch (const Error& err) {
      throw Error(err.code(), path + ": " + err.what());
    }
  };
  SoilPriorSet priors{build(SoilParam::sigma_L), build(SoilParam::sigma_c), build(SoilParam::gamma_cl),
                      build(SoilParam::gamma_emb), build(SoilParam::M0),    build(SoilParam::ML),
                      build(SoilParam::wN),      build(SoilParam::cv),      build(SoilParam::ch)};

  Requirements req;
  if (auto r = block("requirements")) {
    req.s_target_m = r->number("s_target_m", req.s_target_m);
    req.ocr_target = r->number("ocr_target", req.ocr_target);
    req.t_max_week = static_cast<int>(r->integer("t_max_weeks", req.t_max_week));
    req.comparator = r->choice("settlement_comparator", {"achieved", "residual"}, "achieved") == "achieved"
                         ? SettlementComparator::achieved
                         : SettlementComparator::residual;
    note_provenance("requirements", *r);
    r->finish();
  }
  CostParams costs;
  if (auto r = block("costs")) {
    costs.c_sur_initial = r->number("sur_initial_SEK_per_m_per_m", costs.c_sur_initial);
    costs.c_sur_increase = r->number("sur_increase_SEK_per_m_per_m", costs.c_sur_increase);
    costs.c_remobilization = r->number("remobilization_SEK_per_m", costs.c_remobilization);
    costs.c_delay = r->number("delay_SEK_per_week", costs.c_delay);
    costs.delay_cap_weeks = static_cast<int>(r->integer("delay_cap_weeks", costs.delay_cap_weeks));
    costs.c_ocr_penalty = r->number("ocr_penalty_SEK", costs.c_ocr_penalty);
    note_provenance("costs", *r);
    r->finish();
  }
  if (auto r = block("measurement")) {
    sc.sigma_eps_m_ = r->number("sigma_eps_m", sc.sigma_eps_m_);
    note_provenance("measurement", *r);
    r->finish();
  }
  if (!(sc.sigma_eps_m_ > 0.0)) ObjectReader::fail("measurement.sigma_eps_m", "must be > 0");

  IncrementGridSpec grid;
  FilterOptions filter;
  GateMeasure gate = GateMeasure::cov;
  if (auto r = block("solver")) {
    site->series_tolerance = r->number("series_tolerance", site->series_tolerance);
    if (r->has("increment_grid")) {
      ObjectReader g(r->require("increment_grid"), "solver.increment_grid");
      grid.min_m = g.number("min_m", grid.min_m);
      grid.max_m = g.number("max_m", grid.max_m);
      grid.step_m = g.number("step_m", grid.step_m);
      g.finish();
    }
    filter.resampling = r->choice("resampling", {"multinomial", "systematic"}, "multinomial") == "multinomial"
                            ? Resampling::multinomial
                            : Resampling::systematic;
    filter.jitter_log_std = r->number("jitter_log_std", filter.jitter_log_std);
    filter.min_log_likelihood = r->number("min_log_likelihood", filter.min_log_likelihood);
    gate = r->choice("gate_measure", {"cov", "std"}, "cov") == "cov" ? GateMeasure::cov : GateMeasure::std;
    note_provenance("solver", *r);
    r->finish();
  }
  if (filter.jitter_log_std < 0.0) ObjectReader::fail("solver.jitter_log_std", "must be >= 0");

  if (auto r = block("session")) {
    sc.session_.n_particles = static_cast<std::size_t>(r->unsigned_integer("n_particles", sc.session_.n_particles));
    if (r->has("heuristic")) {
      ObjectReader h(r->require("heuristic"), "session.heuristic");
      auto& w = sc.session_.heuristic;
      w.h0_m = h.number("h0_m", w.h0_m);
      w.cov_th = h.number("cov_th", w.cov_th);
      w.p_th = h.number("p_th", w.p_th);
      h.finish();
    }
    note_provenance("session", *r);
    r->finish();
  }
  if (sc.session_.n_particles < 2) ObjectReader::fail("session.n_particles", "must be >= 2");

  if (auto r = block("study")) {
    sc.study_.sigma_eps_list = r->numbers("sigma_eps_m", sc.study_.sigma_eps_list);
    for (double s : sc.study_.sigma_eps_list)
      if (!(s > 0.0)) ObjectReader::fail("study.sigma_eps_m", "values must be > 0");
    if (r->has("ce")) {
      ObjectReader c(r->require("ce"), "study.ce");
      auto& ce = sc.study_.ce;
      ce.n_ce = static_cast<std::size_t>(c.unsigned_integer("n_ce", ce.n_ce));
      ce.n_iter_max = static_cast<std::size_t>(c.unsigned_integer("n_iter_max", ce.n_iter_max));
      ce.n_mc = static_cast<std::size_t>(c.unsigned_integer("n_mc", ce.n_mc));
      ce.n_bu = static_cast<std::size_t>(c.unsigned_integer("n_bu", ce.n_bu));
      ce.elite_fraction = c.number("elite_fraction", ce.elite_fraction);
      ce.smoothing_alpha = c.number("smoothing_alpha", ce.smoothing_alpha);
      ce.init_mean = c.numbers("init_mean", ce.init_mean);
      ce.init_std = c.numbers("init_std", ce.init_std);
      if (c.has("bounds")) {
        const json& b = c.require("bounds");
        if (!b.is_array()) ObjectReader::fail("study.ce.bounds", "expected an array of [lo, hi] pairs");
        ce.bounds.clear();
        for (std::size_t i = 0; i < b.size(); ++i) {
          if (!b[i].is_array() || b[i].size() != 2 || !b[i][0].is_number() || !b[i][1].is_number())
            ObjectReader::fail("study.ce.bounds[" + std::to_string(i) + "]", "expected [lo, hi]");
          ce.bounds.push_back({b[i][0].get<double>(), b[i][1].get<double>()});
        }
      }
      ce.convergence_std_tol = c.number("convergence_std_tol", ce.convergence_std_tol);
      ce.master_seed = c.unsigned_integer("master_seed", ce.master_seed);
      ce.restarts = static_cast<std::size_t>(c.unsigned_integer("restarts", ce.restarts));
      ce.final_n_mc = static_cast<std::size_t>(c.unsigned_integer("final_n_mc", ce.final_n_mc));
      ce.threads = static_cast<unsigned>(c.unsigned_integer("threads", ce.threads));
      c.finish();
    }
    note_provenance("study", *r);
    r->finish();
  }
  root.finish();

  // Cross-field invariants.
  try {
    site->validate();
    req.validate();
    costs.validate();
    sc.session_.heuristic.validate();
    sc.study_.ce.validate();
  } catch (const Error& e) {
    throw Error(e.code() == Errc::invalid_argument ? Errc::schema_violation : e.code(), e.what());
  }
  if (sc.study_.ce.dimension() != 3)
    ObjectReader::fail("study.ce", "init_mean, init_std and bounds need 3 entries (h0, cov_th, p_th)");
  std::vector<double> inc_grid;
  try {
    inc_grid = make_increment_grid(grid.min_m, grid.max_m, grid.step_m);
  } catch (const Error& e) {
    ObjectReader::fail("solver.increment_grid", e.what());
  }
  const double max_h0 = std::max(sc.study_.ce.bounds[0].hi, sc.session_.heuristic.h0_m);

  sc.problem_ = std::make_shared<const DecisionProblem>(DecisionProblem{
      site, std::move(priors), req, costs, std::move(inc_grid), filter, gate, max_h0});

  // Normalized document.
  json n;
  n["format_version"] = kScenarioFormatVersion;
  n["name"] = sc.name_;
  auto prov = [&](const std::string& key) {
    auto it = sc.provenance_.find(key);
    return it == sc.provenance_.end() ? std::string("user") : it->second;
  };
  const auto& g = site->geometry;
  n["geometry"] = {{"clay_thickness_m", g.clay_thickness_m},
                   {"crust_thickness_m", g.crust_thickness_m},
                   {"embankment_height_m", g.embankment_height_m},
                   {"n_layers", g.n_layers},
                   {"groundwater_depth_m", g.groundwater_depth_m},
                   {"gamma_w_kN_m3", g.gamma_w},
                   {"road_length_m", g.road_length_m},
                   {"provenance", prov("geometry")}};
  const auto& v = site->pvd;
  n["pvd"] = {{"spacing_m", v.spacing_m},
              {"pattern", v.pattern == DrainPattern::square ? "square" : "triangular"},
              {"drain_diameter_m", v.drain_diameter_m},
              {"drainage", v.drainage == Drainage::double_sided ? "double" : "single"},
              {"provenance", prov("pvd")}};
  json params = json::object();
  for (SoilParam p : kSoilParams) {
    const auto& e = sc.prior_entries_[static_cast<std::size_t>(p)];
    json pe = {{"unit", e.unit}, {"provenance", e.provenance}};
    if (!e.samples.empty())
      pe["samples"] = e.samples;
    else {
      pe["mean"] = *e.mean;
      pe["cov"] = *e.cov;
    }
    params[std::string(param_name(p))] = pe;
  }
  n["priors"] = {{"cov_interpretation", "cov"},
                 {"predictive_inflation", inflate},
                 {"parameters", params},
                 {"provenance", prov("priors")}};
  n["requirements"] = {{"s_target_m", req.s_target_m},
                       {"ocr_target", req.ocr_target},
                       {"t_max_weeks", req.t_max_week},
                       {"settlement_comparator",
                        req.comparator == SettlementComparator::achieved ? "achieved" : "residual"},
                       {"provenance", prov("requirements")}};
  n["costs"] = {{"sur_initial_SEK_per_m_per_m", costs.c_sur_initial},
                {"sur_increase_SEK_per_m_per_m", costs.c_sur_increase},
                {"remobilization_SEK_per_m", costs.c_remobilization},
                {"delay_SEK_per_week", costs.c_delay},
                {"delay_cap_weeks", costs.delay_cap_weeks},
                {"ocr_penalty_SEK", costs.c_ocr_penalty},
                {"provenance", prov("costs")}};
  n["measurement"] = {{"sigma_eps_m", sc.sigma_eps_m_}, {"provenance", prov("measurement")}};
  n["solver"] = {{"series_tolerance", site->series_tolerance},
                 {"increment_grid", {{"min_m", grid.min_m}, {"max_m", grid.max_m}, {"step_m", grid.step_m}}},
                 {"resampling", filter.resampling == Resampling::multinomial ? "multinomial" : "systematic"},
                 {"jitter_log_std", filter.jitter_log_std},
                 {"min_log_likelihood", filter.min_log_likelihood},
                 {"gate_measure", gate == GateMeasure::cov ? "cov" : "std"},
                 {"provenance", prov("solver")}};
  const auto& w = sc.session_.heuristic;
  n["session"] = {{"n_particles", sc.session_.n_particles},
                  {"heuristic", {{"h0_m", w.h0_m}, {"cov_th", w.cov_th}, {"p_th", w.p_th}}},
                  {"provenance", prov("session")}};
  const auto& ce = sc.study_.ce;
  json bounds = json::array();
  for (const auto& b : ce.bounds) bounds.push_back({b.lo, b.hi});
  n["study"] = {{"sigma_eps_m", sc.study_.sigma_eps_list},
                {"ce",
                 {{"n_ce", ce.n_ce},
                  {"n_iter_max", ce.n_iter_max},
                  {"n_mc", ce.n_mc},
                  {"n_bu", ce.n_bu},
                  {"elite_fraction", ce.elite_fraction},
                  {"smoothing_alpha", ce.smoothing_alpha},
                  {"init_mean", ce.init_mean},
                  {"init_std", ce.init_std},
                  {"bounds", bounds},
                  {"convergence_std_tol", ce.convergence_std_tol},
                  {"master_seed", ce.master_seed},
                  {"restarts", ce.restarts},
                  {"final_n_mc", ce.final_n_mc},
                  {"threads", ce.threads}}},
                {"provenance", prov("study")}};
  sc.normalized_ = std::move(n);
  // Thread count changes wall time only, so it stays out of the hash.
  json hashed = sc.normalized_;
  hashed["study"]["ce"].erase("threads");
  sc.hash_ = to_hex(fnv1a64(hashed.dump()));
  return sc;
}

/// Applies a dotted-path override (`study.ce.n_mc=50`) to a raw scenario
/// document. Hyphens in path segments are read as underscores. The value is
/// parsed as JSON (falling back to a bare string) and must match the type of
/// an existing value when one is present. A segment may omit the unit
/// suffix of its key (`study.sigma-eps` names `study.sigma_eps_m`).
inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw Error(Errc::schema_violation, "override '" + assignment + "' must have the form path=value");
  std::string path = assignment.substr(0, eq);
  for (char& c : path)
    if (c == '-') c = '_';
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::string seen;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (node->is_object() && !node->contains(key)) {
      // Accept a key without its unit suffix when exactly one keyed field matches.
      std::string match;
      int hits = 0;
      for (auto it = node->begin(); it != node->end(); ++it)
        if (it.key().rfind(key + "_", 0) == 0) {
          match = it.key();
          ++hits;
        }
      if (hits == 1) key = match;
    }
    seen += (seen.empty() ? "" : ".") + key;
    if (key.empty()) throw Error(Errc::schema_violation, "override path '" + path + "' has an empty segment");
    if (!node->is_object()) throw Error(Errc::schema_violation, seen + ": not an object");
    if (dot == std::string::npos) {
      auto it = node->find(key);
      if (it != node->end()) {
        const bool same = (it->is_number() && value.is_number()) || it->type() == value.type() ||
                          (it->is_array() && value.is_array());
        if (!same) throw Error(Errc::schema_violation, seen + ": override value has the wrong type");
      }
      (*node)[key] = value;
      break;
    }
    if (!node->contains(key)) (*node)[key] = json::object();
    node = &(*node)[key];
    start = dot + 1;
  }
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::schema_violation, path.string() + ": " + e.what());
  }
}

/// Resolves a path or the name of a bundled scenario.
inline std::filesystem::path resolve_scenario_path(const std::string& name_or_path) {
  namespace fs = std::filesystem;
  fs::path p(name_or_path);
  if (fs::exists(p)) return p;
  for (const fs::path& dir : {fs::path(PDT_SCENARIO_DIR), fs::path("scenarios")}) {
    const fs::path cand = dir / (name_or_path + ".json");
    if (fs::exists(cand)) return cand;
  }
  throw Error(Errc::io, "scenario '" + name_or_path + "' not found");
}

inline json load_scenario_document(const std::string& name_or_path, const std::vector<std::string>& overrides = {}) {
  json doc = read_json_file(resolve_scenario_path(name_or_path));
  for (const auto& o : overrides) apply_override(doc, o);
  return doc;
}

inline Scenario load_scenario(const std::string& name_or_path, const std::vector<std::string>& overrides = {}) {
  return Scenario::from_json(load_scenario_document(name_or_path, overrides));
}

inline void save_scenario(const std::filesystem::path& path, const Scenario& sc) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << sc.normalized().dump(2) << '\n';
}

}  // namespace pdt
