#pragma once

// Human-in-the-loop twin sessions and their append-only JSONL logs.
//
// A Session owns one live belief. Every state change is written to its log
// as it happens, and replay() rebuilds the session from the log, checking
// each recorded belief hash on the way.

#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "pdt/belief.hpp"
#include "pdt/error.hpp"
#include "pdt/optimizer.hpp"
#include "pdt/policy.hpp"
#include "pdt/random.hpp"
#include "pdt/scenario.hpp"

namespace pdt {

inline constexpr const char* kSessionLogFormat = "pdt-session-log";
inline constexpr int kSessionLogVersion = 1;

/// Residual (in sigma) beyond which a measurement is flagged as a tail event.
inline constexpr double kTailWarningSigma = 8.0;

enum class SessionStatus { measuring, decision_pending, adjusted, closed };

constexpr std::string_view status_name(SessionStatus s) noexcept {
  switch (s) {
    case SessionStatus::measuring: return "measuring";
    case SessionStatus::decision_pending: return "decision-pending";
    case SessionStatus::adjusted: return "adjusted";
    case SessionStatus::closed: return "closed";
  }
  return "unknown";
}

struct SessionConfig {
  std::uint64_t seed = 0;
  HeuristicParams heuristic;
  std::size_t n_particles = 100;
};

/// Ordered event records, one JSON object per line, after a header record.
class SessionLog {
 public:
  SessionLog() = default;

  static json header() { return {{"format", kSessionLogFormat}, {"version", kSessionLogVersion}}; }

  /// Appends an event; `t_week` must not decrease.
  void append(json event) {
    if (!event.contains("event") || !event.contains("t_week"))
      throw Error(Errc::invalid_argument, "log events need 'event' and 't_week'");
    const double t = event["t_week"].get<double>();
    if (!events_.empty() && t < events_.back()["t_week"].get<double>())
      throw Error(Errc::out_of_order, "log event at week " + std::to_string(t) + " precedes the previous event");
    event["index"] = events_.size();
    events_.push_back(std::move(event));
  }

  const std::vector<json>& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }

  void write(std::ostream& out) const {
    out << header().dump() << '\n';
    for (const auto& e : events_) out << e.dump() << '\n';
  }

  std::string to_string() const {
    std::ostringstream o;
    write(o);
    return o.str();
  }

  static SessionLog read(std::istream& in) {
    SessionLog log;
    std::string line;
    bool have_header = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw Error(Errc::schema_violation, "session log line " + std::to_string(lineno) + ": " + e.what());
      }
      if (!have_header) {
        if (j.value("format", "") != kSessionLogFormat)
          throw Error(Errc::schema_violation, "session log: missing header record");
        if (j.value("version", -1) != kSessionLogVersion)
          throw Error(Errc::schema_violation, "session log: unsupported version");
        have_header = true;
        continue;
      }
      const auto idx = j.value("index", static_cast<std::size_t>(-1));
      if (idx != log.events_.size())
        throw Error(Errc::tamper, "session log line " + std::to_string(lineno) + ": event index out of sequence");
      log.append(std::move(j));
    }
    if (!have_header) throw Error(Errc::schema_violation, "session log: missing header record");
    return log;
  }

  static SessionLog read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open " + path);
    return read(in);
  }

 private:
  std::vector<json> events_;
};

namespace detail {

inline json stats_json(const PosteriorStats& st, const char* suffix) {
  const std::string s(suffix);
  json j;
  j["mean" + s] = st.mean;
  j["std" + s] = st.std;
  j["cov"] = st.cov ? json(*st.cov) : json(nullptr);
  static const char* names[] = {"q025", "q50", "q975"};
  for (std::size_t i = 0; i < st.quantiles.size() && i < 3; ++i) j[names[i] + s] = st.quantiles[i];
  return j;
}

inline constexpr std::array<double, 3> kBand = {0.025, 0.5, 0.975};

}  // namespace detail

class Session {
 public:
  /// Starts a session from the prior at week 0 and logs the init event.
  Session(Scenario scenario, SessionConfig cfg) : scenario_(std::move(scenario)), cfg_(cfg) {
    cfg_.heuristic.validate();
    if (cfg_.n_particles < 2) throw Error(Errc::invalid_argument, "n_particles must be >= 2");
    problem_ = scenario_.problem_ptr();
    if (cfg_.heuristic.h0_m > problem_->max_h0_m) {
      auto p = std::make_shared<DecisionProblem>(*problem_);
      p->max_h0_m = cfg_.heuristic.h0_m;
      problem_ = p;
    }
    const ActionSchedule initial{cfg_.heuristic.h0_m, std::nullopt, 0.0};
    belief_.emplace(init_belief(problem_->priors, problem_->site, initial, cfg_.n_particles, cfg_.seed,
                                problem_->admissibility(), problem_->filter));
    log_.append({{"event", "init"},
                 {"t_week", 0.0},
                 {"seed", cfg_.seed},
                 {"scenario_hash", scenario_.hash()},
                 {"n_particles", cfg_.n_particles},
                 {"heuristic", {{"h0_m", cfg_.heuristic.h0_m}, {"cov_th", cfg_.heuristic.cov_th}, {"p_th", cfg_.heuristic.p_th}}},
                 {"belief_hash", to_hex(belief_->hash())}});
  }

  const Scenario& scenario() const noexcept { return scenario_; }
  const DecisionProblem& problem() const noexcept { return *problem_; }
  const SessionConfig& config() const noexcept { return cfg_; }
  const Belief& belief() const noexcept { return *belief_; }
  const SessionLog& log() const noexcept { return log_; }
  SessionStatus status() const noexcept { return status_; }
  const std::optional<Decision>& pending_decision() const noexcept { return decision_; }
  /// Index of the last logged event; clients use it to validate caches.
  std::size_t event_index() const noexcept { return log_.size() - 1; }
  double last_event_week() const { return log_.events().back()["t_week"].get<double>(); }

  /// Assimilates one settlement reading and re-evaluates the decision gate.
  /// A reading the filter cannot absorb (every likelihood underflows) leaves
  /// the belief unchanged and is reported in `warnings`.
  json add_measurement(double t_week, double z_s_m, std::optional<double> sigma_eps_m = std::nullopt) {
    require_open();
    if (!(t_week > last_event_week()))
      throw Error(Errc::out_of_order, "measurement week " + fmt(t_week) + " must be after the last event (week " +
                                          fmt(last_event_week()) + ")");
    if (!std::isfinite(z_s_m)) throw Error(Errc::invalid_argument, "z_s_m must be finite");
    const double sigma = sigma_eps_m.value_or(scenario_.sigma_eps_m());
    if (!(sigma > 0.0)) throw Error(Errc::invalid_argument, "sigma_eps_m must be > 0");

    const Measurement z{t_week, z_s_m, sigma};
    json warnings = json::array();
    UpdateDiagnostics diag;
    bool accepted = true;
    try {
      belief_.emplace(update(*belief_, z, {}, &diag));
      if (diag.min_abs_residual_sigma > kTailWarningSigma)
        warnings.push_back({{"code", "degenerate-update"},
                            {"message", "measurement lies more than 8 sigma from every particle; posterior collapsed"},
                            {"min_residual_sigma", diag.min_abs_residual_sigma},
                            {"effective_sample_size", diag.effective_sample_size}});
    } catch (const DegenerateUpdateError& e) {
      accepted = false;
      warnings.push_back({{"code", "degenerate-update"},
                          {"message", "every particle likelihood underflowed; belief left unchanged"},
                          {"max_log_likelihood", e.max_log_likelihood()}});
    }
    log_.append({{"event", "measurement"},
                 {"t_week", t_week},
                 {"z_s_m", z_s_m},
                 {"sigma_eps_m", sigma},
                 {"accepted", accepted}});
    if (accepted && status_ != SessionStatus::adjusted) {
      decision_ = decide();
      status_ = decision_->kind == DecisionKind::keep_measuring ? SessionStatus::measuring
                                                                 : SessionStatus::decision_pending;
    }
    log_belief_summary(warnings);
    json out = summary();
    out["warnings"] = warnings;
    if (accepted) {
      out["diagnostics"] = {{"effective_sample_size", diag.effective_sample_size},
                            {"max_log_likelihood", diag.max_log_likelihood},
                            {"unique_after_resampling", diag.unique_after_resampling}};
    }
    return out;
  }

  /// The heuristic's suggestion for the current belief, with the numbers
  /// behind it. Read-only.
  json recommendation() const {
    json r = provenance();
    r["status"] = status_name(status_);
    r["t_week"] = belief_->t_current();
    if (status_ == SessionStatus::adjusted || status_ == SessionStatus::closed) {
      r["action"] = "none";
      r["reason"] = status_ == SessionStatus::adjusted ? "increment already placed" : "session closed";
      return r;
    }
    const Decision d = decision_ ? *decision_ : decide();
    return decision_json(d, r);
  }

  /// Effect of placing h_add now, evaluated on a copy of the belief.
  json whatif(double h_add_m, bool fast = false) const {
    require_open();
    if (status_ != SessionStatus::decision_pending)
      throw Error(Errc::invalid_state, "what-if needs status decision-pending, session is " +
                                           std::string(status_name(status_)));
    if (!(h_add_m >= 0.0)) throw Error(Errc::invalid_argument, "h_add_m must be >= 0");
    const auto& req = problem_->requirements;
    const double t = belief_->t_current();
    Belief b = fast ? thin(*belief_) : *belief_;
    if (h_add_m > 0.0) b = apply_action(b, t, h_add_m);
    const double tm = req.t_max_week;
    json r = provenance();
    r["h_add_m"] = h_add_m;
    r["t_add_week"] = t;
    r["fast"] = fast;
    r["n_particles"] = b.size();
    r["prob_below_target"] = prob_below_target(b, req.s_target_m, tm);
    r["prob_noncompliant"] = prob_noncompliant(b, req);
    r["settlement_tmax"] = detail::stats_json(posterior_stats(b, SettlementAt{tm}, detail::kBand), "_m");
    r["ocr_tmax"] = detail::stats_json(posterior_stats(b, OcrAt{tm}, detail::kBand), "");
    r["prob_ocr_ok"] = prob_ocr_ok(b);
    const auto& c = problem_->costs;
    const double L = problem_->site->geometry.road_length_m;
    r["increment_cost_SEK"] = h_add_m > 0.0 ? (c.c_remobilization + c.c_sur_increase * h_add_m) * L : 0.0;
    const double base = expected_cost(fast ? thin(*belief_) : *belief_).total();
    const double with = expected_cost(b).total();
    r["expected_cost_SEK"] = with;
    r["marginal_cost_SEK"] = with - base;
    return r;
  }

  /// Applies the engineer's choice. h_add = 0 declines the recommendation
  /// and returns the session to measuring.
  json commit_action(double h_add_m) {
    require_open();
    if (status_ == SessionStatus::adjusted)
      throw Error(Errc::unsupported_action, "a surcharge increment was already placed");
    if (!(h_add_m >= 0.0)) throw Error(Errc::invalid_argument, "h_add_m must be >= 0");
    const double t = belief_->t_current();
    const Decision rec = decision_ ? *decision_ : decide();
    if (h_add_m > 0.0) {
      if (t < 1.0) throw Error(Errc::invalid_argument, "an increment can be placed from week 1 on");
      belief_.emplace(apply_action(*belief_, t, h_add_m));
      status_ = SessionStatus::adjusted;
    } else {
      status_ = SessionStatus::measuring;
    }
    const bool override_ = !(rec.kind == DecisionKind::adjust ? h_add_m == rec.h_add_m : h_add_m == 0.0);
    log_.append({{"event", "decision"},
                 {"t_week", t},
                 {"recommended_action", decision_name(rec.kind)},
                 {"recommended_h_add_m", rec.h_add_m},
                 {"committed_h_add_m", h_add_m},
                 {"override", override_},
                 {"belief_hash", to_hex(belief_->hash())}});
    decision_.reset();
    json out = summary();
    out["committed_h_add_m"] = h_add_m;
    out["override"] = override_;
    return out;
  }

  /// Ends the session and logs expected costs and compliance under the
  /// current belief.
  json close() {
    require_open();
    const auto& req = problem_->requirements;
    const CostBreakdown c = expected_cost(*belief_);
    json fin = {{"event", "final"},
                {"t_week", last_event_week()},
                {"expected_cost_SEK", c.total()},
                {"expected_cost_components_SEK",
                 {{"surcharge_initial", c.sur_initial},
                  {"surcharge_increase", c.sur_increase},
                  {"delay", c.delay},
                  {"ocr_penalty", c.ocr}}},
                {"prob_settlement_ok", 1.0 - prob_noncompliant(*belief_, req)},
                {"prob_ocr_ok", prob_ocr_ok(*belief_)},
                {"belief_hash", to_hex(belief_->hash())}};
    log_.append(fin);
    status_ = SessionStatus::closed;
    json out = summary();
    out["final"] = fin;
    return out;
  }

  /// Posterior summary: fan chart of S(t), S(t_max) and OCR(t_max) stats,
  /// gate state and compliance probabilities. Read-only and deterministic.
  json summary() const {
    const auto& req = problem_->requirements;
    const Belief& b = *belief_;
    const double tm = req.t_max_week;
    json s = provenance();
    s["status"] = status_name(status_);
    s["t_current_week"] = b.t_current();
    s["seed"] = cfg_.seed;
    s["n_particles"] = b.size();
    s["heuristic"] = {{"h0_m", cfg_.heuristic.h0_m}, {"cov_th", cfg_.heuristic.cov_th}, {"p_th", cfg_.heuristic.p_th}};
    const auto& sch = b.schedule();
    s["schedule"] = {{"h0_m", sch.h0_m},
                     {"t_add_week", sch.t_add_week ? json(*sch.t_add_week) : json(nullptr)},
                     {"h_add_m", sch.h_add_m}};
    json fan = {{"weeks", json::array()},
                {"mean_m", json::array()},
                {"q025_m", json::array()},
                {"q50_m", json::array()},
                {"q975_m", json::array()}};
    for (int w = 0; w <= req.t_max_week; ++w) {
      const auto st = posterior_stats(b, SettlementAt{static_cast<double>(w)}, detail::kBand);
      fan["weeks"].push_back(w);
      fan["mean_m"].push_back(st.mean);
      fan["q025_m"].push_back(st.quantiles[0]);
      fan["q50_m"].push_back(st.quantiles[1]);
      fan["q975_m"].push_back(st.quantiles[2]);
    }
    s["settlement_fan"] = fan;
    s["settlement_tmax"] = detail::stats_json(posterior_stats(b, SettlementAt{tm}, detail::kBand), "_m");
    s["ocr_tmax"] = detail::stats_json(posterior_stats(b, OcrAt{tm}, detail::kBand), "");
    s["prob_below_target"] = prob_below_target(b, req.s_target_m, tm);
    s["prob_noncompliant"] = prob_noncompliant(b, req);
    s["prob_ocr_ok"] = prob_ocr_ok(b);
    const double g = gate_statistic(b, req, problem_->gate);
    s["gate"] = {{"measure", problem_->gate == GateMeasure::cov ? "cov" : "std"},
                 {"value", g},
                 {"threshold", cfg_.heuristic.cov_th},
                 {"open", g < cfg_.heuristic.cov_th}};
    json meas = json::array();
    for (const auto& e : log_.events())
      if (e["event"] == "measurement") meas.push_back({{"t_week", e["t_week"]}, {"z_s_m", e["z_s_m"]}});
    s["measurements"] = meas;
    s["belief_hash"] = to_hex(b.hash());
    return s;
  }

  /// Stable digest of summary(); equal for sessions in the same state.
  std::string summary_hash() const { return to_hex(fnv1a64(summary().dump())); }

 private:
  friend Session replay(const SessionLog& log, const Scenario& scenario);

  json provenance() const {
    return {{"scenario_hash", scenario_.hash()}, {"event_index", event_index()}};
  }

  void require_open() const {
    if (status_ == SessionStatus::closed) throw Error(Errc::session_closed, "session is closed");
  }

  Decision decide() const {
    return heuristic_bu_decide(*belief_, belief_->t_current(), cfg_.heuristic, problem_->requirements,
                               problem_->increment_grid, problem_->gate);
  }

  json decision_json(const Decision& d, json r) const {
    r["action"] = decision_name(d.kind);
    r["h_add_m"] = d.h_add_m;
    r["gate_value"] = d.gate_value;
    r["gate_threshold"] = cfg_.heuristic.cov_th;
    r["gate_open"] = d.kind != DecisionKind::keep_measuring;
    r["prob_noncompliant"] = d.prob_noncompliant;
    r["p_th"] = cfg_.heuristic.p_th;
    r["prob_noncompliant_after"] = d.prob_after ? json(*d.prob_after) : json(nullptr);
    r["grid_exhausted"] = d.grid_exhausted;
    return r;
  }

  void log_belief_summary(const json& warnings) {
    const auto& req = problem_->requirements;
    const auto st = posterior_stats(*belief_, SettlementAt{static_cast<double>(req.t_max_week)});
    json ev = {{"event", "belief_summary"},
               {"t_week", last_event_week()},
               {"belief_t_week", belief_->t_current()},
               {"settlement_tmax_mean_m", st.mean},
               {"settlement_tmax_std_m", st.std},
               {"prob_noncompliant", prob_noncompliant(*belief_, req)},
               {"status", status_name(status_)},
               {"belief_hash", to_hex(belief_->hash())}};
    if (decision_) ev["recommended_action"] = decision_name(decision_->kind);
    if (!warnings.empty()) ev["warnings"] = warnings;
    log_.append(std::move(ev));
  }

  double prob_ocr_ok(const Belief& b) const {
    const auto& req = problem_->requirements;
    std::vector<double> hits(b.size());
    for (std::size_t k = 0; k < b.size(); ++k) {
      const auto& p = b.particles()[k];
      hits[k] = p.response.ocr(req.t_max_week) >= req.ocr_target ? p.weight : 0.0;
    }
    return pairwise_sum(hits);
  }

  CostBreakdown expected_cost(const Belief& b) const {
    const auto& req = problem_->requirements;
    const double L = problem_->site->geometry.road_length_m;
    const std::size_t n = b.size();
    std::vector<double> a(n), c(n), d(n), e(n), w(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& p = b.particles()[k];
      const auto cb = total_cost(p.response, req, problem_->costs, L);
      a[k] = p.weight * cb.sur_initial;
      c[k] = p.weight * cb.sur_increase;
      d[k] = p.weight * cb.delay;
      e[k] = p.weight * cb.ocr;
      w[k] = p.weight;
    }
    const double ws = pairwise_sum(w);
    CostBreakdown out;
    out.sur_initial = pairwise_sum(a) / ws;
    out.sur_increase = pairwise_sum(c) / ws;
    out.delay = pairwise_sum(d) / ws;
    out.ocr = pairwise_sum(e) / ws;
    return out;
  }

  /// Every fourth particle, reweighted; used for fast what-if previews.
  static Belief thin(const Belief& b) {
    std::vector<Particle> ps;
    for (std::size_t k = 0; k < b.size(); k += 4) ps.push_back(b.particles()[k]);
    if (ps.size() < 2) return b;
    double s = 0.0;
    for (const auto& p : ps) s += p.weight;
    for (auto& p : ps) p.weight /= s;
    return Belief(b.site_ptr(), std::move(ps), b.t_current(), b.schedule(), b.seed(), b.update_count(),
                  b.options());
  }

  static std::string fmt(double x) {
    std::ostringstream o;
    o << x;
    return o.str();
  }

  Scenario scenario_;
  SessionConfig cfg_;
  std::shared_ptr<const DecisionProblem> problem_;
  std::optional<Belief> belief_;
  SessionLog log_;
  SessionStatus status_ = SessionStatus::measuring;
  std::optional<Decision> decision_;
};

/// Rebuilds a session from its log. Every recorded belief hash must match
/// the recomputed one; any mismatch, or a scenario hash that differs from
/// the log's, is reported as tampering.
inline Session replay(const SessionLog& log, const Scenario& scenario) {
  if (log.empty()) throw Error(Errc::schema_violation, "session log has no init event");
  const json& init = log.events().front();
  if (init.value("event", "") != "init") throw Error(Errc::schema_violation, "first log event must be init");
  if (init.value("scenario_hash", "") != scenario.hash())
    throw Error(Errc::tamper, "log was written for scenario " + init.value("scenario_hash", std::string("?")) +
                                  ", not " + scenario.hash());
  SessionConfig cfg;
  try {
    cfg.seed = init.at("seed").get<std::uint64_t>();
    cfg.n_particles = init.at("n_particles").get<std::size_t>();
    const auto& h = init.at("heuristic");
    cfg.heuristic = {h.at("h0_m").get<double>(), h.at("cov_th").get<double>(), h.at("p_th").get<double>()};
  } catch (const json::exception& e) {
    throw Error(Errc::schema_violation, std::string("init event: ") + e.what());
  }
  Session s(scenario, cfg);
  auto check = [&](const json& ev) {
    if (ev.contains("belief_hash") && ev["belief_hash"].get<std::string>() != to_hex(s.belief_->hash()))
      throw Error(Errc::tamper, "belief hash mismatch at log event " + std::to_string(ev.value("index", 0)));
  };
  check(init);
  try {
    for (std::size_t i = 1; i < log.size(); ++i) {
      const json& ev = log.events()[i];
      const std::string kind = ev.at("event").get<std::string>();
      if (kind == "measurement") {
        s.add_measurement(ev.at("t_week").get<double>(), ev.at("z_s_m").get<double>(),
                          ev.at("sigma_eps_m").get<double>());
      } else if (kind == "belief_summary") {
        check(ev);
      } else if (kind == "decision") {
        s.commit_action(ev.at("committed_h_add_m").get<double>());
        check(ev);
      } else if (kind == "final") {
        s.close();
        check(ev);
      } else {
        throw Error(Errc::schema_violation, "unknown log event '" + kind + "'");
      }
      if (i >= s.log_.size() || s.log_.events()[i] != ev)
        throw Error(Errc::tamper, "log event " + std::to_string(i) + " does not match its replay");
    }
  } catch (const json::exception& e) {
    throw Error(Errc::schema_violation, std::string("session log: ") + e.what());
  }
  if (s.log_.size() != log.size()) throw Error(Errc::tamper, "replayed log length differs from the input log");
  return s;
}

}  // namespace pdt
