// pdt: command-line front end for the embankment twin.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"

#include "pdt/consolidation.hpp"
#include "pdt/error.hpp"
#include "pdt/optimizer.hpp"
#include "pdt/report.hpp"
#include "pdt/scenario.hpp"
#include "pdt/service.hpp"
#include "pdt/session.hpp"

namespace fs = std::filesystem;
using pdt::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitService = 4;

struct ServiceFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string scenario = "stockholm-highway73";
  std::vector<std::string> sets;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool quiet = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-s,--scenario", c.scenario, "Scenario file or bundled scenario name")->capture_default_str();
  sub->add_option("--set", c.sets, "Scenario override path=value (repeatable); --path.to.key=value also works");
  sub->add_option("-o,--out", c.out, "Output directory")->capture_default_str();
  sub->add_option("--seed", c.seed, "Master seed (default: study.ce.master_seed from the scenario)");
  sub->add_option("--threads", c.threads, "Worker threads for Monte Carlo rollouts (0 = all cores)");
  sub->add_flag("-q,--quiet", c.quiet, "Print nothing on success");
  sub->allow_extras();
}

/// Collects `--a.b=value` extras as overrides; anything else is an error.
std::vector<std::string> gather_overrides(const CLI::App* sub, const Common& c) {
  std::vector<std::string> out = c.sets;
  for (const auto& arg : sub->remaining()) {
    if (arg.rfind("--", 0) == 0 && arg.find('=') != std::string::npos &&
        arg.substr(2, arg.find('=') - 2).find('.') != std::string::npos) {
      out.push_back(arg.substr(2));
      continue;
    }
    throw CLI::ExtrasError({arg});
  }
  return out;
}

struct Context {
  pdt::Scenario scenario;
  std::uint64_t seed;
  fs::path out;
  pdt::OutputProvenance prov;
};

Context make_context(const CLI::App* sub, const Common& c, const std::string& command) {
  auto overrides = gather_overrides(sub, c);
  if (c.threads) overrides.push_back("study.ce.threads=" + std::to_string(*c.threads));
  pdt::Scenario sc = pdt::load_scenario(c.scenario, overrides);
  const std::uint64_t seed = c.seed.value_or(sc.study().ce.master_seed);
  fs::create_directories(c.out);
  pdt::OutputProvenance prov{sc.hash(), seed, command};
  return {std::move(sc), seed, fs::path(c.out), prov};
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw pdt::Error(pdt::Errc::io, "cannot write " + p.string());
  f << content;
}

void write_json(const fs::path& p, const json& j) { write_file(p, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::optional<double> h0, t_add, h_add;
  std::optional<int> weeks;
  std::string truth = "sample";
};

int run_simulate(const Context& ctx, const SimulateArgs& a, bool quiet) {
  const auto& p = ctx.scenario.problem();
  const double h0 = a.h0.value_or(ctx.scenario.session().heuristic.h0_m);
  pdt::ActionSchedule sched{h0, a.t_add, a.h_add.value_or(0.0)};
  if (a.h_add && !a.t_add) throw pdt::Error(pdt::Errc::invalid_argument, "--h-add needs --t-add");
  const int weeks = a.weeks.value_or(p.requirements.t_max_week + p.costs.delay_cap_weeks);
  sched.validate(weeks);

  pdt::SoilSample soil;
  if (a.truth == "sample") {
    pdt::DecisionProblem q = p;
    q.max_h0_m = std::max(q.max_h0_m, h0);
    soil = pdt::draw_rollout_inputs(q, ctx.seed, 0).truth;
  } else {
    for (pdt::SoilParam s : pdt::kSoilParams) soil[s] = p.priors[s].median();
  }
  const auto tr = pdt::simulate_trajectory(soil, *p.site, sched, weeks);
  std::ostringstream csv;
  pdt::write_trajectory_csv(csv, tr, ctx.prov);
  write_file(ctx.out / "trajectory.csv", csv.str());

  json summary = {{"provenance", ctx.prov.to_json()},
                  {"truth", a.truth},
                  {"soil", pdt::soil_json(soil)},
                  {"schedule", pdt::schedule_json(sched)},
                  {"weeks", weeks}};
  if (weeks >= p.requirements.t_max_week) {
    const auto flags = pdt::check_requirements(tr.response, p.requirements);
    const auto cost = pdt::total_cost(tr.response, p.requirements, p.costs, p.site->geometry.road_length_m);
    const double tm = p.requirements.t_max_week;
    summary["settlement_tmax_m"] = tr.response.settlement(tm);
    summary["ocr_tmax"] = tr.response.ocr(tm);
    summary["compliance"] = {{"settlement_ok", flags.settlement_ok}, {"ocr_ok", flags.ocr_ok}};
    summary["cost"] = pdt::cost_json(cost);
    std::optional<int> reached;
    for (std::size_t i = 0; i < tr.week.size(); ++i)
      if (p.requirements.settlement_ok(tr.settlement_m[i])) {
        reached = static_cast<int>(i);
        break;
      }
    summary["target_reached_week"] = reached ? json(*reached) : json(nullptr);
  }
  write_json(ctx.out / "simulate.json", summary);
  if (!quiet) std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct UpdateArgs {
  std::string measurements;
  std::optional<std::uint64_t> synthetic_truth_seed;
  std::string replay;
  std::optional<double> h0, cov_th, p_th;
  std::optional<std::size_t> n_particles;
  bool auto_commit = false;
  bool close = false;
};

std::vector<pdt::Measurement> read_measurements(const std::string& path, double default_sigma) {
  std::ifstream in(path);
  if (!in) throw pdt::Error(pdt::Errc::io, "cannot open " + path);
  std::vector<pdt::Measurement> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("t_week", 0) == 0) continue;
    std::stringstream ss(line);
    std::string a, b, c;
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    std::getline(ss, c, ',');
    try {
      pdt::Measurement m{std::stod(a), std::stod(b), c.empty() ? default_sigma : std::stod(c)};
      out.push_back(m);
    } catch (const std::exception&) {
      throw pdt::Error(pdt::Errc::schema_violation, path + ":" + std::to_string(lineno) + ": expected t_week,z_s_m[,sigma_eps_m]");
    }
  }
  return out;
}

int run_update(const Context& ctx, const UpdateArgs& a, bool quiet) {
  const auto& sc = ctx.scenario;
  const auto& req = sc.requirements();
  std::optional<pdt::Session> session;
  json extra = json::object();

  if (!a.replay.empty()) {
    session.emplace(pdt::replay(pdt::SessionLog::read_file(a.replay), sc));
  } else {
    pdt::SessionConfig cfg;
    cfg.seed = ctx.seed;
    cfg.heuristic = sc.session().heuristic;
    if (a.h0) cfg.heuristic.h0_m = *a.h0;
    if (a.cov_th) cfg.heuristic.cov_th = *a.cov_th;
    if (a.p_th) cfg.heuristic.p_th = *a.p_th;
    cfg.n_particles = a.n_particles.value_or(sc.session().n_particles);
    session.emplace(sc, cfg);

    std::vector<pdt::Measurement> zs;
    std::optional<pdt::SoilSample> truth_soil;
    std::vector<double> noise;
    if (a.synthetic_truth_seed) {
      pdt::DecisionProblem q = sc.problem();
      q.max_h0_m = std::max(q.max_h0_m, cfg.heuristic.h0_m);
      const auto in = pdt::draw_rollout_inputs(q, *a.synthetic_truth_seed, 0);
      truth_soil = in.truth;
      noise = in.noise;
      extra["truth"] = {{"seed", *a.synthetic_truth_seed}, {"soil", pdt::soil_json(in.truth)}};
    } else if (!a.measurements.empty()) {
      zs = read_measurements(a.measurements, sc.sigma_eps_m());
    } else {
      throw pdt::Error(pdt::Errc::invalid_argument, "give --measurements, --synthetic-truth-seed or --replay");
    }

    // Synthetic readings follow the truth as it responds to committed actions.
    pdt::ActionSchedule truth_sched{cfg.heuristic.h0_m, std::nullopt, 0.0};
    std::optional<pdt::ConsolidationResponse> truth;
    if (truth_soil) truth.emplace(*truth_soil, sc.site(), truth_sched);
    const std::size_t n_meas = truth ? static_cast<std::size_t>(req.t_max_week) : zs.size();
    bool committed = false;
    std::optional<double> decision_week;
    for (std::size_t i = 0; i < n_meas; ++i) {
      pdt::Measurement z;
      if (truth) {
        const double t = static_cast<double>(i + 1);
        z = {t, truth->settlement(t) + sc.sigma_eps_m() * noise[i], sc.sigma_eps_m()};
      } else {
        z = zs[i];
      }
      session->add_measurement(z.t_week, z.z_s_m, z.sigma_eps_m);
      if (a.auto_commit && !committed && session->status() == pdt::SessionStatus::decision_pending) {
        const json rec = session->recommendation();
        const double h = rec["action"] == "adjust" ? rec["h_add_m"].get<double>() : 0.0;
        session->commit_action(h);
        committed = true;
        decision_week = z.t_week;
        if (truth && h > 0.0) truth.emplace(truth->with_increment(sc.site(), z.t_week, h));
      }
    }
    if (decision_week) extra["decision_week"] = *decision_week;
    if (truth) {
      const auto flags = pdt::check_requirements(*truth, req);
      extra["truth"]["schedule"] = pdt::schedule_json(truth->schedule());
      extra["truth"]["settlement_tmax_m"] = truth->settlement(req.t_max_week);
      extra["truth"]["ocr_tmax"] = truth->ocr(req.t_max_week);
      extra["truth"]["compliance"] = {{"settlement_ok", flags.settlement_ok}, {"ocr_ok", flags.ocr_ok}};
      extra["truth"]["cost"] =
          pdt::cost_json(pdt::total_cost(*truth, req, sc.costs(), sc.site().geometry.road_length_m));
    }
    if (a.close) session->close();
  }

  json out = {{"provenance", ctx.prov.to_json()}, {"summary", session->summary()},
              {"summary_hash", session->summary_hash()}};
  for (auto it = extra.begin(); it != extra.end(); ++it) out[it.key()] = it.value();
  write_file(ctx.out / "session.jsonl", session->log().to_string());
  write_json(ctx.out / "update.json", out);
  if (!quiet) {
    const auto& s = out["summary"];
    std::cout << "status " << s["status"].get<std::string>() << ", week " << s["t_current_week"].dump()
              << ", P[noncompliant] " << s["prob_noncompliant"].dump() << ", gate " << s["gate"]["value"].dump()
              << (s["gate"]["open"].get<bool>() ? " (open)" : " (closed)") << "\n"
              << "schedule " << s["schedule"].dump() << "\n"
              << "summary_hash " << out["summary_hash"].get<std::string>() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct PolicyArgs {
  std::string policy = "bu";
  std::optional<double> sigma_eps;
  std::optional<double> h0, cov_th, p_th;
  std::optional<std::size_t> n_mc, n_bu;
};

pdt::PolicyKind parse_policy(const std::string& s) {
  if (s == "bu") return pdt::PolicyKind::bu;
  if (s == "static") return pdt::PolicyKind::static_only;
  throw pdt::Error(pdt::Errc::invalid_argument, "policy must be 'bu' or 'static'");
}

int run_optimize(const Context& ctx, const PolicyArgs& a, bool quiet) {
  const auto kind = parse_policy(a.policy);
  pdt::CeConfig cfg = ctx.scenario.study().ce;
  cfg.master_seed = ctx.seed;
  const double sigma = a.sigma_eps.value_or(ctx.scenario.sigma_eps_m());
  const auto row = pdt::optimize_policy(ctx.scenario.problem(), kind, sigma, cfg);
  std::ostringstream trace;
  for (std::size_t r = 0; r < row.restarts.size(); ++r)
    pdt::write_ce_trace(trace, row.restarts[r], {{"policy", pdt::policy_name(kind)}, {"sigma_eps_m", sigma}, {"restart", r}});
  write_file(ctx.out / "ce_trace.jsonl", trace.str());
  json out = pdt::study_row_json(row);
  out["provenance"] = ctx.prov.to_json();
  write_json(ctx.out / "optimize.json", out);
  if (!quiet)
    std::cout << "w_opt " << out["w_opt"].dump() << "\nexpected cost " << out["final_evaluation"]["expected_cost_SEK"].dump()
              << " SEK (se " << out["final_evaluation"]["standard_error_SEK"].dump() << ")\n";
  return kExitOk;
}

int run_evaluate(const Context& ctx, const PolicyArgs& a, bool quiet) {
  const auto kind = parse_policy(a.policy);
  const auto& ce = ctx.scenario.study().ce;
  pdt::HeuristicParams w = ctx.scenario.session().heuristic;
  if (a.h0) w.h0_m = *a.h0;
  if (a.cov_th) w.cov_th = *a.cov_th;
  if (a.p_th) w.p_th = *a.p_th;
  pdt::DecisionProblem p = ctx.scenario.problem();
  p.max_h0_m = std::max(p.max_h0_m, w.h0_m);
  const double sigma = a.sigma_eps.value_or(ctx.scenario.sigma_eps_m());
  const auto r = pdt::evaluate_policy(w, p, kind, a.n_mc.value_or(ce.final_n_mc), a.n_bu.value_or(ce.n_bu), ctx.seed,
                                      sigma, ce.threads);
  std::ostringstream csv;
  pdt::write_rollouts_csv(csv, r, ctx.prov);
  write_file(ctx.out / "rollouts.csv", csv.str());
  json out = pdt::evaluation_json(r);
  out["policy"] = pdt::policy_name(kind);
  out["w"] = pdt::heuristic_json(w, kind);
  out["sigma_eps_m"] = sigma;
  out["provenance"] = ctx.prov.to_json();
  write_json(ctx.out / "evaluation.json", out);
  if (!quiet)
    std::cout << "expected cost " << out["expected_cost_SEK"].dump() << " SEK (std " << out["std_cost_SEK"].dump()
              << ", se " << out["standard_error_SEK"].dump() << ", n " << r.records.size() << ")\n";
  return kExitOk;
}

void write_tables(const fs::path& dir, const json& study) {
  write_file(dir / "table2.tsv", pdt::table2_tsv(study));
  write_file(dir / "table3.tsv", pdt::table3_tsv(study));
  write_file(dir / "cost_breakdown.tsv", pdt::cost_breakdown_tsv(study));
}

int run_study(const Context& ctx, bool quiet) {
  pdt::CeConfig cfg = ctx.scenario.study().ce;
  cfg.master_seed = ctx.seed;
  const auto res = pdt::run_study(ctx.scenario.problem(), ctx.scenario.study().sigma_eps_list, cfg);
  const json study = pdt::study_json(res, ctx.prov);
  write_json(ctx.out / "study.json", study);
  std::ostringstream trace;
  pdt::write_study_trace(trace, res);
  write_file(ctx.out / "ce_trace.jsonl", trace.str());
  write_tables(ctx.out, study);
  if (!quiet) std::cout << pdt::table2_tsv(study) << "\n" << pdt::table3_tsv(study);
  return kExitOk;
}

int run_report(const fs::path& input, const fs::path& out, bool quiet) {
  const json study = pdt::read_json_file(input);
  if (!study.contains("rows") || !study.contains("provenance"))
    throw pdt::Error(pdt::Errc::schema_violation, input.string() + ": not a study result");
  fs::create_directories(out);
  try {
    write_tables(out, study);
    if (!quiet) std::cout << pdt::table2_tsv(study) << "\n" << pdt::table3_tsv(study) << "\n" << pdt::cost_breakdown_tsv(study);
  } catch (const json::exception& e) {
    throw pdt::Error(pdt::Errc::schema_violation, input.string() + ": " + e.what());
  }
  return kExitOk;
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int run_serve(const std::string& scenario, const std::string& host, int port, const std::string& static_dir,
              bool quiet) {
  pdt::TwinService service(scenario);
  httplib::Server svr;
  pdt::bind_routes(svr, service, static_dir);
  if (!svr.bind_to_port(host, port)) throw ServiceFailure("cannot bind " + host + ":" + std::to_string(port));
  g_server = &svr;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  if (!quiet) std::cerr << "listening on http://" << host << ":" << port << "\n";
  if (!svr.listen_after_bind()) throw ServiceFailure("server stopped with an error");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic digital twin for preloaded embankments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "pdt 1.0.0");

  Common c_sim, c_upd, c_opt, c_eval, c_study;
  SimulateArgs sim;
  UpdateArgs upd;
  PolicyArgs opt, ev;

  auto* s_sim = app.add_subcommand("simulate", "Simulate one settlement/OCR trajectory");
  add_common(s_sim, c_sim);
  s_sim->add_option("--h0", sim.h0, "Initial surcharge height [m] (default: session.heuristic.h0_m)");
  s_sim->add_option("--t-add", sim.t_add, "Week of the surcharge increment");
  s_sim->add_option("--h-add", sim.h_add, "Surcharge increment height [m]");
  s_sim->add_option("--weeks", sim.weeks, "Horizon in weeks (default: t_max + delay cap)");
  s_sim->add_option("--truth", sim.truth, "Soil realization: 'sample' (drawn with --seed) or 'median'")
      ->check(CLI::IsMember({"sample", "median"}))
      ->capture_default_str();

  auto* s_upd = app.add_subcommand("update", "Run or replay a measurement session");
  add_common(s_upd, c_upd);
  s_upd->add_option("--measurements", upd.measurements, "CSV with t_week,z_s_m[,sigma_eps_m]");
  s_upd->add_option("--synthetic-truth-seed", upd.synthetic_truth_seed,
                    "Generate weekly readings from a ground truth drawn with this seed");
  s_upd->add_option("--replay", upd.replay, "Replay a session log against the scenario");
  s_upd->add_option("--h0", upd.h0, "Initial surcharge height [m]");
  s_upd->add_option("--cov-th", upd.cov_th, "Gate threshold on the spread of S(t_max)");
  s_upd->add_option("--p-th", upd.p_th, "Acceptable non-compliance probability");
  s_upd->add_option("--n-particles", upd.n_particles, "Particles in the belief");
  s_upd->add_flag("--auto-commit", upd.auto_commit, "Commit the first recommendation as soon as the gate opens");
  s_upd->add_flag("--close", upd.close, "Close the session after the last reading");

  auto* s_opt = app.add_subcommand("optimize", "Cross-entropy search for one policy");
  add_common(s_opt, c_opt);
  s_opt->add_option("--policy", opt.policy, "bu or static")->capture_default_str();
  s_opt->add_option("--sigma-eps", opt.sigma_eps, "Measurement error std [m]");

  auto* s_eval = app.add_subcommand("evaluate", "Monte Carlo cost of a fixed policy");
  add_common(s_eval, c_eval);
  s_eval->add_option("--policy", ev.policy, "bu or static")->capture_default_str();
  s_eval->add_option("--sigma-eps", ev.sigma_eps, "Measurement error std [m]");
  s_eval->add_option("--h0", ev.h0, "Initial surcharge height [m]");
  s_eval->add_option("--cov-th", ev.cov_th, "Gate threshold");
  s_eval->add_option("--p-th", ev.p_th, "Acceptable non-compliance probability");
  s_eval->add_option("--n-mc", ev.n_mc, "Rollouts (default: study.ce.final_n_mc)");
  s_eval->add_option("--n-bu", ev.n_bu, "Particles per rollout (default: study.ce.n_bu)");

  auto* s_study = app.add_subcommand("study", "Optimize BU per measurement error plus the static baseline");
  add_common(s_study, c_study);

  std::string report_in, report_out = ".";
  bool report_quiet = false;
  auto* s_rep = app.add_subcommand("report", "Rebuild the tables from a study.json");
  s_rep->add_option("-i,--input", report_in, "study.json written by 'study'")->required();
  s_rep->add_option("-o,--out", report_out, "Output directory")->capture_default_str();
  s_rep->add_flag("-q,--quiet", report_quiet, "Print nothing on success");

  std::string serve_scenario = "stockholm-highway73", serve_host = "127.0.0.1", serve_static;
  int serve_port = 8080;
  bool serve_quiet = false;
  auto* s_srv = app.add_subcommand("serve", "Run the HTTP session service");
  s_srv->add_option("-s,--scenario", serve_scenario, "Scenario used when a request names none")->capture_default_str();
  s_srv->add_option("--host", serve_host, "Bind address")->capture_default_str();
  s_srv->add_option("--port", serve_port, "Port")->capture_default_str();
  s_srv->add_option("--static", serve_static, "Directory served at / (dashboard bundle)");
  s_srv->add_flag("-q,--quiet", serve_quiet, "No startup message");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (s_sim->parsed()) return run_simulate(make_context(s_sim, c_sim, "simulate"), sim, c_sim.quiet);
    if (s_upd->parsed()) return run_update(make_context(s_upd, c_upd, "update"), upd, c_upd.quiet);
    if (s_opt->parsed()) return run_optimize(make_context(s_opt, c_opt, "optimize"), opt, c_opt.quiet);
    if (s_eval->parsed()) return run_evaluate(make_context(s_eval, c_eval, "evaluate"), ev, c_eval.quiet);
    if (s_study->parsed()) return run_study(make_context(s_study, c_study, "study"), c_study.quiet);
    if (s_rep->parsed()) return run_report(report_in, report_out, report_quiet);
    if (s_srv->parsed()) return run_serve(serve_scenario, serve_host, serve_port, serve_static, serve_quiet);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ServiceFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitService;
  } catch (const pdt::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pdt::is_config_error(e.code()) || e.code() == pdt::Errc::invalid_argument ? kExitConfig : kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}
