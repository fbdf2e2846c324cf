#pragma once

// Session-oriented HTTP/JSON front end. TwinService does the routing logic
// on plain values so it can be tested without sockets; bind_routes() wires
// it into an httplib server.

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <utility>

#include "httplib.h"
#include "json.hpp"

#include "pdt/error.hpp"
#include "pdt/scenario.hpp"
#include "pdt/session.hpp"

namespace pdt {

struct ServiceResponse {
  int status = 200;
  json body;
  std::string text;  // used instead of body when non-empty
  std::string content_type = "application/json";
};

inline int http_status_for(Errc c) noexcept {
  switch (c) {
    case Errc::not_found: return 404;
    case Errc::out_of_order:
    case Errc::invalid_state:
    case Errc::unsupported_action: return 409;
    case Errc::session_closed: return 410;
    case Errc::stress_range_exceeded:
    case Errc::continuity_unsolvable:
    case Errc::degenerate_update:
    case Errc::undefined_cov:
    case Errc::optimization_failed: return 500;
    default: return 422;
  }
}

inline ServiceResponse error_response(const Error& e) {
  return {http_status_for(e.code()), {{"error", errc_name(e.code())}, {"message", e.what()}}, {}, "application/json"};
}

class TwinService {
 public:
  explicit TwinService(std::string default_scenario = "stockholm-highway73")
      : default_scenario_(std::move(default_scenario)) {}

  /// POST /sessions
  ServiceResponse create(const json& req) {
    return guard([&]() -> ServiceResponse {
      if (!req.is_object()) throw Error(Errc::schema_violation, "request body must be a JSON object");
      detail::ObjectReader r(req, "");
      std::vector<std::string> overrides;
      if (const json* o = r.find("overrides")) {
        if (!o->is_array()) throw Error(Errc::schema_violation, "overrides: expected an array of strings");
        for (const auto& s : *o) {
          if (!s.is_string()) throw Error(Errc::schema_violation, "overrides: expected an array of strings");
          overrides.push_back(s.get<std::string>());
        }
      }
      json doc;
      if (const json* s = r.find("scenario")) {
        if (s->is_string())
          doc = load_scenario_document(s->get<std::string>());
        else if (s->is_object())
          doc = *s;
        else
          throw Error(Errc::schema_violation, "scenario: expected a name, a path or an inline object");
      } else {
        doc = load_scenario_document(default_scenario_);
      }
      for (const auto& o : overrides) apply_override(doc, o);
      Scenario sc = Scenario::from_json(doc);
      SessionConfig cfg;
      cfg.seed = r.unsigned_integer("seed", 0);
      cfg.heuristic = sc.session().heuristic;
      cfg.n_particles = static_cast<std::size_t>(r.unsigned_integer("n_particles", sc.session().n_particles));
      if (r.has("heuristic")) {
        detail::ObjectReader h(r.require("heuristic"), "heuristic");
        cfg.heuristic.h0_m = h.number("h0_m", cfg.heuristic.h0_m);
        cfg.heuristic.cov_th = h.number("cov_th", cfg.heuristic.cov_th);
        cfg.heuristic.p_th = h.number("p_th", cfg.heuristic.p_th);
        h.finish();
      }
      r.finish();
      try {
        cfg.heuristic.validate();
      } catch (const Error& e) {
        throw Error(Errc::schema_violation, std::string("heuristic: ") + e.what());
      }
      auto entry = std::make_shared<Entry>(std::move(sc), cfg);
      const std::string id = "s" + std::to_string(next_id_.fetch_add(1) + 1);
      {
        std::unique_lock lock(map_mutex_);
        sessions_.emplace(id, entry);
      }
      json body = entry->session.summary();
      body["session_id"] = id;
      return {201, body, {}, "application/json"};
    });
  }

  /// POST /sessions/{id}/measurements
  ServiceResponse measure(const std::string& id, const json& req) {
    return with_writer(id, [&](Session& s) {
      detail::ObjectReader r(req, "");
      const double t = r.number("t_week");
      const double z = r.number("z_s_m");
      std::optional<double> sigma;
      if (r.has("sigma_eps_m")) sigma = r.number("sigma_eps_m");
      r.finish();
      return s.add_measurement(t, z, sigma);
    });
  }

  /// GET /sessions/{id}/whatif?h_add_m=x[&fast=true]
  ServiceResponse whatif(const std::string& id, double h_add_m, bool fast) {
    return with_reader(id, [&](const Session& s) { return s.whatif(h_add_m, fast); });
  }

  /// POST /sessions/{id}/actions
  ServiceResponse act(const std::string& id, const json& req) {
    return with_writer(id, [&](Session& s) {
      detail::ObjectReader r(req, "");
      const double h = r.number("h_add_m");
      r.finish();
      return s.commit_action(h);
    });
  }

  /// GET /sessions/{id}/recommendation
  ServiceResponse recommendation(const std::string& id) {
    return with_reader(id, [](const Session& s) { return s.recommendation(); });
  }

  /// GET /sessions/{id}
  ServiceResponse get(const std::string& id) {
    return with_reader(id, [](const Session& s) { return s.summary(); });
  }

  /// GET /sessions/{id}/log
  ServiceResponse log(const std::string& id) {
    return guard([&]() -> ServiceResponse {
      auto e = find(id);
      std::shared_lock lock(e->mutex);
      return {200, {}, e->session.log().to_string(), "application/x-ndjson"};
    });
  }

  /// POST /sessions/{id}/close
  ServiceResponse close(const std::string& id) {
    return with_writer(id, [](Session& s) { return s.close(); });
  }

  std::size_t session_count() const {
    std::shared_lock lock(map_mutex_);
    return sessions_.size();
  }

 private:
  struct Entry {
    Entry(Scenario sc, SessionConfig cfg) : session(std::move(sc), cfg) {}
    std::shared_mutex mutex;
    Session session;
  };

  template <class F>
  static ServiceResponse guard(F&& f) {
    try {
      return f();
    } catch (const Error& e) {
      return error_response(e);
    } catch (const json::exception& e) {
      return {400, {{"error", "bad-request"}, {"message", e.what()}}, {}, "application/json"};
    }
  }

  std::shared_ptr<Entry> find(const std::string& id) const {
    std::shared_lock lock(map_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(Errc::not_found, "no session '" + id + "'");
    return it->second;
  }

  template <class F>
  ServiceResponse with_writer(const std::string& id, F&& f) {
    return guard([&]() -> ServiceResponse {
      auto e = find(id);
      std::unique_lock lock(e->mutex);
      json body = f(e->session);
      body["session_id"] = id;
      return {200, body, {}, "application/json"};
    });
  }

  template <class F>
  ServiceResponse with_reader(const std::string& id, F&& f) {
    return guard([&]() -> ServiceResponse {
      auto e = find(id);
      std::shared_lock lock(e->mutex);
      json body = f(std::as_const(e->session));
      body["session_id"] = id;
      return {200, body, {}, "application/json"};
    });
  }

  std::string default_scenario_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::atomic<std::uint64_t> next_id_{0};
};

namespace detail {

inline void send(httplib::Response& res, const ServiceResponse& r) {
  res.status = r.status;
  if (!r.text.empty())
    res.set_content(r.text, r.content_type);
  else
    res.set_content(r.body.dump(), r.content_type);
}

inline json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw Error(Errc::schema_violation, std::string("request body: ") + e.what());
  }
}

}  // namespace detail

/// Registers the session endpoints on `svr`. When `static_dir` is non-empty
/// it is mounted at / for the dashboard bundle.
inline void bind_routes(httplib::Server& svr, TwinService& service, const std::string& static_dir = {}) {
  using httplib::Request;
  using httplib::Response;
  auto body_or_error = [](const Request& req, Response& res, auto&& then) {
    try {
      then(detail::parse_body(req));
    } catch (const Error& e) {
      detail::send(res, error_response(e));
    }
  };
  svr.Post("/sessions", [&service, body_or_error](const Request& req, Response& res) {
    body_or_error(req, res, [&](const json& b) { detail::send(res, service.create(b)); });
  });
  svr.Post(R"(/sessions/([^/]+)/measurements)", [&service, body_or_error](const Request& req, Response& res) {
    body_or_error(req, res, [&](const json& b) { detail::send(res, service.measure(req.matches[1], b)); });
  });
  svr.Post(R"(/sessions/([^/]+)/actions)", [&service, body_or_error](const Request& req, Response& res) {
    body_or_error(req, res, [&](const json& b) { detail::send(res, service.act(req.matches[1], b)); });
  });
  svr.Post(R"(/sessions/([^/]+)/close)", [&service](const Request& req, Response& res) {
    detail::send(res, service.close(req.matches[1]));
  });
  svr.Get(R"(/sessions/([^/]+)/whatif)", [&service](const Request& req, Response& res) {
    const std::string h = req.has_param("h_add_m") ? req.get_param_value("h_add_m") : req.get_param_value("h_add");
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(h, &used);
      if (used != h.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      detail::send(res, error_response(Error(Errc::schema_violation, "h_add_m: expected a number")));
      return;
    }
    const std::string fast = req.get_param_value("fast");
    detail::send(res, service.whatif(req.matches[1], v, fast == "true" || fast == "1"));
  });
  svr.Get(R"(/sessions/([^/]+)/recommendation)", [&service](const Request& req, Response& res) {
    detail::send(res, service.recommendation(req.matches[1]));
  });
  svr.Get(R"(/sessions/([^/]+)/log)", [&service](const Request& req, Response& res) {
    detail::send(res, service.log(req.matches[1]));
  });
  svr.Get(R"(/sessions/([^/]+))", [&service](const Request& req, Response& res) {
    detail::send(res, service.get(req.matches[1]));
  });
  if (!static_dir.empty() && !svr.set_mount_point("/", static_dir))
    throw Error(Errc::io, "cannot mount static directory " + static_dir);
}

}  // namespace pdt
