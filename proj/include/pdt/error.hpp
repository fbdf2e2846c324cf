#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pdt {

enum class Errc {
  invalid_argument,
  insufficient_data,
  degenerate_data,
  non_positive_sample,
  inconsistent_priors,
  invalid_geometry,
  stress_range_exceeded,
  continuity_unsolvable,
  degenerate_update,
  undefined_cov,
  unsupported_action,
  optimization_failed,
  schema_violation,
  unit_mismatch,
  out_of_order,
  tamper,
  io,
  invalid_state,
  session_closed,
  not_found,
};

constexpr std::string_view errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::insufficient_data: return "insufficient-data";
    case Errc::degenerate_data: return "degenerate-data";
    case Errc::non_positive_sample: return "non-positive-sample";
    case Errc::inconsistent_priors: return "inconsistent-priors";
    case Errc::invalid_geometry: return "invalid-geometry";
    case Errc::stress_range_exceeded: return "stress-range-exceeded";
    case Errc::continuity_unsolvable: return "continuity-unsolvable";
    case Errc::degenerate_update: return "degenerate-update";
    case Errc::undefined_cov: return "undefined-cov";
    case Errc::unsupported_action: return "unsupported-action";
    case Errc::optimization_failed: return "optimization-failed";
    case Errc::schema_violation: return "schema-violation";
    case Errc::unit_mismatch: return "unit-mismatch";
    case Errc::out_of_order: return "out-of-order";
    case Errc::tamper: return "tamper";
    case Errc::io: return "io";
    case Errc::invalid_state: return "invalid-state";
    case Errc::session_closed: return "session-closed";
    case Errc::not_found: return "not-found";
  }
  return "unknown";
}

/// Errors that originate from user-supplied configuration rather than from
/// the numerics. The CLI maps these to exit code 2.
constexpr bool is_config_error(Errc c) noexcept {
  switch (c) {
    case Errc::insufficient_data:
    case Errc::degenerate_data:
    case Errc::non_positive_sample:
    case Errc::inconsistent_priors:
    case Errc::invalid_geometry:
    case Errc::schema_violation:
    case Errc::unit_mismatch:
    case Errc::tamper:
    case Errc::io:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Raised when every particle likelihood underflows; carries the largest
/// log-likelihood seen so callers can report how far off the measurement was.
class DegenerateUpdateError : public Error {
 public:
  DegenerateUpdateError(double max_log_likelihood, const std::string& what)
      : Error(Errc::degenerate_update, what), max_log_likelihood_(max_log_likelihood) {}

  double max_log_likelihood() const noexcept { return max_log_likelihood_; }

 private:
  double max_log_likelihood_;
};

}  // namespace pdt
