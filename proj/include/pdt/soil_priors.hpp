#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pdt/error.hpp"
#include "pdt/random.hpp"

namespace pdt {

enum class SoilParam : std::size_t { sigma_L, sigma_c, gamma_cl, gamma_emb, M0, ML, wN, cv, ch };

inline constexpr std::size_t kSoilParamCount = 9;

inline constexpr std::array<SoilParam, kSoilParamCount> kSoilParams = {
    SoilParam::sigma_L, SoilParam::sigma_c, SoilParam::gamma_cl, SoilParam::gamma_emb, SoilParam::M0,
    SoilParam::ML,      SoilParam::wN,      SoilParam::cv,       SoilParam::ch};

constexpr std::string_view param_name(SoilParam p) noexcept {
  constexpr std::array<std::string_view, kSoilParamCount> names = {
      "sigma_L", "sigma_c", "gamma_cl", "gamma_emb", "M0", "ML", "wN", "cv", "ch"};
  return names[static_cast<std::size_t>(p)];
}

/// Canonical unit of each parameter after scenario normalization.
constexpr std::string_view param_unit(SoilParam p) noexcept {
  constexpr std::array<std::string_view, kSoilParamCount> units = {
      "kPa", "kPa", "kN/m3", "kN/m3", "kPa", "kPa", "-", "m2/year", "m2/year"};
  return units[static_cast<std::size_t>(p)];
}

/// Lognormal distribution parameterized in log space. There is no default
/// state: every instance satisfies log_std > 0.
class LognormalDist {
 public:
  LognormalDist(double log_mean, double log_std, std::string unit)
      : log_mean_(log_mean), log_std_(log_std), unit_(std::move(unit)) {
    if (!std::isfinite(log_mean_)) throw Error(Errc::invalid_argument, "lognormal log_mean must be finite");
    if (!(log_std_ > 0.0) || !std::isfinite(log_std_))
      throw Error(Errc::degenerate_data, "lognormal log_std must be positive and finite");
  }

  double log_mean() const noexcept { return log_mean_; }
  double log_std() const noexcept { return log_std_; }
  const std::string& unit() const noexcept { return unit_; }

  double mean() const noexcept { return std::exp(log_mean_ + 0.5 * log_std_ * log_std_); }
  double variance() const noexcept {
    const double s2 = log_std_ * log_std_;
    return std::expm1(s2) * std::exp(2.0 * log_mean_ + s2);
  }
  double cov() const noexcept { return std::sqrt(std::expm1(log_std_ * log_std_)); }
  double median() const noexcept { return std::exp(log_mean_); }

  double pdf(double x) const noexcept {
    if (x <= 0.0) return 0.0;
    const double z = (std::log(x) - log_mean_) / log_std_;
    return std::exp(-0.5 * z * z) / (x * log_std_ * std::sqrt(2.0 * std::numbers::pi));
  }

  template <class URBG>
  double sample(URBG& rng) const {
    std::normal_distribution<double> n(0.0, 1.0);
    return std::exp(log_mean_ + log_std_ * n(rng));
  }

  friend bool operator==(const LognormalDist&, const LognormalDist&) = default;

 private:
  double log_mean_;
  double log_std_;
  std::string unit_;
};

/// Plug-in maximum-likelihood fit in log space (sample standard deviation with
/// the n-1 denominator). With predictive_inflation the log-std is widened by
/// sqrt(1 + 1/n) to account for the uncertainty of the fitted mean.
inline LognormalDist fit_lognormal(std::span<const double> samples, std::string unit = "",
                                   bool predictive_inflation = false) {
  if (samples.size() < 2)
    throw Error(Errc::insufficient_data,
                "need at least 2 samples, got " + std::to_string(samples.size()));
  std::vector<double> logs;
  logs.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!(samples[i] > 0.0) || !std::isfinite(samples[i]))
      throw Error(Errc::non_positive_sample, "sample " + std::to_string(i) + " is not positive");
    logs.push_back(std::log(samples[i]));
  }
  const double n = static_cast<double>(logs.size());
  const double mean = pairwise_sum(logs) / n;
  std::vector<double> sq(logs.size());
  for (std::size_t i = 0; i < logs.size(); ++i) sq[i] = (logs[i] - mean) * (logs[i] - mean);
  double sd = std::sqrt(pairwise_sum(sq) / (n - 1.0));
  if (predictive_inflation) sd *= std::sqrt(1.0 + 1.0 / n);
  if (!(sd > 0.0)) throw Error(Errc::degenerate_data, "all samples identical; log_std would be 0");
  return LognormalDist(mean, sd, std::move(unit));
}

/// Lognormal with the given arithmetic mean and coefficient of variation.
inline LognormalDist from_moments(double mean, double cov, std::string unit = "") {
  if (!(mean > 0.0) || !(cov > 0.0))
    throw Error(Errc::invalid_argument, "from_moments requires mean > 0 and cov > 0");
  const double s2 = std::log1p(cov * cov);
  return LognormalDist(std::log(mean) - 0.5 * s2, std::sqrt(s2), std::move(unit));
}

/// Prior over the hidden soil state. All nine members must be supplied;
/// LognormalDist has no default so an incomplete initializer does not compile.
struct SoilPriorSet {
  LognormalDist sigma_L;
  LognormalDist sigma_c;
  LognormalDist gamma_cl;
  LognormalDist gamma_emb;
  LognormalDist M0;
  LognormalDist ML;
  LognormalDist wN;
  LognormalDist cv;
  LognormalDist ch;

  const LognormalDist& operator[](SoilParam p) const noexcept {
    switch (p) {
      case SoilParam::sigma_L: return sigma_L;
      case SoilParam::sigma_c: return sigma_c;
      case SoilParam::gamma_cl: return gamma_cl;
      case SoilParam::gamma_emb: return gamma_emb;
      case SoilParam::M0: return M0;
      case SoilParam::ML: return ML;
      case SoilParam::wN: return wN;
      case SoilParam::cv: return cv;
      case SoilParam::ch: return ch;
    }
    return ch;
  }
};

/// One realization of the soil state. Stresses and moduli in kPa, unit
/// weights in kN/m3, consolidation coefficients in m2/year. wN is carried
/// but not consumed by the consolidation model.
struct SoilSample {
  double sigma_L = 0.0;
  double sigma_c = 0.0;
  double gamma_cl = 0.0;
  double gamma_emb = 0.0;
  double M0 = 0.0;
  double ML = 0.0;
  double wN = 0.0;
  double cv = 0.0;
  double ch = 0.0;

  double& operator[](SoilParam p) noexcept {
    switch (p) {
      case SoilParam::sigma_L: return sigma_L;
      case SoilParam::sigma_c: return sigma_c;
      case SoilParam::gamma_cl: return gamma_cl;
      case SoilParam::gamma_emb: return gamma_emb;
      case SoilParam::M0: return M0;
      case SoilParam::ML: return ML;
      case SoilParam::wN: return wN;
      case SoilParam::cv: return cv;
      case SoilParam::ch: return ch;
    }
    return ch;
  }
  double operator[](SoilParam p) const noexcept { return const_cast<SoilSample&>(*this)[p]; }

  friend bool operator==(const SoilSample&, const SoilSample&) = default;
};

/// Extra acceptance test applied on top of sigma_c <= sigma_L.
using SoilAdmissibility = std::function<bool(const SoilSample&)>;

inline constexpr std::size_t kRejectionWindow = 1'000'000;

/// Draws n samples with independent marginals, rejecting any draw with
/// sigma_c > sigma_L or failing `admissible`.
inline std::vector<SoilSample> sample_soil(const SoilPriorSet& priors, Rng& rng, std::size_t n,
                                           const SoilAdmissibility& admissible = {}) {
  if (n == 0) throw Error(Errc::invalid_argument, "sample_soil requires n >= 1");
  std::vector<SoilSample> out;
  out.reserve(n);
  std::size_t attempts = 0;
  std::size_t accepted = 0;
  while (out.size() < n) {
    SoilSample s;
    for (SoilParam p : kSoilParams) s[p] = priors[p].sample(rng);
    ++attempts;
    if (s.sigma_c <= s.sigma_L && (!admissible || admissible(s))) {
      out.push_back(s);
      ++accepted;
    }
    if (attempts >= kRejectionWindow && accepted * 100 < attempts)
      throw Error(Errc::inconsistent_priors,
                  "rejection rate above 99% after " + std::to_string(attempts) + " attempts");
  }
  return out;
}

inline std::vector<SoilSample> sample_soil(const SoilPriorSet& priors, std::uint64_t seed, std::size_t n,
                                           const SoilAdmissibility& admissible = {}) {
  Rng rng = make_stream(seed, "soil");
  return sample_soil(priors, rng, n, admissible);
}

}  // namespace pdt
