#pragma once

// Convergence certificates for asynchronous SVRG under bounded delay tau.
//
// Consistent reads:
//   c = 2 max{1/r, r eta^2 L^2} in (0,1);  rho > 1/(1-c),  rho (1 - c (1 + rho^tau) / 2) >= 1
//   B = 2 (tau+1) rho^(2 tau) eta L
//   alpha = 1 / (mu M~ eta (1 - B)) + B / (1 - B),   valid iff 1 - B > 0, 2 L eta <= 1, alpha < 1
//
// Inconsistent reads (k = 4 r eta^2 L^2, D = 1 - 1/r - k):
//   rho >= (1 + k) / D,  rho (1 - 1/r - k (tau+1) rho^tau) > 1 + k
//   c1 = 1 / (1 - 1/r - 4 r tau rho^tau eta^2 L^2)
//   c2 = (4 L eta^2 + 16 tau rho^tau L^2 eta^3) * c1
//   factor = 2 / (mu M~ (2 eta - c2)) + c2 / (2 eta - c2),   valid iff c2 < 2 eta, factor < 1
//
// By default r = 1/eta.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "asysvrg/libsvm.hpp"
#include "asysvrg/shared_state.hpp"

namespace asysvrg {

inline constexpr double kRhoMax = 1e6;

namespace cond {
inline constexpr const char* kInputsPositive = "inputs_positive";
inline constexpr const char* kCInUnitInterval = "c_in_(0,1)";
inline constexpr const char* kRhoConsistent = "rho*(1-c*(1+rho^tau)/2)>=1";
inline constexpr const char* kThm1Denominator = "1-2*(tau+1)*rho^(2*tau)*eta*L>0";
inline constexpr const char* kStepHalfInverseL = "2*L*eta<=1";
inline constexpr const char* kAlphaBelowOne = "alpha<1";
inline constexpr const char* kRGreaterOne = "r>1";
inline constexpr const char* kLemma2Denominator = "1-1/r-4*r*eta^2*L^2>0";
inline constexpr const char* kRhoInconsistent = "rho*(1-1/r-4*r*eta^2*L^2*(tau+1)*rho^tau)>1+4*r*eta^2*L^2";
inline constexpr const char* kLemma3Denominator = "1-1/r-4*r*tau*rho^tau*eta^2*L^2>0";
inline constexpr const char* kC2BelowTwoEta = "c2<2*eta";
inline constexpr const char* kFactorBelowOne = "factor<1";
inline constexpr const char* kNoAnalysis = "no_analysis_for_scheme";
}  // namespace cond

/// Outcome of a rho search: the smallest admissible rho, or the condition
/// that rules every rho out.
struct RhoSearch {
  bool feasible = false;
  double rho = std::numeric_limits<double>::quiet_NaN();
  double c = std::numeric_limits<double>::quiet_NaN();  // consistent: c; inconsistent: 4 r eta^2 L^2
  std::string violated;
};

namespace detail {

/// Smallest root of a concave h on [lo, hi] with h(lo) < 0 <= h(hi); returns
/// the end of the final bracket on the feasible side.
template <typename H>
double bisect_feasible(H&& h, double lo, double hi) {
  for (int it = 0; it < 400 && hi - lo > 4 * std::numeric_limits<double>::epsilon() * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (h(mid) >= 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

inline bool positive(double x) { return x > 0.0 && std::isfinite(x); }

}  // namespace detail

/// Smallest rho certifying the consistent-read contraction.
inline RhoSearch rho_consistent(double r, double eta, double L, unsigned tau) {
  RhoSearch out;
  if (!detail::positive(r) || !detail::positive(eta) || !detail::positive(L)) {
    out.violated = cond::kInputsPositive;
    return out;
  }
  const double c = 2.0 * std::max(1.0 / r, r * eta * eta * L * L);
  out.c = c;
  if (!(c > 0.0 && c < 1.0)) {
    out.violated = cond::kCInUnitInterval;
    return out;
  }
  const double lo = 1.0 / (1.0 - c);
  if (lo > kRhoMax) {
    out.violated = cond::kRhoConsistent;
    return out;
  }
  if (tau == 0) {
    // rho (1 - c) >= 1 is tight at the open lower bound; report the infimum.
    out.feasible = true;
    out.rho = lo;
    return out;
  }
  const double t = static_cast<double>(tau);
  auto h = [&](double rho) { return rho * (1.0 - 0.5 * c * (1.0 + std::pow(rho, t))) - 1.0; };
  const double peak = std::min(std::pow((2.0 - c) / (c * (t + 1.0)), 1.0 / t), kRhoMax);
  if (peak <= lo || h(peak) < 0.0) {
    out.violated = cond::kRhoConsistent;
    return out;
  }
  out.feasible = true;
  out.rho = detail::bisect_feasible(h, lo, peak);
  return out;
}

/// Smallest rho certifying the inconsistent-read contraction.
inline RhoSearch rho_inconsistent(double r, double eta, double L, unsigned tau) {
  RhoSearch out;
  if (!detail::positive(r) || !detail::positive(eta) || !detail::positive(L)) {
    out.violated = cond::kInputsPositive;
    return out;
  }
  if (!(r > 1.0)) {
    out.violated = cond::kRGreaterOne;
    return out;
  }
  const double k = 4.0 * r * eta * eta * L * L;
  out.c = k;
  const double D = 1.0 - 1.0 / r - k;
  if (!(D > 0.0)) {
    out.violated = cond::kLemma2Denominator;
    return out;
  }
  const double lo = (1.0 + k) / D;
  if (lo > kRhoMax) {
    out.violated = cond::kRhoInconsistent;
    return out;
  }
  if (tau == 0) {
    // The strict second condition reduces to rho > lo; report the infimum.
    out.feasible = true;
    out.rho = lo;
    return out;
  }
  const double t = static_cast<double>(tau);
  const double a = 1.0 - 1.0 / r;
  auto h = [&](double rho) { return rho * (a - k * (t + 1.0) * std::pow(rho, t)) - (1.0 + k); };
  const double peak = std::min(std::pow(a / (k * (t + 1.0) * (t + 1.0)), 1.0 / t), kRhoMax);
  if (peak <= lo || !(h(peak) > 0.0)) {
    out.violated = cond::kRhoInconsistent;
    return out;
  }
  out.feasible = true;
  out.rho = detail::bisect_feasible([&](double rho) { return h(rho) > 0.0 ? 1.0 : -1.0; }, lo, peak);
  return out;
}

/// A scalar with the conditions it failed.
struct CheckedValue {
  double value = std::numeric_limits<double>::quiet_NaN();
  bool valid = false;
  std::vector<std::string> violated;
};

/// c1 = 1 / (1 - 1/r - 4 r tau rho^tau eta^2 L^2).
inline CheckedValue c1_lemma3(double r, double eta, double L, unsigned tau, double rho) {
  CheckedValue out;
  const double den = 1.0 - 1.0 / r - 4.0 * r * tau * std::pow(rho, tau) * eta * eta * L * L;
  if (!(den > 0.0)) {
    out.violated.emplace_back(cond::kLemma3Denominator);
    return out;
  }
  out.value = 1.0 / den;
  out.valid = out.value > 1.0;
  if (!out.valid) out.violated.emplace_back(cond::kRGreaterOne);
  return out;
}

/// Per-epoch rate alpha for consistent reads.
inline CheckedValue alpha_theorem1(double mu, double m_tilde, double eta, unsigned tau, double rho, double L) {
  CheckedValue out;
  if (!detail::positive(mu) || !detail::positive(m_tilde) || !detail::positive(eta) || !detail::positive(L) ||
      !(rho >= 1.0)) {
    out.violated.emplace_back(cond::kInputsPositive);
    return out;
  }
  const double B = 2.0 * (tau + 1.0) * std::pow(rho, 2.0 * tau) * eta * L;
  const double den = 1.0 - B;
  if (!(den > 0.0)) {
    out.violated.emplace_back(cond::kThm1Denominator);
  } else {
    out.value = 1.0 / (mu * m_tilde * eta * den) + B / den;
    if (!(out.value < 1.0)) out.violated.emplace_back(cond::kAlphaBelowOne);
  }
  if (!(2.0 * L * eta <= 1.0)) out.violated.emplace_back(cond::kStepHalfInverseL);
  out.valid = out.violated.empty();
  return out;
}

struct Theorem2Rate {
  CheckedValue factor;
  double c1 = std::numeric_limits<double>::quiet_NaN();
  double c2 = std::numeric_limits<double>::quiet_NaN();
};

/// Per-epoch rate factor for inconsistent reads.
inline Theorem2Rate factor_theorem2(double mu, double m_tilde, double eta, double r, double L, unsigned tau,
                                    double rho) {
  Theorem2Rate out;
  auto& f = out.factor;
  if (!detail::positive(mu) || !detail::positive(m_tilde) || !detail::positive(eta) || !detail::positive(L) ||
      !detail::positive(r) || !(rho >= 1.0)) {
    f.violated.emplace_back(cond::kInputsPositive);
    return out;
  }
  const double rho_tau = std::pow(rho, tau);
  const double den = 1.0 - 1.0 / r - 4.0 * r * tau * rho_tau * eta * eta * L * L;
  if (!(den > 0.0)) {
    f.violated.emplace_back(cond::kLemma3Denominator);
    return out;
  }
  out.c1 = 1.0 / den;
  out.c2 = (4.0 * L * eta * eta + 16.0 * tau * rho_tau * L * L * eta * eta * eta) / den;
  const double margin = 2.0 * eta - out.c2;
  if (!(margin > 0.0)) {
    f.violated.emplace_back(cond::kC2BelowTwoEta);
    return out;
  }
  f.value = 2.0 / (mu * m_tilde * margin) + out.c2 / margin;
  if (!(f.value < 1.0)) f.violated.emplace_back(cond::kFactorBelowOne);
  f.valid = f.violated.empty();
  return out;
}

struct ConvergenceCertificate {
  Scheme scheme = Scheme::ConsistentLock;
  double L = 0.0, mu = 0.0, eta = 0.0, r = 0.0, m_tilde = 0.0;
  unsigned tau = 0;
  double c = std::numeric_limits<double>::quiet_NaN();
  double rho = std::numeric_limits<double>::quiet_NaN();
  double c1 = std::numeric_limits<double>::quiet_NaN();
  double c2 = std::numeric_limits<double>::quiet_NaN();
  double alpha = std::numeric_limits<double>::quiet_NaN();
  bool valid = false;
  std::vector<std::string> violated;

  bool has(const std::string& condition) const {
    return std::find(violated.begin(), violated.end(), condition) != violated.end();
  }

  /// Flat key=value block, one pair per line, fixed key order.
  std::string serialize() const {
    auto num = [](double x) { return std::isnan(x) ? std::string("nan") : detail::format_real(x); };
    std::ostringstream out;
    out << "scheme=" << to_string(scheme) << '\n'
        << "L=" << num(L) << '\n'
        << "mu=" << num(mu) << '\n'
        << "eta=" << num(eta) << '\n'
        << "r=" << num(r) << '\n'
        << "tau=" << tau << '\n'
        << "m_tilde=" << num(m_tilde) << '\n'
        << "c=" << num(c) << '\n'
        << "rho=" << num(rho) << '\n'
        << "c1=" << num(c1) << '\n'
        << "c2=" << num(c2) << '\n'
        << "alpha=" << num(alpha) << '\n'
        << "valid=" << (valid ? "true" : "false") << '\n'
        << "violated=";
    for (std::size_t k = 0; k < violated.size(); ++k) out << (k ? ";" : "") << violated[k];
    out << '\n';
    return out.str();
  }

  static ConvergenceCertificate parse(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto num = [&](const char* key) {
      const auto& s = kv.at(key);
      return s == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
    };
    ConvergenceCertificate c;
    c.scheme = parse_scheme(kv.at("scheme"));
    c.L = num("L");
    c.mu = num("mu");
    c.eta = num("eta");
    c.r = num("r");
    c.tau = static_cast<unsigned>(std::stoul(kv.at("tau")));
    c.m_tilde = num("m_tilde");
    c.c = num("c");
    c.rho = num("rho");
    c.c1 = num("c1");
    c.c2 = num("c2");
    c.alpha = num("alpha");
    c.valid = kv.at("valid") == "true";
    std::istringstream vs(kv.at("violated"));
    std::string item;
    while (std::getline(vs, item, ';'))
      if (!item.empty()) c.violated.push_back(item);
    return c;
  }
};

/// Certificate for (scheme, L, mu, eta, tau, M~); r defaults to 1/eta.
inline ConvergenceCertificate certify(Scheme scheme, double L, double mu, double eta, unsigned tau, double m_tilde,
                                      std::optional<double> r = std::nullopt) {
  ConvergenceCertificate cert;
  cert.scheme = scheme;
  cert.L = L;
  cert.mu = mu;
  cert.eta = eta;
  cert.tau = tau;
  cert.m_tilde = m_tilde;
  cert.r = r.value_or(1.0 / eta);
  if (scheme == Scheme::LockFree) {
    cert.violated.emplace_back(cond::kNoAnalysis);
    return cert;
  }
  if (scheme == Scheme::ConsistentLock) {
    const auto rho = rho_consistent(cert.r, eta, L, tau);
    cert.c = rho.c;
    if (!rho.feasible) {
      cert.violated.push_back(rho.violated);
      return cert;
    }
    cert.rho = rho.rho;
    const auto a = alpha_theorem1(mu, m_tilde, eta, tau, rho.rho, L);
    cert.alpha = a.value;
    cert.violated = a.violated;
  } else {
    const auto rho = rho_inconsistent(cert.r, eta, L, tau);
    cert.c = rho.c;
    if (!rho.feasible) {
      cert.violated.push_back(rho.violated);
      return cert;
    }
    cert.rho = rho.rho;
    const auto rate = factor_theorem2(mu, m_tilde, eta, cert.r, L, tau, rho.rho);
    cert.c1 = rate.c1;
    cert.c2 = rate.c2;
    cert.alpha = rate.factor.value;
    cert.violated = rate.factor.violated;
  }
  cert.valid = cert.violated.empty();
  return cert;
}

/// Largest eta (with r = 1/eta) whose certificate is valid, or nullopt when
/// no eta in [1e-15, 1/(2L)] is certified. A log grid locates the valid
/// region; bisection then resolves its upper edge to machine precision.
inline std::optional<double> max_certified_step(double L, double mu, unsigned tau, double m_tilde, Scheme scheme) {
  if (!detail::positive(L) || !detail::positive(mu) || !detail::positive(m_tilde))
    throw std::invalid_argument("max_certified_step: L, mu and M~ must be positive");
  if (scheme == Scheme::LockFree) throw std::invalid_argument("max_certified_step: no analysis for the lock-free scheme");
  auto ok = [&](double eta) { return certify(scheme, L, mu, eta, tau, m_tilde).valid; };
  const double top = 0.5 / L;
  const double floor = 1e-15;
  constexpr int kGrid = 3000;
  const double log_lo = std::log(floor), log_hi = std::log(top);
  int last_valid = -1;
  for (int k = 0; k <= kGrid; ++k) {
    const double eta = k == kGrid ? top : std::exp(log_lo + (log_hi - log_lo) * k / kGrid);
    if (ok(eta)) last_valid = k;
  }
  if (last_valid < 0) return std::nullopt;
  auto grid = [&](int k) { return k == kGrid ? top : std::exp(log_lo + (log_hi - log_lo) * k / kGrid); };
  if (last_valid == kGrid) return top;
  double lo = grid(last_valid), hi = grid(last_valid + 1);
  for (int it = 0; it < 200 && hi - lo > 2 * std::numeric_limits<double>::epsilon() * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (ok(mid))
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

}  // namespace asysvrg
