#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "asysvrg/libsvm.hpp"
#include "asysvrg/model.hpp"
#include "asysvrg/rng.hpp"

namespace asysvrg {

/// Parameters of a generated problem. Serialized as `key=value` lines.
struct SyntheticSpec {
  std::size_t n = 1000;
  std::size_t d = 20;
  std::uint64_t seed = 1;
  /// Scale applied to the planted margin before the logistic label noise.
  /// Infinity disables noise: y = sign(x^T w_planted).
  double separation = 4.0;

  std::string to_header() const {
    std::ostringstream out;
    out << "generator=planted-logistic\n"
        << "n=" << n << "\n"
        << "d=" << d << "\n"
        << "seed=" << seed << "\n"
        << "separation=" << (std::isinf(separation) ? std::string("inf") : detail::format_real(separation))
        << "\n"
        << "rows=l2-normalized\n";
    return out.str();
  }

  static SyntheticSpec from_header(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line[0] == '#') line.erase(0, 1);
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    SyntheticSpec spec;
    try {
      spec.n = std::stoull(kv.at("n"));
      spec.d = std::stoull(kv.at("d"));
      spec.seed = std::stoull(kv.at("seed"));
      const auto& sep = kv.at("separation");
      spec.separation = sep == "inf" ? std::numeric_limits<double>::infinity() : std::stod(sep);
    } catch (const std::exception& e) {
      throw std::invalid_argument(std::string("bad synthetic descriptor: ") + e.what());
    }
    return spec;
  }
};

/// The planted weight vector (unit norm) used by generate_synthetic.
inline ParamVector planted_weights(const SyntheticSpec& spec) {
  Rng rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ParamVector w(spec.d);
  double norm = 0.0;
  for (auto& x : w) {
    x = gauss(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : w) x /= norm;
  return w;
}

/// Dense Gaussian rows normalized to unit L2 norm; labels drawn from a
/// logistic model around the planted direction. Deterministic in `seed`.
inline Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n == 0 || spec.d == 0) throw std::invalid_argument("generate_synthetic: n and d must be >= 1");
  const ParamVector w = planted_weights(spec);
  Rng rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<SparseExample> rows;
  rows.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    SparseExample ex;
    ex.indices.resize(spec.d);
    ex.values.resize(spec.d);
    double norm = 0.0;
    for (std::size_t j = 0; j < spec.d; ++j) {
      ex.indices[j] = static_cast<std::uint32_t>(j);
      ex.values[j] = gauss(rng);
      norm += ex.values[j] * ex.values[j];
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      ex.values[0] = 1.0;
      norm = 1.0;
    }
    for (auto& v : ex.values) v /= norm;

    const double m = margin(ex, w);
    const double u = unif(rng);
    if (std::isinf(spec.separation))
      ex.label = m >= 0.0 ? 1 : -1;
    else
      ex.label = u < sigmoid(spec.separation * m) ? 1 : -1;
    rows.push_back(std::move(ex));
  }
  return Dataset(std::move(rows), spec.d);
}

inline Dataset generate_synthetic(std::size_t n, std::size_t d, std::uint64_t seed, double separation) {
  return generate_synthetic(SyntheticSpec{n, d, seed, separation});
}

}  // namespace asysvrg
