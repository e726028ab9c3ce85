#pragma once

// Test-only reference computations. Nothing here calls the library's
// numerical routines; each oracle re-derives its value from first principles.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "asysvrg/model.hpp"

namespace oracle {

using asysvrg::Dataset;
using asysvrg::SparseExample;

/// Dense copy of a sparse row.
inline std::vector<double> densify(const SparseExample& ex, std::size_t d) {
  std::vector<double> x(d, 0.0);
  for (std::size_t k = 0; k < ex.indices.size(); ++k) x[ex.indices[k]] = ex.values[k];
  return x;
}

/// f_i(w) via a dense scalar loop, long double throughout.
inline long double instance_loss(const SparseExample& ex, const std::vector<double>& w, double lambda) {
  const auto x = densify(ex, w.size());
  long double m = 0.0L, nrm = 0.0L;
  for (std::size_t j = 0; j < w.size(); ++j) {
    m += static_cast<long double>(x[j]) * w[j];
    nrm += static_cast<long double>(w[j]) * w[j];
  }
  const long double z = -static_cast<long double>(ex.label) * m;
  const long double sp = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return sp + 0.5L * lambda * nrm;
}

inline long double objective(const Dataset& data, const std::vector<double>& w, double lambda) {
  long double s = 0.0L;
  for (const auto& ex : data.examples()) s += instance_loss(ex, w, 0.0);
  long double nrm = 0.0L;
  for (double x : w) nrm += static_cast<long double>(x) * x;
  return s / data.size() + 0.5L * lambda * nrm;
}

/// Central differences of f_i with step h.
inline std::vector<double> fd_gradient(const SparseExample& ex, std::vector<double> w, double lambda, double h) {
  std::vector<double> g(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double keep = w[j];
    w[j] = keep + h;
    const long double fp = instance_loss(ex, w, lambda);
    w[j] = keep - h;
    const long double fm = instance_loss(ex, w, lambda);
    w[j] = keep;
    g[j] = static_cast<double>((fp - fm) / (2.0L * h));
  }
  return g;
}

/// Dense closed-form gradient of the whole objective in long double.
inline std::vector<long double> full_gradient(const Dataset& data, const std::vector<double>& w, double lambda) {
  const std::size_t d = w.size();
  std::vector<long double> g(d, 0.0L);
  for (const auto& ex : data.examples()) {
    const auto x = densify(ex, d);
    long double m = 0.0L;
    for (std::size_t j = 0; j < d; ++j) m += static_cast<long double>(x[j]) * w[j];
    const long double y = ex.label;
    const long double s = -y / (1.0L + std::exp(y * m));
    for (std::size_t j = 0; j < d; ++j) g[j] += s * x[j];
  }
  for (std::size_t j = 0; j < d; ++j) g[j] = g[j] / data.size() + lambda * w[j];
  return g;
}

inline SparseExample random_example(std::size_t d, std::mt19937_64& rng, double density = 0.6) {
  std::uniform_real_distribution<double> val(-1.5, 1.5);
  std::bernoulli_distribution keep(density), sign(0.5);
  SparseExample ex;
  for (std::size_t j = 0; j < d; ++j)
    if (keep(rng)) {
      ex.indices.push_back(static_cast<std::uint32_t>(j));
      ex.values.push_back(val(rng));
    }
  ex.label = sign(rng) ? 1 : -1;
  return ex;
}

inline std::vector<double> random_vector(std::size_t d, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> w(d);
  for (auto& x : w) x = g(rng);
  return w;
}

/// Smallest rho on a uniform grid (spacing `step`) above `lo` with pred(rho).
template <typename Pred>
double grid_first(double lo, double hi, double step, Pred&& pred) {
  for (long k = 1;; ++k) {
    const double rho = lo + step * static_cast<double>(k);
    if (rho > hi) return std::nan("");
    if (pred(rho)) return rho;
  }
}

}  // namespace oracle
