#pragma once

// L2-regularized logistic regression: objective, per-instance gradients and
// the variance-reduced update direction used by every solver in this library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace asysvrg {

using ParamVector = std::vector<double>;

/// One labeled instance: sparse features (0-based, strictly increasing ids)
/// and a label in {+1, -1}.
struct SparseExample {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  int label = 1;

  bool operator==(const SparseExample&) const = default;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Immutable training set. Construction validates every example against `dim`.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::vector<SparseExample> examples, std::size_t dim)
      : examples_(std::move(examples)), dim_(dim) {
    if (examples_.empty()) throw std::invalid_argument("dataset must contain at least one example");
    if (dim_ == 0) throw std::invalid_argument("dataset dimension must be >= 1");
    for (std::size_t i = 0; i < examples_.size(); ++i) validate(examples_[i], i);
  }

  std::size_t size() const noexcept { return examples_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const SparseExample& operator[](std::size_t i) const { return examples_[i]; }
  const std::vector<SparseExample>& examples() const noexcept { return examples_; }

  bool operator==(const Dataset&) const = default;

 private:
  void validate(const SparseExample& ex, std::size_t row) const {
    const auto where = " (example " + std::to_string(row) + ")";
    if (ex.label != 1 && ex.label != -1) throw std::invalid_argument("label must be +1 or -1" + where);
    if (ex.indices.size() != ex.values.size())
      throw std::invalid_argument("indices/values length mismatch" + where);
    for (std::size_t k = 0; k < ex.indices.size(); ++k) {
      if (k > 0 && ex.indices[k] <= ex.indices[k - 1])
        throw std::invalid_argument("feature indices must be strictly increasing" + where);
      if (ex.indices[k] >= dim_) throw DimensionError("feature index exceeds dimension" + where);
      if (!std::isfinite(ex.values[k])) throw std::invalid_argument("non-finite feature value" + where);
    }
  }

  std::vector<SparseExample> examples_;
  std::size_t dim_ = 0;
};

/// Smoothness bound L, strong convexity mu and the regularizer they came from.
struct LossConstants {
  double smoothness = 0.0;
  double strong_convexity = 0.0;
  double regularizer = 0.0;
};

namespace detail {

inline void require_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want)
    throw DimensionError(std::string(what) + ": dimension " + std::to_string(got) + " != " +
                         std::to_string(want));
}

}  // namespace detail

/// log(1 + e^z) without overflow.
inline double softplus(double z) noexcept {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

/// Logistic sigmoid 1 / (1 + e^-z), evaluated on the stable branch.
inline double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// x^T w over the nonzeros of x, index-ascending.
template <typename Vec>
inline double margin(const SparseExample& ex, const Vec& w) {
  double s = 0.0;
  for (std::size_t k = 0; k < ex.indices.size(); ++k) s += ex.values[k] * w[ex.indices[k]];
  return s;
}

/// Scalar factor of the logistic part of the gradient: d/dm log(1 + e^{-y m}).
inline double loss_derivative(const SparseExample& ex, double m) noexcept {
  const double y = static_cast<double>(ex.label);
  return -y * sigmoid(-y * m);
}

inline double squared_norm(std::span<const double> v) noexcept {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

inline double squared_norm(const SparseExample& ex) noexcept { return squared_norm(ex.values); }

/// f_i(w) = log(1 + exp(-y x^T w)) + (lambda/2)||w||^2
inline double instance_loss(const SparseExample& ex, std::span<const double> w, double lambda) {
  const double y = static_cast<double>(ex.label);
  return softplus(-y * margin(ex, w)) + 0.5 * lambda * squared_norm(w);
}

/// f(w) = (1/n) sum_i log(1 + exp(-y_i x_i^T w)) + (lambda/2)||w||^2
inline double objective(const Dataset& data, std::span<const double> w, double lambda) {
  detail::require_dim(w.size(), data.dim(), "objective");
  if (!(lambda >= 0.0)) throw std::invalid_argument("objective: lambda must be >= 0");
  double loss = 0.0;
  for (const auto& ex : data.examples()) {
    const double y = static_cast<double>(ex.label);
    loss += softplus(-y * margin(ex, w));
  }
  const double f = loss / static_cast<double>(data.size()) + 0.5 * lambda * squared_norm(w);
  if (!std::isfinite(f)) throw std::runtime_error("objective: non-finite value");
  return f;
}

/// Dense gradient of f_i at w written into `out`.
template <typename Vec>
inline void grad_component_into(const SparseExample& ex, const Vec& w, double lambda, std::span<double> out) {
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = lambda * w[j];
  const double s = loss_derivative(ex, margin(ex, w));
  for (std::size_t k = 0; k < ex.indices.size(); ++k) out[ex.indices[k]] += s * ex.values[k];
}

/// Dense gradient of f_i at w.
inline ParamVector grad_component(const SparseExample& ex, std::span<const double> w, double lambda) {
  if (!ex.indices.empty() && ex.indices.back() >= w.size())
    throw DimensionError("grad_component: feature index exceeds dimension");
  ParamVector g(w.size());
  grad_component_into(ex, w, lambda, g);
  return g;
}

/// Sum over `rows` of the unregularized gradients, plus the per-row scalar
/// loss derivatives. Summation runs in the order given.
inline void accumulate_loss_gradient(const Dataset& data, std::span<const double> w,
                                     std::span<const std::size_t> rows, std::span<double> sum,
                                     std::span<double> derivatives) {
  for (std::size_t r : rows) {
    const auto& ex = data[r];
    const double s = loss_derivative(ex, margin(ex, w));
    if (!derivatives.empty()) derivatives[r] = s;
    for (std::size_t k = 0; k < ex.indices.size(); ++k) sum[ex.indices[k]] += s * ex.values[k];
  }
}

/// Turns the merged partial sums into (1/n) sum_i grad f_i(w).
inline ParamVector finish_full_gradient(const Dataset& data, std::span<const double> w, double lambda,
                                        ParamVector loss_sum) {
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (std::size_t j = 0; j < loss_sum.size(); ++j) loss_sum[j] = loss_sum[j] * inv_n + lambda * w[j];
  return loss_sum;
}

/// Average gradient over all n instances. When `partition` is given, it
/// must be a disjoint cover of {0..n-1}; per-block partial sums are merged in
/// block order. Optional `derivatives` (length n) receives each row's scalar
/// loss derivative at w.
inline ParamVector full_gradient(const Dataset& data, std::span<const double> w, double lambda,
                                 const std::vector<std::vector<std::size_t>>* partition = nullptr,
                                 std::span<double> derivatives = {}) {
  detail::require_dim(w.size(), data.dim(), "full_gradient");
  const std::size_t n = data.size();
  if (!derivatives.empty()) detail::require_dim(derivatives.size(), n, "full_gradient derivatives");

  std::vector<std::vector<std::size_t>> single;
  if (partition == nullptr) {
    single.emplace_back(n);
    for (std::size_t i = 0; i < n; ++i) single[0][i] = i;
    partition = &single;
  } else {
    std::vector<char> seen(n, 0);
    std::size_t count = 0;
    for (const auto& block : *partition)
      for (std::size_t i : block) {
        if (i >= n) throw std::invalid_argument("full_gradient: partition index out of range");
        if (seen[i]) throw std::invalid_argument("full_gradient: partition blocks overlap");
        seen[i] = 1;
        ++count;
      }
    if (count != n) throw std::invalid_argument("full_gradient: partition does not cover all instances");
  }

  ParamVector total(w.size(), 0.0);
  ParamVector partial(w.size());
  for (const auto& block : *partition) {
    std::fill(partial.begin(), partial.end(), 0.0);
    accumulate_loss_gradient(data, w, block, partial, derivatives);
    for (std::size_t j = 0; j < total.size(); ++j) total[j] += partial[j];
  }
  return finish_full_gradient(data, w, lambda, std::move(total));
}

/// v = grad f_i(u_read) - grad f_i(u0) + g0, using the precomputed scalar
/// derivative of row i at u0. The dense terms are combined as
/// g0 + lambda (u_read - u0) so that u_read == u0 yields g0 bit for bit.
template <typename ReadVec>
inline void vr_update_into(const SparseExample& ex, const ReadVec& u_read, std::span<const double> u0,
                           double derivative_at_u0, std::span<const double> g0, double lambda,
                           std::span<double> out) {
  const std::size_t d = out.size();
  for (std::size_t j = 0; j < d; ++j) out[j] = g0[j] + lambda * (u_read[j] - u0[j]);
  const double coef = loss_derivative(ex, margin(ex, u_read)) - derivative_at_u0;
  for (std::size_t k = 0; k < ex.indices.size(); ++k) out[ex.indices[k]] += coef * ex.values[k];
}

/// Variance-reduced update vector for instance i.
inline ParamVector vr_update_vector(const Dataset& data, std::size_t i, std::span<const double> u_read,
                                    std::span<const double> u0, std::span<const double> g0, double lambda) {
  const std::size_t d = data.dim();
  detail::require_dim(u_read.size(), d, "vr_update_vector u_read");
  detail::require_dim(u0.size(), d, "vr_update_vector u0");
  detail::require_dim(g0.size(), d, "vr_update_vector g0");
  if (i >= data.size()) throw std::out_of_range("vr_update_vector: instance index out of range");
  const auto& ex = data[i];
  ParamVector v(d);
  vr_update_into(ex, u_read, u0, loss_derivative(ex, margin(ex, u0)), g0, lambda, v);
  return v;
}

/// L = max_i ||x_i||^2 / 4 + lambda, a per-instance smoothness bound.
inline double smoothness_constant(const Dataset& data, double lambda) {
  double max_sq = 0.0;
  for (const auto& ex : data.examples()) max_sq = std::max(max_sq, squared_norm(ex));
  return 0.25 * max_sq + lambda;
}

/// mu = lambda. The logistic part is only convex, so lambda must be positive.
inline double strong_convexity_constant(double lambda) {
  if (!(lambda > 0.0))
    throw std::invalid_argument("strong_convexity_constant: lambda must be > 0 for a strongly convex objective");
  return lambda;
}

inline LossConstants loss_constants(const Dataset& data, double lambda) {
  return {smoothness_constant(data, lambda), strong_convexity_constant(lambda), lambda};
}

inline bool all_finite(std::span<const double> v) noexcept {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace asysvrg
