#pragma once

#include "demix/binning.hpp"
#include "demix/common.hpp"
#include "demix/random.hpp"

#include <cstdint>
#include <vector>

namespace demix {

/// (1 - |x/a|^beta) on |x| < a, zero elsewhere.
double bump(double x, double beta, double a);

/// Closed-form integral of bump over (-inf, x].
double bump_cdf(double x, double beta, double a);

/// The K synthetic bases g_k = g~_k / Z_k with
///   g~_k(x) = 3 bump(x; 12) + 2 bump(x - a_k; 1) + 2 bump(x + a_k; 1),
/// a_k = 11 + 2k for k = 1..K (indices here are 0-based, so a = 13 + 2k).
/// Every component has a tabulated CDF for inverse-CDF sampling.
class BumpDensities {
 public:
  BumpDensities(Index components, double beta, Index cdf_knots = 100000);

  Index component_count() const { return components_; }
  double beta() const { return beta_; }
  double center(Index k) const { return 13.0 + 2.0 * static_cast<double>(k); }
  double normalizer(Index k) const { return normalizers_[k]; }

  /// Half-width of the union of all supports, a_K + 1.
  double support_bound() const { return center(components_ - 1) + 1.0; }

  double unnormalized(Index k, double x) const;
  double density(Index k, double x) const { return unnormalized(k, x) / normalizers_[k]; }

  /// Exact CDF from the closed-form bump integrals.
  double cdf(Index k, double x) const;

  /// Inverse of the tabulated CDF with linear interpolation.
  double quantile(Index k, double u) const;
  double sample(Index k, Rng& rng) const { return quantile(k, rng.uniform_open()); }

  /// K x G matrix of g_k at the grid nodes.
  Matrix evaluate(const Vector& grid) const;

 private:
  Index components_;
  double beta_;
  Vector normalizers_;
  std::vector<std::vector<double>> knots_;
  std::vector<std::vector<double>> table_;
};

/// Rows softmax(Z_i / tau), Z_i ~ N(0, I_K).
Matrix sample_memberships(Index groups, Index components, double tau, std::uint64_t seed);

/// N points per group: component k ~ Categorical(pi_i), then X ~ g_k.
GroupedSample sample_dataset(const Matrix& memberships, const BumpDensities& densities, Index points_per_group,
                             std::uint64_t seed);

/// Equally spaced nodes on [lo, hi].
Vector linspace(double lo, double hi, Index count);

/// Trapezoid integral of (estimate - truth)^2 over the grid.
double ise(const Eigen::Ref<const Vector>& estimate, const Eigen::Ref<const Vector>& truth,
           const Eigen::Ref<const Vector>& grid);

/// permutation[k] is the estimated component matched to true component k,
/// minimizing the summed ISE. Exhaustive up to K = 8, greedy above.
std::vector<Index> align_components(const Matrix& estimate, const Matrix& truth, const Vector& grid);

/// Summed ISE of an alignment.
double alignment_cost(const Matrix& estimate, const Matrix& truth, const Vector& grid,
                      const std::vector<Index>& permutation);

}  // namespace demix
