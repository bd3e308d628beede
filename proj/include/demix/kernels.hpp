#pragma once

#include "demix/common.hpp"

#include <cmath>
#include <numbers>

namespace demix {

enum class KernelFamily { gaussian, higher_order };

/// Product kernel on R^d. Each coordinate uses the same one-dimensional
/// profile p(u) * phi(u), where phi is the standard normal density and p is an
/// even polynomial chosen so that moments 1..order vanish. The Gaussian family
/// is the case p = 1 and counts as order 1.
class KernelSpec {
 public:
  /// Profile values are zero beyond this many standard units.
  static constexpr double truncation = 12.0;

  static KernelSpec gaussian(Vector bandwidths);
  static KernelSpec gaussian(double bandwidth, Index dimension = 1);
  static KernelSpec higher_order(int order, Vector bandwidths);
  static KernelSpec higher_order(int order, double bandwidth, Index dimension = 1);

  KernelFamily family() const { return family_; }
  int order() const { return order_; }
  Index dimension() const { return bandwidths_.size(); }
  const Vector& bandwidths() const { return bandwidths_; }

  /// Coefficients of u^0, u^2, u^4, ... in the polynomial factor.
  const Vector& even_coefficients() const { return coefficients_; }

  /// Same family and order with every bandwidth set to h.
  KernelSpec with_bandwidth(double h) const;

  /// One-dimensional base profile K(u).
  double profile(double u) const {
    if (!(std::abs(u) <= truncation)) return 0.0;
    const double gauss = std::exp(-0.5 * u * u) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
    if (family_ == KernelFamily::gaussian) return gauss;
    const double u2 = u * u;
    double poly = 0.0;
    for (Index k = coefficients_.size() - 1; k >= 0; --k) poly = poly * u2 + coefficients_[k];
    return poly * gauss;
  }

  /// prod_j (1/h_j) K((x_j - c_j)/h_j), with the precomputed 1/prod h_j.
  template <typename DerivedX, typename DerivedC>
  double scaled(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedC>& center) const {
    double value = inverse_volume_;
    for (Index j = 0; j < bandwidths_.size(); ++j) {
      value *= profile((x(j) - center(j)) / bandwidths_[j]);
      if (value == 0.0) break;
    }
    return value;
  }

  double scaled_1d(double x, double center) const {
    return inverse_volume_ * profile((x - center) / bandwidths_[0]);
  }

 private:
  KernelSpec(KernelFamily family, int order, Vector bandwidths);

  KernelFamily family_;
  int order_;
  Vector bandwidths_;
  Vector coefficients_;
  double inverse_volume_;
};

/// Gaussian moment E[u^k] for u ~ N(0, 1).
double gaussian_moment(int k);

/// Unscaled product kernel at u.
template <typename Derived>
double eval_base(const KernelSpec& spec, const Eigen::MatrixBase<Derived>& u) {
  if (u.size() != spec.dimension()) {
    fail(ErrorKind::input, "kernel evaluation: point has dimension " + std::to_string(u.size()) +
                               ", kernel expects " + std::to_string(spec.dimension()));
  }
  double value = 1.0;
  for (Index j = 0; j < u.size(); ++j) value *= spec.profile(u(j));
  return value;
}

template <typename DerivedX, typename DerivedC>
double eval_scaled(const KernelSpec& spec, const Eigen::MatrixBase<DerivedX>& x,
                   const Eigen::MatrixBase<DerivedC>& center) {
  if (x.size() != spec.dimension() || center.size() != spec.dimension()) {
    fail(ErrorKind::input, "kernel evaluation: dimension mismatch");
  }
  return spec.scaled(x, center);
}

/// Plain kernel density estimate; points are the rows of `points`.
template <typename Derived>
double kde(const Matrix& points, const KernelSpec& spec, const Eigen::MatrixBase<Derived>& x) {
  if (points.rows() == 0) fail(ErrorKind::input, "kde: empty point list");
  if (points.cols() != spec.dimension() || x.size() != spec.dimension()) {
    fail(ErrorKind::input, "kde: dimension mismatch");
  }
  double sum = 0.0;
  for (Index p = 0; p < points.rows(); ++p) sum += spec.scaled(x, points.row(p));
  return sum / static_cast<double>(points.rows());
}

}  // namespace demix
