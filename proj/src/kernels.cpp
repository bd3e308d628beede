#include "demix/kernels.hpp"

#include <string>

namespace demix {

double gaussian_moment(int k) {
  if (k < 0) fail(ErrorKind::config, "gaussian_moment: negative order");
  if (k % 2 == 1) return 0.0;
  double value = 1.0;
  for (int j = k - 1; j > 1; j -= 2) value *= j;
  return value;
}

namespace {

// Even polynomial p(u) = sum_k a_k u^{2k} with int u^{2m} p(u) phi(u) du = [m == 0]
// for 2m <= order. Odd moments vanish by symmetry.
Vector solve_moment_system(int order) {
  const int terms = order / 2 + 1;
  Matrix system(terms, terms);
  Vector rhs = Vector::Zero(terms);
  rhs[0] = 1.0;
  for (int m = 0; m < terms; ++m)
    for (int k = 0; k < terms; ++k) system(m, k) = gaussian_moment(2 * (m + k));
  return system.fullPivLu().solve(rhs);
}

}  // namespace

KernelSpec::KernelSpec(KernelFamily family, int order, Vector bandwidths)
    : family_(family), order_(order), bandwidths_(std::move(bandwidths)) {
  if (bandwidths_.size() < 1) fail(ErrorKind::config, "kernel: dimension must be positive");
  for (Index j = 0; j < bandwidths_.size(); ++j) {
    if (!(bandwidths_[j] > 0.0) || !std::isfinite(bandwidths_[j])) {
      fail(ErrorKind::config, "kernel: bandwidth " + std::to_string(j + 1) +
                                  " must be a positive finite number");
    }
  }
  if (order_ < 1) fail(ErrorKind::config, "kernel: order must be at least 1");
  if (order_ > 16) fail(ErrorKind::config, "kernel: order above 16 is not supported");
  coefficients_ = family_ == KernelFamily::gaussian ? Vector::Ones(1) : solve_moment_system(order_);
  inverse_volume_ = 1.0 / bandwidths_.prod();
}

KernelSpec KernelSpec::gaussian(Vector bandwidths) {
  return KernelSpec(KernelFamily::gaussian, 1, std::move(bandwidths));
}

KernelSpec KernelSpec::gaussian(double bandwidth, Index dimension) {
  return gaussian(Vector::Constant(dimension, bandwidth));
}

KernelSpec KernelSpec::higher_order(int order, Vector bandwidths) {
  return KernelSpec(KernelFamily::higher_order, order, std::move(bandwidths));
}

KernelSpec KernelSpec::higher_order(int order, double bandwidth, Index dimension) {
  return higher_order(order, Vector::Constant(dimension, bandwidth));
}

KernelSpec KernelSpec::with_bandwidth(double h) const {
  return KernelSpec(family_, order_, Vector::Constant(dimension(), h));
}

}  // namespace demix
