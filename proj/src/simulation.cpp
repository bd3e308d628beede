#include "demix/simulation.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace demix {

double bump(double x, double beta, double a) {
  const double r = std::abs(x / a);
  return r < 1.0 ? 1.0 - std::pow(r, beta) : 0.0;
}

double bump_cdf(double x, double beta, double a) {
  const double total = 2.0 * a * beta / (beta + 1.0);
  if (x <= -a) return 0.0;
  if (x >= a) return total;
  const double s = std::abs(x);
  const double partial = s - std::pow(s, beta + 1.0) / ((beta + 1.0) * std::pow(a, beta));
  return x < 0.0 ? 0.5 * total - partial : 0.5 * total + partial;
}

namespace {

constexpr double kCentralWeight = 3.0;
constexpr double kCentralHalfWidth = 12.0;
constexpr double kSideWeight = 2.0;
constexpr double kSideHalfWidth = 1.0;

double integrate_piece(double beta, double a, double shift) {
  // Each half of a bump is smooth on its own; splitting at the peak keeps
  // the adaptive rule away from the |x|^beta cusp.
  using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
  auto f = [&](double x) { return bump(x - shift, beta, a); };
  double error = 0.0;
  const double left = Rule::integrate(f, shift - a, shift, 20, 1e-13, &error);
  const double right = Rule::integrate(f, shift, shift + a, 20, 1e-13, &error);
  return left + right;
}

}  // namespace

BumpDensities::BumpDensities(Index components, double beta, Index cdf_knots)
    : components_(components), beta_(beta) {
  if (components < 1) fail(ErrorKind::config, "bump densities: K must be at least 1");
  if (!(beta > 0.0)) fail(ErrorKind::config, "bump densities: beta must be positive");
  if (cdf_knots < 2) fail(ErrorKind::config, "bump densities: need at least 2 CDF knots");
  normalizers_.resize(components);
  knots_.resize(static_cast<std::size_t>(components));
  table_.resize(static_cast<std::size_t>(components));
  for (Index k = 0; k < components; ++k) {
    const double a = center(k);
    normalizers_[k] = kCentralWeight * integrate_piece(beta, kCentralHalfWidth, 0.0) +
                      kSideWeight * integrate_piece(beta, kSideHalfWidth, a) +
                      kSideWeight * integrate_piece(beta, kSideHalfWidth, -a);
    const double bound = a + kSideHalfWidth;
    auto& knots = knots_[static_cast<std::size_t>(k)];
    auto& table = table_[static_cast<std::size_t>(k)];
    knots.resize(static_cast<std::size_t>(cdf_knots));
    table.resize(static_cast<std::size_t>(cdf_knots));
    for (Index t = 0; t < cdf_knots; ++t) {
      const double x = -bound + 2.0 * bound * static_cast<double>(t) / static_cast<double>(cdf_knots - 1);
      knots[static_cast<std::size_t>(t)] = x;
      table[static_cast<std::size_t>(t)] = cdf(k, x);
    }
    table.front() = 0.0;
    table.back() = 1.0;
  }
}

double BumpDensities::unnormalized(Index k, double x) const {
  const double a = center(k);
  return kCentralWeight * bump(x, beta_, kCentralHalfWidth) + kSideWeight * bump(x - a, beta_, kSideHalfWidth) +
         kSideWeight * bump(x + a, beta_, kSideHalfWidth);
}

double BumpDensities::cdf(Index k, double x) const {
  const double a = center(k);
  const double mass = kCentralWeight * bump_cdf(x, beta_, kCentralHalfWidth) +
                      kSideWeight * bump_cdf(x - a, beta_, kSideHalfWidth) +
                      kSideWeight * bump_cdf(x + a, beta_, kSideHalfWidth);
  return std::clamp(mass / normalizers_[k], 0.0, 1.0);
}

double BumpDensities::quantile(Index k, double u) const {
  const auto& knots = knots_[static_cast<std::size_t>(k)];
  const auto& table = table_[static_cast<std::size_t>(k)];
  if (u <= 0.0) return knots.front();
  if (u >= 1.0) return knots.back();
  // First knot with table >= u; the interval below it has positive mass.
  const auto upper = std::lower_bound(table.begin(), table.end(), u);
  const auto hi = static_cast<std::size_t>(upper - table.begin());
  const std::size_t lo = hi - 1;
  const double span = table[hi] - table[lo];
  const double frac = span > 0.0 ? (u - table[lo]) / span : 0.0;
  return knots[lo] + frac * (knots[hi] - knots[lo]);
}

Matrix BumpDensities::evaluate(const Vector& grid) const {
  Matrix out(components_, grid.size());
  for (Index k = 0; k < components_; ++k)
    for (Index g = 0; g < grid.size(); ++g) out(k, g) = density(k, grid[g]);
  return out;
}

Matrix sample_memberships(Index groups, Index components, double tau, std::uint64_t seed) {
  if (!(tau > 0.0)) fail(ErrorKind::config, "memberships: temperature must be positive");
  if (groups < 1 || components < 1) fail(ErrorKind::config, "memberships: n and K must be positive");
  Rng rng(seed);
  Matrix out(groups, components);
  for (Index i = 0; i < groups; ++i) {
    for (Index k = 0; k < components; ++k) out(i, k) = rng.normal() / tau;
    const double top = out.row(i).maxCoeff();
    out.row(i) = (out.row(i).array() - top).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

GroupedSample sample_dataset(const Matrix& memberships, const BumpDensities& densities, Index points_per_group,
                             std::uint64_t seed) {
  if (points_per_group < 1) fail(ErrorKind::config, "sample_dataset: N must be positive");
  if (memberships.cols() != densities.component_count()) {
    fail(ErrorKind::input, "sample_dataset: membership width must equal K");
  }
  const Index n = memberships.rows();
  const Index k_count = memberships.cols();
  Rng rng(seed);
  Matrix points(n * points_per_group, 1);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < points_per_group; ++j) {
      const double u = rng.uniform();
      Index component = k_count - 1;
      double cumulative = 0.0;
      for (Index k = 0; k < k_count; ++k) {
        cumulative += memberships(i, k);
        if (u < cumulative) {
          component = k;
          break;
        }
      }
      points(i * points_per_group + j, 0) = densities.sample(component, rng);
    }
  }
  return GroupedSample(std::move(points), std::vector<Index>(static_cast<std::size_t>(n), points_per_group));
}

Vector linspace(double lo, double hi, Index count) {
  if (count < 2) fail(ErrorKind::config, "linspace: need at least 2 points");
  Vector out(count);
  for (Index g = 0; g < count; ++g)
    out[g] = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(count - 1);
  return out;
}

double ise(const Eigen::Ref<const Vector>& estimate, const Eigen::Ref<const Vector>& truth,
           const Eigen::Ref<const Vector>& grid) {
  if (estimate.size() != truth.size() || estimate.size() != grid.size()) {
    fail(ErrorKind::input, "ise: estimate, truth and grid lengths differ");
  }
  double total = 0.0;
  for (Index g = 1; g < grid.size(); ++g) {
    const double a = estimate[g - 1] - truth[g - 1];
    const double b = estimate[g] - truth[g];
    total += 0.5 * (grid[g] - grid[g - 1]) * (a * a + b * b);
  }
  return total;
}

double alignment_cost(const Matrix& estimate, const Matrix& truth, const Vector& grid,
                      const std::vector<Index>& permutation) {
  double total = 0.0;
  for (Index k = 0; k < truth.rows(); ++k)
    total += ise(estimate.row(permutation[static_cast<std::size_t>(k)]).transpose(), truth.row(k).transpose(), grid);
  return total;
}

std::vector<Index> align_components(const Matrix& estimate, const Matrix& truth, const Vector& grid) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
    fail(ErrorKind::input, "align_components: shapes differ");
  }
  const Index k_count = truth.rows();
  Matrix cost(k_count, k_count);  // (truth k, estimate e)
  for (Index k = 0; k < k_count; ++k)
    for (Index e = 0; e < k_count; ++e) cost(k, e) = ise(estimate.row(e).transpose(), truth.row(k).transpose(), grid);

  std::vector<Index> best(static_cast<std::size_t>(k_count));
  std::iota(best.begin(), best.end(), Index{0});
  if (k_count <= 8) {
    std::vector<Index> perm = best;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      for (Index k = 0; k < k_count; ++k) c += cost(k, perm[static_cast<std::size_t>(k)]);
      if (c < best_cost) {
        best_cost = c;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }

  std::vector<bool> truth_used(static_cast<std::size_t>(k_count), false);
  std::vector<bool> estimate_used(static_cast<std::size_t>(k_count), false);
  for (Index step = 0; step < k_count; ++step) {
    Index bk = -1, be = -1;
    for (Index k = 0; k < k_count; ++k) {
      if (truth_used[static_cast<std::size_t>(k)]) continue;
      for (Index e = 0; e < k_count; ++e) {
        if (estimate_used[static_cast<std::size_t>(e)]) continue;
        if (bk < 0 || cost(k, e) < cost(bk, be)) {
          bk = k;
          be = e;
        }
      }
    }
    best[static_cast<std::size_t>(bk)] = be;
    truth_used[static_cast<std::size_t>(bk)] = true;
    estimate_used[static_cast<std::size_t>(be)] = true;
  }
  return best;
}

}  // namespace demix
