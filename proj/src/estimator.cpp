#include "demix/estimator.hpp"

#include "demix/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace demix {

namespace {

void require_pairs(const Vector& sizes) {
  for (Index i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 2.0) {
      fail(ErrorKind::estimator, "group " + std::to_string(i) + " has " +
                                     std::to_string(static_cast<long long>(sizes[i])) +
                                     " point(s); at least 2 are needed for within-group pairs");
    }
  }
}

void check_topics(const Matrix& topics, const BinPartition& partition) {
  if (topics.rows() != partition.bin_count()) {
    fail(ErrorKind::input, "topic matrix has " + std::to_string(topics.rows()) + " rows but the partition has " +
                               std::to_string(partition.bin_count()) + " bins");
  }
  if (topics.cols() < 1 || topics.cols() > topics.rows()) {
    fail(ErrorKind::config, "topic matrix must have 1 <= K <= M columns");
  }
}

}  // namespace

Matrix compute_T(const HistogramMatrix& histogram) {
  const Vector sizes = histogram.sizes();
  require_pairs(sizes);
  const Matrix counts = histogram.as_real();
  const Vector pair_scale = (sizes.array() * (sizes.array() - 1.0)).inverse().matrix();
  Matrix t = counts * pair_scale.asDiagonal() * counts.transpose();
  t.diagonal() -= counts * pair_scale;
  return t;
}

Matrix compute_T(const GroupedSample& samples, const BinPartition& partition) {
  return compute_T(histogram(samples, partition));
}

Matrix compute_plugin_T(const HistogramMatrix& histogram) {
  const Vector sizes = histogram.sizes();
  const Matrix counts = histogram.as_real();
  return counts * sizes.array().square().inverse().matrix().asDiagonal() * counts.transpose();
}

PairWeightTensor compute_pair_weights(const GroupedSample& samples, const BinPartition& partition) {
  const std::vector<Index> bins = assign_bins(partition, samples.points());
  const HistogramMatrix hist = histogram(samples, partition, bins);
  const Vector sizes = samples.sizes();
  require_pairs(sizes);
  PairWeightTensor out{Matrix(samples.total_points(), partition.bin_count())};
  for (Index p = 0; p < samples.total_points(); ++p) {
    const Index i = samples.group_of(p);
    const double scale = 1.0 / (sizes[i] * (sizes[i] - 1.0));
    out.weights.row(p) = hist.counts.col(i).cast<double>().transpose() * scale;
    out.weights(p, bins[static_cast<std::size_t>(p)]) -= scale;
  }
  return out;
}

WeightedDensityEstimate::WeightedDensityEstimate(const Matrix& points, const Matrix& weights,
                                                 KernelSpec kernel)
    : kernel_(std::move(kernel)) {
  if (points.rows() != weights.rows()) fail(ErrorKind::input, "estimate: one weight vector per point required");
  if (points.cols() != kernel_.dimension()) fail(ErrorKind::input, "estimate: kernel dimension mismatch");
  const Index count = points.rows();
  original_.resize(static_cast<std::size_t>(count));
  std::iota(original_.begin(), original_.end(), Index{0});
  std::stable_sort(original_.begin(), original_.end(),
                   [&](Index a, Index b) { return points(a, 0) < points(b, 0); });
  points_.resize(count, points.cols());
  weights_.resize(count, weights.cols());
  leading_.resize(static_cast<std::size_t>(count));
  for (Index s = 0; s < count; ++s) {
    const Index p = original_[static_cast<std::size_t>(s)];
    points_.row(s) = points.row(p);
    weights_.row(s) = weights.row(p);
    leading_[static_cast<std::size_t>(s)] = points(p, 0);
  }
}

Matrix WeightedDensityEstimate::weights() const {
  Matrix out(weights_.rows(), weights_.cols());
  for (Index s = 0; s < weights_.rows(); ++s) out.row(original_[static_cast<std::size_t>(s)]) = weights_.row(s);
  return out;
}

Matrix WeightedDensityEstimate::points() const {
  Matrix out(points_.rows(), points_.cols());
  for (Index s = 0; s < points_.rows(); ++s) out.row(original_[static_cast<std::size_t>(s)]) = points_.row(s);
  return out;
}

void WeightedDensityEstimate::accumulate(const double* x, double* out) const {
  const Index k_count = weights_.cols();
  const Index d = points_.cols();
  const double reach = KernelSpec::truncation * kernel_.bandwidths()[0] * (1.0 + 1e-12);
  const auto first = std::lower_bound(leading_.begin(), leading_.end(), x[0] - reach);
  const auto last = std::upper_bound(first, leading_.end(), x[0] + reach);
  const auto begin = static_cast<Index>(first - leading_.begin());
  const auto end = static_cast<Index>(last - leading_.begin());
  for (Index k = 0; k < k_count; ++k) out[k] = 0.0;

  if (d == 1) {
    const double inv_h = 1.0 / kernel_.bandwidths()[0];
    for (Index s = begin; s < end; ++s) {
      const double value = kernel_.profile((x[0] - leading_[static_cast<std::size_t>(s)]) * inv_h);
      if (value == 0.0) continue;
      const double* w = weights_.data() + s * k_count;
      for (Index k = 0; k < k_count; ++k) out[k] += value * w[k];
    }
    for (Index k = 0; k < k_count; ++k) out[k] *= inv_h;
    return;
  }

  const Eigen::Map<const Vector> xv(x, d);
  for (Index s = begin; s < end; ++s) {
    const double value = kernel_.scaled(xv, points_.row(s));
    if (value == 0.0) continue;
    const double* w = weights_.data() + s * k_count;
    for (Index k = 0; k < k_count; ++k) out[k] += value * w[k];
  }
}

Vector WeightedDensityEstimate::evaluate(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != dimension()) fail(ErrorKind::input, "evaluate: dimension mismatch");
  Vector out(component_count());
  const Vector copy = x;
  accumulate(copy.data(), out.data());
  return out;
}

Matrix WeightedDensityEstimate::evaluate_on_grid(const Matrix& grid) const {
  if (grid.rows() == 0) fail(ErrorKind::input, "evaluate_on_grid: empty grid");
  if (grid.cols() != dimension()) fail(ErrorKind::input, "evaluate_on_grid: dimension mismatch");
  Matrix out(component_count(), grid.rows());
  parallel_for(grid.rows(), [&](Index g) {
    Vector x = grid.row(g).transpose();
    accumulate(x.data(), out.col(g).data());
  });
  return out;
}

WeightedDensityEstimate WeightedDensityEstimate::with_kernel(const KernelSpec& kernel) const {
  if (kernel.dimension() != dimension()) fail(ErrorKind::input, "with_kernel: dimension mismatch");
  WeightedDensityEstimate copy = *this;
  copy.kernel_ = kernel;
  return copy;
}

Matrix evaluate_on_grid(const WeightedDensityEstimate& estimate, const Matrix& grid) {
  return estimate.evaluate_on_grid(grid);
}

Regularization regularization_for(const Matrix& gram, Index topics, Index groups, Index bins,
                                  double total_points, Ridge ridge) {
  Regularization out;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) fail(ErrorKind::numeric, "eigen-decomposition of G'TG failed");
  out.lambda_min = eig.eigenvalues()[0];
  const double m2 = static_cast<double>(bins) * static_cast<double>(bins);
  const double scale = static_cast<double>(topics) * static_cast<double>(groups) / m2;
  const double log_p = std::log(total_points);
  out.threshold = scale / (log_p * log_p);
  out.triggered = out.lambda_min < out.threshold;
  if (out.triggered && ridge == Ridge::rule) out.epsilon = scale;
  return out;
}

DemixFit build_demix_estimator(const GroupedSample& samples, const BinPartition& partition,
                               const Matrix& topics, const KernelSpec& kernel, Ridge ridge) {
  check_topics(topics, partition);
  const std::vector<Index> bins = assign_bins(partition, samples.points());
  const HistogramMatrix hist = histogram(samples, partition, bins);
  const Matrix t = compute_T(hist);
  const Index k = topics.cols();
  const Index n = samples.group_count();

  Matrix gram = topics.transpose() * t * topics;
  gram = 0.5 * (gram + gram.transpose()).eval();
  const Regularization reg = regularization_for(gram, k, n, partition.bin_count(),
                                                static_cast<double>(samples.total_points()), ridge);
  Matrix regularized = gram;
  regularized.diagonal().array() += reg.epsilon;
  Eigen::FullPivLU<Matrix> lu(regularized);
  if (!lu.isInvertible()) {
    fail(ErrorKind::numeric, "G'TG + eps I is singular (lambda_min=" + std::to_string(reg.lambda_min) +
                                 ", eps=" + std::to_string(reg.epsilon) + ")");
  }
  const Matrix op = (topics.transpose() * topics) * lu.solve(topics.transpose());  // K x M

  const Matrix projected_counts = op * hist.as_real();  // K x n
  Matrix weights(samples.total_points(), k);
  for (Index p = 0; p < samples.total_points(); ++p) {
    const Index i = samples.group_of(p);
    const double size = static_cast<double>(samples.group_size(i));
    weights.row(p) = (projected_counts.col(i) - op.col(bins[static_cast<std::size_t>(p)])).transpose() /
                     (size * (size - 1.0));
  }
  return DemixFit{WeightedDensityEstimate(samples.points(), weights, kernel), reg, gram, op};
}

WeightedDensityEstimate oracle_estimator(const GroupedSample& samples, const Matrix& memberships,
                                         const KernelSpec& kernel) {
  const Index n = samples.group_count();
  if (memberships.rows() != n) fail(ErrorKind::input, "oracle: one membership row per group required");
  const Vector row_sums = memberships.rowwise().sum();
  if (((row_sums.array() - 1.0).abs() > 1e-8).any()) {
    fail(ErrorKind::input, "oracle: membership rows must sum to 1");
  }
  const Matrix second_moment = memberships.transpose() * memberships / static_cast<double>(n);
  Eigen::FullPivLU<Matrix> lu(second_moment);
  if (!lu.isInvertible()) fail(ErrorKind::input, "oracle: membership matrix is rank deficient");
  const Matrix b = lu.solve(memberships.transpose());  // K x n

  Matrix weights(samples.total_points(), memberships.cols());
  for (Index p = 0; p < samples.total_points(); ++p) {
    const Index i = samples.group_of(p);
    weights.row(p) = b.col(i).transpose() / (static_cast<double>(n) * static_cast<double>(samples.group_size(i)));
  }
  return WeightedDensityEstimate(samples.points(), weights, kernel);
}

WeightedDensityEstimate plugin_estimator(const GroupedSample& samples, const BinPartition& partition,
                                         const Matrix& topics, const KernelSpec& kernel) {
  check_topics(topics, partition);
  const HistogramMatrix hist = histogram(samples, partition);
  const Matrix gram = topics.transpose() * compute_plugin_T(hist) * topics;
  Eigen::FullPivLU<Matrix> lu(gram);
  if (!lu.isInvertible()) fail(ErrorKind::numeric, "plug-in: G'T~G is singular");
  const Matrix op = (topics.transpose() * topics) * lu.solve(topics.transpose());
  const Matrix projected_counts = op * hist.as_real();

  Matrix weights(samples.total_points(), topics.cols());
  for (Index p = 0; p < samples.total_points(); ++p) {
    const Index i = samples.group_of(p);
    const double size = static_cast<double>(samples.group_size(i));
    weights.row(p) = projected_counts.col(i).transpose() / (size * size);
  }
  return WeightedDensityEstimate(samples.points(), weights, kernel);
}

Vector project_to_simplex(const Vector& v) {
  Vector sorted = v;
  std::sort(sorted.data(), sorted.data() + sorted.size(), std::greater<double>());
  double cumulative = 0.0;
  double shift = 0.0;
  for (Index j = 0; j < sorted.size(); ++j) {
    cumulative += sorted[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) shift = candidate;
  }
  return (v.array() - shift).cwiseMax(0.0).matrix();
}

Memberships estimate_memberships(const Matrix& counts, const Vector& sizes, const Matrix& topics) {
  if (counts.rows() != topics.rows()) fail(ErrorKind::input, "memberships: topic matrix rows must match bins");
  if (sizes.size() != counts.cols()) fail(ErrorKind::input, "memberships: one size per group required");
  const Matrix gram = topics.transpose() * topics;
  Eigen::FullPivLU<Matrix> lu(gram);
  if (!lu.isInvertible()) fail(ErrorKind::numeric, "memberships: G'G is singular");
  Memberships out;
  out.raw = sizes.cwiseInverse().asDiagonal() * counts.transpose() * topics * lu.inverse();
  out.projected.resize(out.raw.rows(), out.raw.cols());
  for (Index i = 0; i < out.raw.rows(); ++i)
    out.projected.row(i) = project_to_simplex(out.raw.row(i).transpose()).transpose();
  return out;
}

Memberships estimate_memberships(const HistogramMatrix& histogram, const Matrix& topics) {
  return estimate_memberships(histogram.as_real(), histogram.sizes(), topics);
}

}  // namespace demix
