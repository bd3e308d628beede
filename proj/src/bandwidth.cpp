#include "demix/bandwidth.hpp"

#include "demix/parallel.hpp"
#include "demix/random.hpp"
#include "demix/topic_score.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace demix {

Vector BandwidthGrid::bandwidths() const {
  Vector out(exponents.size());
  for (Index l = 0; l < exponents.size(); ++l) out[l] = std::pow(base, exponents[l]);
  return out;
}

BandwidthGrid make_default_grid(Index topics, double points_per_group, Index groups, Index size) {
  if (size < 2) fail(ErrorKind::config, "bandwidth grid: L must be at least 2");
  BandwidthGrid grid;
  grid.base = static_cast<double>(topics) / (points_per_group * static_cast<double>(groups));
  if (!(grid.base < 1.0) || !(grid.base > 0.0)) {
    fail(ErrorKind::config, "bandwidth grid: K/(N n) must lie in (0, 1)");
  }
  grid.exponents.resize(size);
  for (Index l = 0; l < size; ++l) grid.exponents[l] = static_cast<double>(l + 1) / static_cast<double>(size + 1);
  return grid;
}

Matrix quadrature_grid(const GroupedSample& samples, double pad, Index points_per_axis) {
  if (points_per_axis < 2) fail(ErrorKind::config, "quadrature grid: need at least 2 nodes per axis");
  const Index d = samples.dimension();
  const Vector lo = samples.points().colwise().minCoeff().transpose().array() - pad;
  const Vector hi = samples.points().colwise().maxCoeff().transpose().array() + pad;
  Index total = 1;
  for (Index a = 0; a < d; ++a) total *= points_per_axis;
  Matrix grid(total, d);
  for (Index g = 0; g < total; ++g) {
    Index rest = g;
    for (Index a = d - 1; a >= 0; --a) {
      const Index node = rest % points_per_axis;
      rest /= points_per_axis;
      grid(g, a) = lo[a] + (hi[a] - lo[a]) * static_cast<double>(node) / static_cast<double>(points_per_axis - 1);
    }
  }
  return grid;
}

double integrate_squared_norm(const Matrix& values, const Matrix& grid, Index points_per_axis) {
  const Index d = grid.cols();
  Vector step(d);
  for (Index a = 0; a < d; ++a) {
    Index stride = 1;
    for (Index b = a + 1; b < d; ++b) stride *= points_per_axis;
    step[a] = grid(stride, a) - grid(0, a);
  }
  double total = 0.0;
  for (Index g = 0; g < grid.rows(); ++g) {
    double weight = 1.0;
    Index rest = g;
    for (Index a = d - 1; a >= 0; --a) {
      const Index node = rest % points_per_axis;
      rest /= points_per_axis;
      weight *= (node == 0 || node == points_per_axis - 1) ? 0.5 * step[a] : step[a];
    }
    total += weight * values.col(g).squaredNorm();
  }
  return total;
}

namespace {

void require_loo(const GroupedSample& samples, Index i) {
  if (samples.group_size(i) < 3) {
    fail(ErrorKind::estimator, "leave-one-out: group " + std::to_string(i) + " would keep fewer than 2 points");
  }
}

}  // namespace

Matrix leave_one_out_T(const GroupedSample& samples, const BinPartition& partition, Index i, Index j) {
  require_loo(samples, i);
  const HistogramMatrix hist = histogram(samples, partition);
  const Index bin = partition.bin_index(samples.point(i, j));
  const double n = static_cast<double>(samples.group_size(i));
  Matrix t = compute_T(hist);
  Vector c = hist.counts.col(i).cast<double>();
  Matrix before = c * c.transpose();
  before.diagonal() -= c;
  c[bin] -= 1.0;
  Matrix after = c * c.transpose();
  after.diagonal() -= c;
  t += after / ((n - 1.0) * (n - 2.0)) - before / (n * (n - 1.0));
  return t;
}

PairWeightTensor leave_one_out_pair_weights(const GroupedSample& samples, const BinPartition& partition,
                                            Index i, Index j) {
  require_loo(samples, i);
  const std::vector<Index> bins = assign_bins(partition, samples.points());
  const PairWeightTensor full = compute_pair_weights(samples, partition);
  const HistogramMatrix hist = histogram(samples, partition, bins);
  const Index removed = samples.group_begin(i) + j;
  const double n = static_cast<double>(samples.group_size(i));
  Vector reduced_counts = hist.counts.col(i).cast<double>();
  reduced_counts[bins[static_cast<std::size_t>(removed)]] -= 1.0;
  const double scale = 1.0 / ((n - 1.0) * (n - 2.0));

  PairWeightTensor out{Matrix(samples.total_points() - 1, partition.bin_count())};
  Index row = 0;
  for (Index p = 0; p < samples.total_points(); ++p) {
    if (p == removed) continue;
    if (samples.group_of(p) == i) {
      out.weights.row(row) = reduced_counts.transpose() * scale;
      out.weights(row, bins[static_cast<std::size_t>(p)]) -= scale;
    } else {
      out.weights.row(row) = full.weights.row(p);
    }
    ++row;
  }
  return out;
}

Matrix leave_one_out_normalized_counts(const GroupedSample& samples, const BinPartition& partition,
                                       Index i, Index j) {
  const HistogramMatrix hist = histogram(samples, partition);
  Matrix out = hist.as_real() * samples.sizes().cwiseInverse().asDiagonal();
  Vector column = hist.counts.col(i).cast<double>();
  column[partition.bin_index(samples.point(i, j))] -= 1.0;
  out.col(i) = column / (static_cast<double>(samples.group_size(i)) - 1.0);
  return out;
}

LeaveOneOutCriterion::LeaveOneOutCriterion(const GroupedSample& samples, const BinPartition& partition,
                                           const Matrix& topics, const CvOptions& options)
    : samples_(samples), partition_(partition), topics_(topics), options_(options) {
  if (topics_.rows() != partition_.bin_count()) fail(ErrorKind::input, "criterion: topic matrix/bin mismatch");
  if (samples_.min_group_size() < 3) {
    fail(ErrorKind::estimator, "leave-one-out: every group needs at least 3 points");
  }
  const Index k = topics_.cols();
  const Index n = samples_.group_count();
  bins_ = assign_bins(partition_, samples_.points());
  const HistogramMatrix hist = histogram(samples_, partition_, bins_);
  const Matrix counts = hist.as_real();

  topic_gram_ = topics_.transpose() * topics_;
  full_gram_ = topics_.transpose() * compute_T(hist) * topics_;
  full_gram_ = 0.5 * (full_gram_ + full_gram_.transpose()).eval();
  regularization_ = regularization_for(full_gram_, k, n, partition_.bin_count(),
                                       static_cast<double>(samples_.total_points()), options_.ridge);

  group_projection_ = topics_.transpose() * counts;
  group_diag_.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    group_diag_[static_cast<std::size_t>(i)] = topics_.transpose() * counts.col(i).asDiagonal() * topics_;

  point_weights_.resize(samples_.total_points(), k);
  for (Index p = 0; p < samples_.total_points(); ++p) {
    const Index i = samples_.group_of(p);
    const double size = static_cast<double>(samples_.group_size(i));
    point_weights_.row(p) = (group_projection_.col(i) - topics_.row(bins_[static_cast<std::size_t>(p)]).transpose())
                                .transpose() / (size * (size - 1.0));
  }

  const Index total = samples_.total_points();
  if (options_.subsample <= 0 || options_.subsample >= total) {
    selected_.resize(static_cast<std::size_t>(total));
    std::iota(selected_.begin(), selected_.end(), Index{0});
  } else {
    // Partial Fisher-Yates; the chosen indices are then visited in storage order.
    std::vector<Index> pool(static_cast<std::size_t>(total));
    std::iota(pool.begin(), pool.end(), Index{0});
    Rng rng(derive_seed(options_.seed, 0x6376));
    for (Index s = 0; s < options_.subsample; ++s) {
      const Index pick = s + rng.uniform_index(total - s);
      std::swap(pool[static_cast<std::size_t>(s)], pool[static_cast<std::size_t>(pick)]);
    }
    selected_.assign(pool.begin(), pool.begin() + options_.subsample);
    std::sort(selected_.begin(), selected_.end());
  }
}

namespace {

double fast_term(const GroupedSample& samples, const Matrix& topics, const Matrix& topic_gram,
                 const Matrix& full_gram, double epsilon, const Matrix& group_projection,
                 const std::vector<Matrix>& group_diag, const Matrix& point_weights,
                 const std::vector<Index>& bins, const WeightedDensityEstimate& raw, const KernelSpec& kernel,
                 Index point) {
  const Index i = samples.group_of(point);
  const double size = static_cast<double>(samples.group_size(i));
  const Index bin = bins[static_cast<std::size_t>(point)];
  const Vector anchor_row = topics.row(bin).transpose();

  const Vector& z = group_projection.col(i);
  const Vector z_reduced = z - anchor_row;
  const Matrix& diag = group_diag[static_cast<std::size_t>(i)];
  Matrix before = z * z.transpose() - diag;
  Matrix after = z_reduced * z_reduced.transpose() - (diag - anchor_row * anchor_row.transpose());
  Matrix gram = full_gram - before / (size * (size - 1.0)) + after / ((size - 1.0) * (size - 2.0));
  gram.diagonal().array() += epsilon;

  const Vector x = samples.points().row(point).transpose();
  Vector s = raw.evaluate(x);
  const double reduced_scale = 1.0 / ((size - 1.0) * (size - 2.0));
  const Index begin = samples.group_begin(i);
  for (Index j = 0; j < samples.group_size(i); ++j) {
    const Index q = begin + j;
    const double value = kernel.scaled(x, samples.points().row(q));
    if (value == 0.0) continue;
    s -= value * point_weights.row(q).transpose();
    if (q != point) {
      s += value * reduced_scale * (z_reduced - topics.row(bins[static_cast<std::size_t>(q)]).transpose());
    }
  }

  Eigen::FullPivLU<Matrix> lu(gram);
  if (!lu.isInvertible()) {
    fail(ErrorKind::numeric, "leave-one-out: G'T_(-ij)G is singular at point " + std::to_string(point));
  }
  const Vector density = topic_gram * lu.solve(s);
  const Vector weight = static_cast<double>(samples.group_count()) / (size - 1.0) * (topic_gram * lu.solve(z_reduced));
  return weight.dot(density);
}

}  // namespace

double LeaveOneOutCriterion::refit_term(Index point, const KernelSpec& kernel) const {
  const Index i = samples_.group_of(point);
  const Index j = point - samples_.group_begin(i);
  const GroupedSample reduced = samples_.without_point(i, j);
  const HistogramMatrix hist = histogram(reduced, partition_);
  const Matrix topics = topic_score(hist, topics_.cols());
  const DemixFit fit = build_demix_estimator(reduced, partition_, topics, kernel, options_.ridge);
  const Memberships pi = estimate_memberships(hist, topics);
  const double n = static_cast<double>(reduced.group_count());
  const Matrix second = pi.raw.transpose() * pi.raw / n;
  Eigen::FullPivLU<Matrix> lu(second);
  if (!lu.isInvertible()) fail(ErrorKind::numeric, "leave-one-out refit: estimated memberships are rank deficient");
  const Vector b = lu.solve(pi.raw.row(i).transpose());
  return b.dot(fit.estimate.evaluate(samples_.points().row(point).transpose()));
}

double LeaveOneOutCriterion::leave_one_out_term(Index point, const KernelSpec& kernel) const {
  if (options_.refit_topics) return refit_term(point, kernel);
  const WeightedDensityEstimate raw(samples_.points(), point_weights_, kernel);
  return fast_term(samples_, topics_, topic_gram_, full_gram_, regularization_.epsilon, group_projection_,
                   group_diag_, point_weights_, bins_, raw, kernel, point);
}

LeaveOneOutCriterion::Terms LeaveOneOutCriterion::evaluate(const KernelSpec& kernel, const Matrix& quad_grid,
                                                            Index points_per_axis) const {
  if (kernel.dimension() != samples_.dimension()) fail(ErrorKind::input, "criterion: kernel dimension mismatch");
  const WeightedDensityEstimate raw(samples_.points(), point_weights_, kernel);

  Matrix gram = full_gram_;
  gram.diagonal().array() += regularization_.epsilon;
  Eigen::FullPivLU<Matrix> lu(gram);
  if (!lu.isInvertible()) fail(ErrorKind::numeric, "criterion: G'TG + eps I is singular");
  const Matrix operator_k = topic_gram_ * lu.inverse();

  Terms terms;
  const Matrix values = operator_k * raw.evaluate_on_grid(quad_grid);
  terms.quadratic = integrate_squared_norm(values, quad_grid, points_per_axis);

  const double n = static_cast<double>(samples_.group_count());
  double sum = 0.0;
  for (Index point : selected_) {
    const double size = static_cast<double>(samples_.group_size(samples_.group_of(point)));
    const double term = options_.refit_topics
                            ? refit_term(point, kernel)
                            : fast_term(samples_, topics_, topic_gram_, full_gram_, regularization_.epsilon,
                                        group_projection_, group_diag_, point_weights_, bins_, raw, kernel, point);
    sum += term / size;
  }
  const double coverage = static_cast<double>(samples_.total_points()) / static_cast<double>(selected_.size());
  terms.cross = 2.0 / n * coverage * sum;
  return terms;
}

double amise_estimate(const GroupedSample& samples, const BinPartition& partition, const Matrix& topics,
                      const KernelSpec& kernel, const Matrix& quad_grid, const CvOptions& options) {
  const LeaveOneOutCriterion criterion(samples, partition, topics, options);
  const Index per_axis = samples.dimension() == 1
                             ? quad_grid.rows()
                             : static_cast<Index>(std::llround(std::pow(static_cast<double>(quad_grid.rows()),
                                                                        1.0 / static_cast<double>(samples.dimension()))));
  return criterion.evaluate(kernel, quad_grid, per_axis).amise();
}

BandwidthSelection select_bandwidth(const GroupedSample& samples, const BinPartition& partition,
                                    const Matrix& topics, const BandwidthGrid& grid, const CvOptions& options,
                                    const KernelSpec& family) {
  if (grid.size() < 1) fail(ErrorKind::config, "select_bandwidth: empty grid");
  const Vector candidates = grid.bandwidths();
  const LeaveOneOutCriterion criterion(samples, partition, topics, options);
  const Index per_axis = samples.dimension() == 1 ? options.quadrature_points
                                                  : std::min<Index>(options.quadrature_points, 64);
  const Matrix quad = quadrature_grid(samples, 3.0 * candidates.maxCoeff(), per_axis);

  BandwidthSelection out;
  out.scores.resize(static_cast<std::size_t>(grid.size()));
  std::vector<std::string> errors(static_cast<std::size_t>(grid.size()));
  parallel_for(grid.size(), [&](Index l) {
    CvScore& score = out.scores[static_cast<std::size_t>(l)];
    score.exponent = grid.exponents[l];
    score.bandwidth = candidates[l];
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto terms = criterion.evaluate(family.with_bandwidth(candidates[l]), quad, per_axis);
      score.quadratic = terms.quadratic;
      score.cross = terms.cross;
      score.amise = terms.amise();
      if (!std::isfinite(score.amise)) errors[static_cast<std::size_t>(l)] = "non-finite criterion";
    } catch (const Error& e) {
      score.amise = std::numeric_limits<double>::quiet_NaN();
      errors[static_cast<std::size_t>(l)] = e.what();
    }
    score.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });

  for (Index l = 0; l < grid.size(); ++l) {
    if (!errors[static_cast<std::size_t>(l)].empty()) continue;
    const auto& s = out.scores[static_cast<std::size_t>(l)];
    if (out.index < 0) {
      out.index = l;
      continue;
    }
    const auto& best = out.scores[static_cast<std::size_t>(out.index)];
    if (s.amise < best.amise || (s.amise == best.amise && s.bandwidth > best.bandwidth)) out.index = l;
  }
  if (out.index < 0) {
    std::string all = "select_bandwidth: every candidate failed:";
    for (Index l = 0; l < grid.size(); ++l)
      all += " [h=" + std::to_string(candidates[l]) + ": " + errors[static_cast<std::size_t>(l)] + "]";
    fail(ErrorKind::estimator, all);
  }
  out.bandwidth = out.scores[static_cast<std::size_t>(out.index)].bandwidth;
  return out;
}

BandwidthSelection select_bandwidth(const GroupedSample& samples, Index topics, const BandwidthGrid& grid,
                                    const CvOptions& options, const KernelSpec& family) {
  const double mean_size = static_cast<double>(samples.total_points()) / static_cast<double>(samples.group_count());
  const Index bins = default_bin_count(topics, mean_size, samples.group_count());
  const BinPartition partition = build_bins(samples, bins);
  const Matrix topic_matrix = topic_score(histogram(samples, partition), topics);
  return select_bandwidth(samples, partition, topic_matrix, grid, options, family);
}

}  // namespace demix
