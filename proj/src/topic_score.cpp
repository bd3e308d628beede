#include "demix/topic_score.hpp"

#include <algorithm>
#include <numeric>

namespace demix {

namespace {

void check_inputs(const Matrix& counts, const Vector& sizes, Index topics) {
  if (topics < 1) fail(ErrorKind::config, "topic_score: K must be at least 1");
  if (counts.rows() < topics) {
    fail(ErrorKind::config, "topic_score: K=" + std::to_string(topics) + " exceeds M=" +
                                std::to_string(counts.rows()));
  }
  if (sizes.size() != counts.cols()) fail(ErrorKind::input, "topic_score: one size per column required");
  if ((sizes.array() <= 0.0).any()) fail(ErrorKind::input, "topic_score: every N_i must be positive");
  if ((counts.array() < 0.0).any()) fail(ErrorKind::input, "topic_score: negative count");
}

}  // namespace

ScoreEmbedding score_embedding(const Matrix& counts, const Vector& sizes, Index topics) {
  check_inputs(counts, sizes, topics);
  if (counts.cols() < topics) {
    fail(ErrorKind::config, "topic_score: need at least K groups, got " + std::to_string(counts.cols()));
  }
  const Index m = counts.rows();
  const Matrix normalized = counts * sizes.cwiseInverse().asDiagonal();

  ScoreEmbedding out;
  out.degrees = normalized.rowwise().sum();
  Vector inv_sqrt_degree(m);
  for (Index j = 0; j < m; ++j)
    inv_sqrt_degree[j] = out.degrees[j] > 0.0 ? 1.0 / std::sqrt(out.degrees[j]) : 0.0;

  const Matrix weighted = inv_sqrt_degree.asDiagonal() * normalized;
  Eigen::BDCSVD<Matrix> svd(weighted, Eigen::ComputeThinU);
  if (svd.info() != Eigen::Success) {
    fail(ErrorKind::numeric, "topic_score: SVD did not converge (M=" + std::to_string(m) +
                                 ", n=" + std::to_string(counts.cols()) +
                                 ", Frobenius norm=" + std::to_string(weighted.norm()) + ")");
  }
  Matrix vectors = svd.matrixU().leftCols(topics);
  out.singular_values = svd.singularValues().head(topics);

  if (vectors.col(0).sum() < 0.0) vectors.col(0) *= -1.0;

  // Remaining signs: first clearly nonzero entry, visiting rows by decreasing
  // xi_1, is made positive.
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return vectors(a, 0) > vectors(b, 0); });
  for (Index k = 1; k < topics; ++k) {
    const double cutoff = 1e-12 * vectors.col(k).cwiseAbs().maxCoeff();
    for (Index j : order) {
      if (std::abs(vectors(j, k)) > cutoff) {
        if (vectors(j, k) < 0.0) vectors.col(k) *= -1.0;
        break;
      }
    }
  }

  out.leading = vectors.col(0);
  const double floor = 1e-12 * out.leading.cwiseAbs().maxCoeff();
  for (Index j = 0; j < m; ++j) {
    if (std::abs(out.leading[j]) < floor) out.leading[j] = out.leading[j] < 0.0 ? -floor : floor;
  }
  out.ratios = out.leading.cwiseInverse().asDiagonal() * vectors.rightCols(topics - 1);
  return out;
}

Matrix topic_score(const Matrix& counts, const Vector& sizes, Index topics) {
  check_inputs(counts, sizes, topics);
  const Index m = counts.rows();

  if (topics == 1) {
    Vector pooled = (counts * sizes.cwiseInverse().asDiagonal()).rowwise().sum();
    const double total = pooled.sum();
    if (!(total > 0.0)) fail(ErrorKind::numeric, "topic_score: all counts are zero");
    return pooled / total;
  }

  const ScoreEmbedding embedding = score_embedding(counts, sizes, topics);
  const VertexHunt hunt = spa_vertex_hunt(embedding.ratios, topics);

  Matrix system(topics, topics);
  system.row(0).setOnes();
  system.bottomRows(topics - 1) = hunt.vertices;
  Eigen::FullPivLU<Matrix> lu(system);
  if (!lu.isInvertible()) {
    fail(ErrorKind::numeric, "topic_score: vertex matrix is singular (rank " +
                                 std::to_string(lu.rank()) + " of " + std::to_string(topics) + ")");
  }
  Matrix rhs(topics, m);
  rhs.row(0).setOnes();
  rhs.bottomRows(topics - 1) = embedding.ratios.transpose();
  Matrix weights = lu.solve(rhs);  // K x M, column m is u_m
  for (Index j = 0; j < m; ++j) {
    auto column = weights.col(j);
    clip_to_simplex(column);
  }

  const Vector row_scale = embedding.degrees.cwiseSqrt().cwiseProduct(embedding.leading);
  Matrix topics_matrix = ((row_scale.asDiagonal() * weights.transpose()).array().max(0.0) + 0.0).matrix();
  for (Index k = 0; k < topics; ++k) {
    const double mass = topics_matrix.col(k).sum();
    if (!(mass > 0.0)) {
      fail(ErrorKind::numeric, "topic_score: estimated topic " + std::to_string(k + 1) + " has no mass");
    }
    topics_matrix.col(k) /= mass;
  }
  return topics_matrix;
}

Matrix topic_score(const HistogramMatrix& histogram, Index topics) {
  return topic_score(histogram.as_real(), histogram.sizes(), topics);
}

}  // namespace demix
