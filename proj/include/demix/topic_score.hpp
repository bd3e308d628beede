#pragma once

#include "demix/binning.hpp"
#include "demix/common.hpp"

#include <string>
#include <vector>

namespace demix {

/// SCORE embedding of a normalized count matrix.
struct ScoreEmbedding {
  Matrix ratios;   // M x (K-1): xi_{k+1}(j) / xi_1(j)
  Vector leading;  // xi_1 after the sign convention and divisor floor
  Vector degrees;  // row sums of Y diag(1/N)
  Vector singular_values;
};

struct VertexHunt {
  std::vector<Index> indices;  // picked rows, in pick order
  Matrix vertices;             // (K-1) x K, column k is row indices[k]
};

/// Top-K left singular vectors of D^{-1/2} Y diag(1/N) and their ratios.
ScoreEmbedding score_embedding(const Matrix& counts, const Vector& sizes, Index topics);

/// Successive projection on the rows augmented with a constant coordinate:
/// K times, take the row of largest residual norm and project every row onto
/// the orthogonal complement of it. Ties go to the lowest row index.
template <typename Derived>
VertexHunt spa_vertex_hunt(const Eigen::MatrixBase<Derived>& rows, Index topics) {
  const Index m = rows.rows();
  if (topics < 1 || m < topics) {
    fail(ErrorKind::config, "vertex hunting: need 1 <= K <= number of rows");
  }
  Matrix residual(m, rows.cols() + 1);
  residual.col(0).setOnes();
  residual.rightCols(rows.cols()) = rows;

  VertexHunt out;
  out.indices.reserve(static_cast<std::size_t>(topics));
  const double scale = residual.rowwise().squaredNorm().maxCoeff();
  for (Index k = 0; k < topics; ++k) {
    const Vector norms = residual.rowwise().squaredNorm();
    Index best = 0;
    for (Index j = 1; j < m; ++j)
      if (norms[j] > norms[best]) best = j;
    if (!(norms[best] > 1e-20 * scale)) {
      fail(ErrorKind::vertex_hunting, "vertex hunting: rows span fewer than " +
                                          std::to_string(topics) + " affinely independent points");
    }
    out.indices.push_back(best);
    const Vector direction = residual.row(best).transpose() / std::sqrt(norms[best]);
    residual -= (residual * direction) * direction.transpose();
  }

  out.vertices.resize(rows.cols(), topics);
  for (Index k = 0; k < topics; ++k)
    out.vertices.col(k) = rows.row(out.indices[static_cast<std::size_t>(k)]).transpose();
  return out;
}

/// Clip negative entries to zero and rescale to unit l1 norm.
template <typename Derived>
void clip_to_simplex(Eigen::MatrixBase<Derived>& weights) {
  weights = (weights.array().max(0.0) + 0.0).matrix();  // + 0.0 turns -0 into 0
  const double total = weights.sum();
  if (total > 0.0) weights /= total;
}

/// Solves 1'u = 1, V u = r, then clips to the simplex. `bin` only labels
/// error messages.
template <typename DerivedV, typename DerivedR>
Vector barycentric_solve(const Eigen::MatrixBase<DerivedV>& vertices,
                         const Eigen::MatrixBase<DerivedR>& point, Index bin = -1) {
  const Index k = vertices.cols();
  if (vertices.rows() != k - 1 || point.size() != k - 1) {
    fail(ErrorKind::input, "barycentric_solve: expected (K-1) x K vertices and a (K-1)-vector");
  }
  Matrix system(k, k);
  system.row(0).setOnes();
  system.bottomRows(k - 1) = vertices;
  Vector rhs(k);
  rhs[0] = 1.0;
  rhs.tail(k - 1) = point;
  Eigen::FullPivLU<Matrix> lu(system);
  if (!lu.isInvertible()) {
    fail(ErrorKind::numeric, "barycentric_solve: singular vertex system" +
                                 (bin >= 0 ? " at bin " + std::to_string(bin) : std::string()));
  }
  Vector weights = lu.solve(rhs);
  clip_to_simplex(weights);
  return weights;
}

/// Topic-SCORE estimate of the M x K column-stochastic topic matrix from a
/// (real-valued) count matrix and its document lengths. Column order follows
/// the vertex-hunting picks.
Matrix topic_score(const Matrix& counts, const Vector& sizes, Index topics);
Matrix topic_score(const HistogramMatrix& histogram, Index topics);

}  // namespace demix
