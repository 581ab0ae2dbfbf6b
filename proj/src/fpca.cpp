#include "fnboost/fpca.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace fnboost {

Matrix fpca_scores(const FpcaResult& result, const Matrix& centered_curves) {
  if (centered_curves.cols() != result.eigenfunctions.rows())
    throw std::invalid_argument("fpca_scores: grid length mismatch");
  const Vector delta = integration_weights(result.grid, IntScheme::Trapezoid).weights;
  return centered_curves * delta.asDiagonal() * result.eigenfunctions;
}

FpcaResult fpca(const FunctionalCovariate& x, double pve, std::optional<int> npc) {
  const Eigen::Index N = x.values.rows();
  const Eigen::Index R = x.values.cols();
  if (N < 2) throw std::invalid_argument("fpca: need at least 2 curves");
  if (!(pve > 0.0 && pve <= 1.0))
    throw std::invalid_argument("fpca: pve must lie in (0,1]");

  FpcaResult out;
  out.grid = x.grid;
  out.mean = x.values.colwise().mean();
  Matrix centered = x.values.rowwise() - out.mean.transpose();

  const Vector delta = integration_weights(x.grid, IntScheme::Trapezoid).weights;
  Matrix cov = centered.transpose() * centered / static_cast<double>(N - 1);
  if (cov.cwiseAbs().maxCoeff() < 1e-14)
    throw std::invalid_argument("fpca: input has zero variance");

  // Symmetric reformulation: eigenvectors of D^{1/2} C D^{1/2} map back to
  // quadrature-orthonormal eigenfunctions via D^{-1/2}.
  const Vector sqrt_d = delta.cwiseSqrt();
  Matrix sym = sqrt_d.asDiagonal() * cov * sqrt_d.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("fpca: eigendecomposition failed");

  // SelfAdjointEigenSolver sorts ascending; take descending positive part.
  const Vector vals = eig.eigenvalues();
  const double tol = std::max(1e-12, 1e-10 * vals.cwiseAbs().maxCoeff());
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = vals.size() - 1; k >= 0; --k)
    if (vals[k] > tol) keep.push_back(k);
  if (keep.empty()) throw std::invalid_argument("fpca: input has zero variance");

  const double total = vals.cwiseMax(0.0).sum();
  int K;
  if (npc) {
    if (*npc < 1 || *npc > static_cast<int>(keep.size()))
      throw std::invalid_argument("fpca: npc exceeds number of positive eigenvalues");
    K = *npc;
  } else {
    K = 1;
    double cum = vals[keep[0]];
    while (cum / total < pve && K < static_cast<int>(keep.size()))
      cum += vals[keep[K++]];
  }

  out.eigenvalues.resize(K);
  out.eigenfunctions.resize(R, K);
  for (int k = 0; k < K; ++k) {
    out.eigenvalues[k] = vals[keep[k]];
    Vector e = eig.eigenvectors().col(keep[k]).cwiseQuotient(sqrt_d);
    Eigen::Index imax;
    e.cwiseAbs().maxCoeff(&imax);
    if (e[imax] < 0) e = -e;
    out.eigenfunctions.col(k) = e;
  }
  out.pve_achieved = out.eigenvalues.sum() / total;
  out.scores = fpca_scores(out, centered);
  return out;
}

}  // namespace fnboost
