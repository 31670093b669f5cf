#include "embstats/pca.hpp"

#include <fmt/format.h>

#include "embstats/error.hpp"

namespace embstats::analysis {
namespace {

// Relative to the largest eigenvalue; below this an eigenvalue counts as zero.
constexpr double kRankTolerance = 1e-12;

}  // namespace

Pca2D pca_project(const Eigen::MatrixXd& data) {
  const auto n = data.rows();
  const auto d = data.cols();
  if (n < 3) throw InputError(fmt::format("PCA needs >= 3 points, got {}", n));
  if (d < 2) throw InputError(fmt::format("PCA needs dimension >= 2, got {}", d));

  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mean;
  const Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("covariance eigensolver failed");
  const Eigen::VectorXd& evals = solver.eigenvalues();  // ascending
  const double largest = evals(d - 1);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (largest > 0.0 && evals(i) > kRankTolerance * largest) ++rank;
  }
  if (rank < 2) {
    throw NumericError(fmt::format("PCA input has rank {}, need at least 2", rank));
  }

  Pca2D out;
  out.components.resize(d, 2);
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - c);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out.components.col(c) = v;
    out.explained_variance[static_cast<std::size_t>(c)] = evals(d - 1 - c);
  }

  out.coords = centered * out.components;
  out.origin_offset = (-mean * out.components).transpose();
  out.coords.rowwise() -= out.origin_offset.transpose();
  out.origin = out.origin_offset - out.origin_offset;
  return out;
}

}  // namespace embstats::analysis
