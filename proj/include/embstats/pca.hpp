#pragma once

#include <array>

#include <Eigen/Dense>

namespace embstats::analysis {

// Two-component PCA that also carries the origin of the input space through
// the transform, then translates every point so the projected origin sits at
// (0, 0).
struct Pca2D {
  Eigen::MatrixX2d coords;           // one row per input point, translated
  Eigen::Vector2d origin;            // projected origin after translation
  std::array<double, 2> explained_variance{};  // descending eigenvalues
  Eigen::Matrix<double, Eigen::Dynamic, 2> components;  // d x 2, unit columns
  Eigen::Vector2d origin_offset;     // projected origin before translation
};

// `data` holds one point per row (n x d). Eigenvalues are those of the
// population covariance (divisor n). Each component's sign is fixed so that
// its largest-magnitude entry is positive.
//
// Throws InputError for n < 3 or d < 2, NumericError when the covariance has
// fewer than two non-negligible eigenvalues.
Pca2D pca_project(const Eigen::MatrixXd& data);

}  // namespace embstats::analysis
