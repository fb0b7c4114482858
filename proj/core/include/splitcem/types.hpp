#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace splitcem {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

/// |a_ij - a_ji| <= tol * max|a| for all stored entries.
bool is_symmetric(const SparseMatrix& a, double tol = 1e-12);

}  // namespace splitcem
