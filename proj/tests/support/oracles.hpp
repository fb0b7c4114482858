#pragma once

// Independent dense reference implementations used to check the library.
// Element matrices are the closed-form Q1 integrals on a square cell, not
// quadrature, and every solve goes through a different Eigen decomposition
// than the library code it checks.

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Interior-dof index of node (ix, iy) on an Nf x Nf grid, -1 on the boundary.
int dof(int nf, int ix, int iy);

/// Dense mass matrix on interior dofs with cellwise weight w (size Nf^2, row-major cells).
Mat mass(int nf, const std::vector<double>& w);
Mat mass(int nf);
/// Dense stiffness with cellwise kappa.
Mat stiffness(int nf, const std::vector<double>& kappa);

/// Interior dofs lying strictly inside the coarse-cell box [cx0, cx1] x [cy0, cy1].
std::vector<int> box_dofs(int nc, int nf, int cx0, int cx1, int cy0, int cy1);
Mat submatrix(const Mat& a, const std::vector<int>& idx);

/// Generalized eigenpairs of (A, B) sorted ascending, B-orthonormal columns.
struct Eig {
  Vec values;
  Mat vectors;
};
Eig generalized_eig(const Mat& a, const Mat& b);

/// min 1/2 x^T A x - b^T x subject to C x = d, by a full-pivoting LU of the
/// assembled KKT matrix.
Vec kkt_solve(const Mat& a, const Vec& b, const Mat& c, const Vec& d);

/// Largest cosine between the column spans of z1 and z2 in the M inner product,
/// through QR-based M-orthonormalization.
double principal_cosine(const Mat& z1, const Mat& z2, const Mat& m);

/// Relative difference of spans: ||P1 - P2|| where Pk are the M-orthogonal
/// projectors onto span(zk).
double span_distance(const Mat& z1, const Mat& z2, const Mat& m);

/// Q1 nodal interpolant of f on interior nodes.
Vec interpolate(int nf, const std::function<double(double, double)>& f);

}  // namespace oracle
