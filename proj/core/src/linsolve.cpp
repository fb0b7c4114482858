#include "splitcem/linsolve.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/QR>

#include "splitcem/error.hpp"

namespace splitcem {

namespace {

double relative_residual(const SparseMatrix& a, const Vector& x, const Vector& b) {
  const double bn = b.norm();
  const double rn = (b - a * x).norm();
  return bn > 0.0 ? rn / bn : rn;
}

double inf_norm(const SparseMatrix& a) {
  Vector rows = Vector::Zero(a.rows());
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) rows[it.row()] += std::abs(it.value());
  return rows.size() ? rows.maxCoeff() : 0.0;
}

double inf_norm(const Matrix& a) {
  return a.size() ? a.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
}

double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

void SpdSolver::analyze(const SparseMatrix& a) {
  if (a.rows() != a.cols()) throw NumericalError("SPD solve: matrix is not square");
  ldlt_.analyzePattern(a);
  analyzed_ = true;
  factorized_ = false;
}

void SpdSolver::factorize(const SparseMatrix& a) {
  if (!analyzed_) analyze(a);
  a_ = a;
  // Diagonal equilibration removes the scaling that high coefficient contrast
  // puts into the conditioning.
  const Vector diag = a_.diagonal();
  indefinite_ = diag.size() != 0 && !(diag.minCoeff() > 0.0);
  if (indefinite_) {
    factorized_ = false;
    return;
  }
  scale_ = diag.cwiseSqrt().cwiseInverse();
  const SparseMatrix scaled = scale_.asDiagonal() * a_ * scale_.asDiagonal();
  ldlt_.factorize(scaled);
  factorized_ = ldlt_.info() == Eigen::Success;
  if (factorized_) {
    const Vector d = ldlt_.vectorD();
    indefinite_ = d.size() != 0 && !(d.minCoeff() > 0.0);
    factorized_ = !indefinite_;
  }
}

Vector SpdSolver::solve_direct(const Vector& b) const {
  return scale_.cwiseProduct(ldlt_.solve(scale_.cwiseProduct(b)));
}

Vector SpdSolver::solve(const Vector& b, double tol) const {
  if (b.size() != a_.rows()) throw NumericalError("SPD solve: right-hand side has wrong length");
  if (b.size() == 0) return Vector();
  if (indefinite_) throw NumericalError("SPD solve: matrix is not positive definite");
  if (b.squaredNorm() == 0.0) return Vector::Zero(b.size());
  Vector x;
  double res = std::numeric_limits<double>::infinity();
  if (factorized_) {
    x = solve_direct(b);
    res = relative_residual(a_, x, b);
    for (int k = 0; k < 3 && res > tol && std::isfinite(res); ++k) {
      x += solve_direct(b - a_ * x);
      res = relative_residual(a_, x, b);
    }
    if (res <= tol) return x;
  }
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                           Eigen::IncompleteCholesky<double>>
      cg;
  cg.setTolerance(tol * 0.5);
  cg.setMaxIterations(std::max<Eigen::Index>(1000, 10 * a_.rows()));
  cg.compute(a_);
  Vector y = (factorized_ && x.allFinite()) ? Vector(cg.solveWithGuess(b, x)) : Vector(cg.solve(b));
  const double res_cg = relative_residual(a_, y, b);
  if (res_cg <= tol) return y;
  std::ostringstream msg;
  msg << "SPD solve failed: relative residual " << std::min(res, res_cg) << " exceeds " << tol
      << (factorized_ ? "" : " (factorization breakdown)");
  throw NumericalError(msg.str(), std::min(res, res_cg));
}

Vector solve_spd(const SparseMatrix& a, const Vector& b, double tol) {
  SpdSolver solver(a);
  return solver.solve(b, tol);
}

EigenPairs eig_sym_generalized(const Matrix& a, const Matrix& b, int k, Spectrum which) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n || b.rows() != n || b.cols() != n)
    throw NumericalError("generalized eigensolve: dimension mismatch");
  if (k < 0 || k > n) {
    std::ostringstream msg;
    msg << "generalized eigensolve: requested " << k << " pairs of a " << n << "-dimensional problem";
    throw NumericalError(msg.str());
  }
  EigenPairs out;
  if (n == 0 || k == 0) {
    out.values.resize(0);
    out.vectors.resize(n, 0);
    return out;
  }
  const Matrix bs = 0.5 * (b + b.transpose());
  Eigen::LLT<Matrix> llt(bs);
  if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().minCoeff() > 0.0))
    throw NumericalError("generalized eigensolve: B is not symmetric positive definite");
  // C = L^{-1} A L^{-T}
  Matrix c = llt.matrixL().solve(0.5 * (a + a.transpose()));
  c = llt.matrixL().solve(c.transpose()).transpose();
  c = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(c);
  if (es.info() != Eigen::Success) throw NumericalError("generalized eigensolve did not converge");
  const int start = which == Spectrum::smallest ? 0 : n - k;
  out.values = es.eigenvalues().segment(start, k);
  out.vectors = llt.matrixU().solve(es.eigenvectors().middleCols(start, k));
  // One B-normalization pass against rounding in the back substitution.
  for (int j = 0; j < k; ++j) {
    const double nrm = std::sqrt(out.vectors.col(j).dot(bs * out.vectors.col(j)));
    out.vectors.col(j) /= nrm;
  }
  return out;
}

EigenCheck check_eigenpairs(const Matrix& a, const Matrix& b, const EigenPairs& pairs) {
  EigenCheck check;
  const double an = a.norm();
  const double bn = b.norm();
  const auto k = pairs.values.size();
  for (Eigen::Index j = 0; j < k; ++j) {
    const Vector v = pairs.vectors.col(j);
    const double lam = pairs.values[j];
    const double r = (a * v - lam * (b * v)).norm() / ((an + std::abs(lam) * bn) * v.norm());
    check.max_residual = std::max(check.max_residual, r);
  }
  if (k > 0) {
    const Matrix g = pairs.vectors.transpose() * b * pairs.vectors;
    check.max_orthogonality = (g - Matrix::Identity(k, k)).cwiseAbs().maxCoeff();
  }
  return check;
}

double largest_generalized_eigenvalue(const SparseMatrix& a, const SparseMatrix& b, double tol,
                                      int max_iterations) {
  const int n = static_cast<int>(a.rows());
  if (n == 0) throw NumericalError("largest eigenvalue of an empty operator");
  SpdSolver b_solver(b);
  const int m_max = std::min(n, max_iterations);

  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector q(n);
  for (int i = 0; i < n; ++i) q[i] = dist(rng);

  Matrix qs(n, m_max);   // B-orthonormal Lanczos vectors
  Matrix bqs(n, m_max);  // B * qs
  std::vector<double> alpha, beta;
  Vector bq = b * q;
  q /= std::sqrt(q.dot(bq));
  bq = b * q;

  double theta = 0.0;
  for (int j = 0; j < m_max; ++j) {
    qs.col(j) = q;
    bqs.col(j) = bq;
    const Vector aq = a * q;
    Vector w = b_solver.solve_direct(aq);
    alpha.push_back(q.dot(aq));
    // Full reorthogonalization in the B inner product, applied twice.
    for (int pass = 0; pass < 2; ++pass) {
      const Vector coeff = bqs.leftCols(j + 1).transpose() * w;
      w.noalias() -= qs.leftCols(j + 1) * coeff;
    }
    Vector bw = b * w;
    const double bnext = std::sqrt(std::max(0.0, w.dot(bw)));

    Eigen::SelfAdjointEigenSolver<Matrix> tri;
    Matrix t = Matrix::Zero(j + 1, j + 1);
    for (int i = 0; i <= j; ++i) {
      t(i, i) = alpha[i];
      if (i < j) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    tri.compute(t);
    theta = tri.eigenvalues()[j];
    const double resid = std::abs(bnext * tri.eigenvectors()(j, j));
    if (resid <= tol * std::abs(theta) || bnext <= 1e-14 * std::abs(theta) || j + 1 == n) return theta;
    beta.push_back(bnext);
    q = w / bnext;
    bq = bw / bnext;
  }
  std::ostringstream msg;
  msg << "Lanczos did not converge in " << m_max << " iterations";
  throw NumericalError(msg.str());
}

SaddleSolver::SaddleSolver(const SparseMatrix& primal_operator) : a_(primal_operator) {
  a_solver_.compute(a_);
  a_norm_ = inf_norm(a_);
  offsets_ = {0};
}

void SaddleSolver::set_constraints(std::vector<ConstraintBlock> blocks) {
  const int n = num_primal();
  int m = 0;
  for (const auto& blk : blocks) {
    if (blk.rows.cols() != n && blk.rows.rows() > 0)
      throw NumericalError("saddle system: constraint family '" + blk.family + "' has wrong width");
    m += static_cast<int>(blk.rows.rows());
  }
  families_.clear();
  offsets_ = {0};
  c_.resize(m, n);
  row_scale_.resize(m);
  Matrix original(m, n);
  int row = 0;
  for (const auto& blk : blocks) {
    const int mk = static_cast<int>(blk.rows.rows());
    original.middleRows(row, mk) = blk.rows;
    for (int i = 0; i < mk; ++i) {
      const double nrm = blk.rows.row(i).norm();
      if (!(nrm > 0.0))
        throw NumericalError("saddle system: constraint family '" + blk.family +
                             "' is rank deficient (zero row)");
      row_scale_[row + i] = 1.0 / nrm;
      c_.row(row + i) = blk.rows.row(i) / nrm;
    }
    row += mk;
    families_.push_back(blk.family);
    offsets_.push_back(row);
    // Cumulative rank test: the stack up to this family must have full row rank.
    Eigen::ColPivHouseholderQR<Matrix> qr(c_.topRows(row).transpose());
    qr.setThreshold(1e-10);
    if (qr.rank() < row) {
      std::ostringstream msg;
      msg << "saddle system: constraint family '" << blk.family << "' is rank deficient (rank "
          << qr.rank() << " of " << row << " stacked rows)";
      throw NumericalError(msg.str());
    }
  }
  c_norm_ = inf_norm(original);
  ainv_ct_.resize(n, m);
  // The solve() refinement and the final KKT residual check control accuracy.
  for (int i = 0; i < m; ++i) {
    const Vector ci = c_.row(i).transpose();
    Vector y = a_solver_.solve_direct(ci);
    y += a_solver_.solve_direct(ci - a_ * y);
    ainv_ct_.col(i) = y;
  }
  Matrix schur = c_ * ainv_ct_;
  schur = 0.5 * (schur + schur.transpose());
  schur_.compute(schur);
  if (m > 0 && schur_.info() != Eigen::Success)
    throw NumericalError("saddle system: Schur complement is not positive definite");
}

void SaddleSolver::correct(const Vector& r1, const Vector& r2, Vector& dx, Vector& dmu) const {
  const Vector x0 = a_solver_.solve_direct(r1);
  if (c_.rows() == 0) {
    dx = x0;
    dmu.resize(0);
    return;
  }
  dmu = schur_.solve(c_ * x0 - r2);
  dx = x0 - ainv_ct_ * dmu;
}

SaddleSolution SaddleSolver::solve(const Vector& primal_rhs,
                                   const std::vector<Vector>& constraint_rhs) const {
  const int n = num_primal();
  const int m = num_constraints();
  if (primal_rhs.size() != n) throw NumericalError("saddle system: primal rhs has wrong length");
  if (constraint_rhs.size() != families_.size())
    throw NumericalError("saddle system: one rhs per constraint family is required");
  Vector d(m);      // original scaling
  Vector d_s(m);    // normalized rows
  for (std::size_t f = 0; f < families_.size(); ++f) {
    const int off = offsets_[f];
    const int mk = offsets_[f + 1] - off;
    if (constraint_rhs[f].size() != mk)
      throw NumericalError("saddle system: rhs of family '" + families_[f] + "' has wrong length");
    d.segment(off, mk) = constraint_rhs[f];
  }
  d_s = row_scale_.cwiseProduct(d);

  Vector x, mu;
  correct(primal_rhs, d_s, x, mu);
  for (int it = 0; it < 2; ++it) {
    const Vector r1 = primal_rhs - a_ * x - c_.transpose() * mu;
    const Vector r2 = d_s - c_ * x;
    Vector dx, dmu;
    correct(r1, r2, dx, dmu);
    x += dx;
    mu += dmu;
  }

  SaddleSolution sol;
  const Vector mu_orig = row_scale_.cwiseProduct(mu);
  sol.multipliers.reserve(families_.size());
  for (std::size_t f = 0; f < families_.size(); ++f)
    sol.multipliers.push_back(mu_orig.segment(offsets_[f], offsets_[f + 1] - offsets_[f]));
  // Residuals in the original row scaling.
  const Vector rc = c_ * x - d_s;
  Vector rc_orig = rc.cwiseQuotient(row_scale_);
  const double xn = inf_norm(x);
  sol.constraint_residual = m ? inf_norm(rc_orig) / (c_norm_ * xn + inf_norm(d) + 1e-300) : 0.0;
  const Vector rs = primal_rhs - a_ * x - c_.transpose() * mu;
  sol.stationarity_residual =
      inf_norm(rs) / (a_norm_ * xn + c_norm_ * inf_norm(mu_orig) + inf_norm(primal_rhs) + 1e-300);
  sol.primal = std::move(x);
  return sol;
}

SaddleSolution solve_saddle(const SaddleSystem& system) {
  SaddleSolver solver(system.primal_operator);
  std::vector<Vector> rhs;
  rhs.reserve(system.constraints.size());
  for (const auto& blk : system.constraints) {
    if (blk.rhs.size() != blk.rows.rows())
      throw NumericalError("saddle system: rhs of family '" + blk.family + "' has wrong length");
    rhs.push_back(blk.rhs);
  }
  solver.set_constraints(system.constraints);
  SaddleSolution sol = solver.solve(system.primal_rhs, rhs);
  if (!(sol.constraint_residual <= 1e-9) || !(sol.stationarity_residual <= 1e-9)) {
    std::ostringstream msg;
    msg << "saddle solve residuals too large: constraint " << sol.constraint_residual
        << ", stationarity " << sol.stationarity_residual;
    throw NumericalError(msg.str(), std::max(sol.constraint_residual, sol.stationarity_residual));
  }
  return sol;
}

}  // namespace splitcem
