#pragma once

#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "splitcem/types.hpp"

namespace splitcem {

/// Sparse SPD solver: LDL^T factorization with iterative refinement, and a
/// preconditioned CG fallback when the refined residual misses the tolerance.
/// The symbolic analysis is kept, so matrices sharing a pattern can be
/// refactorized cheaply.
class SpdSolver {
 public:
  SpdSolver() = default;
  explicit SpdSolver(const SparseMatrix& a) { compute(a); }

  void analyze(const SparseMatrix& a);
  /// Numeric factorization; `a` must have the analyzed pattern.
  void factorize(const SparseMatrix& a);
  void compute(const SparseMatrix& a) {
    analyze(a);
    factorize(a);
  }
  bool analyzed() const noexcept { return analyzed_; }

  /// ||A x - b|| / ||b|| <= tol or NumericalError carrying the achieved residual.
  Vector solve(const Vector& b, double tol = 1e-10) const;
  /// Direct solve without residual control (inner loops with their own checks).
  Vector solve_direct(const Vector& b) const;
  const SparseMatrix& matrix() const noexcept { return a_; }

 private:
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;  // of S A S with S = diag(A)^{-1/2}
  SparseMatrix a_;
  Vector scale_;
  bool analyzed_ = false;
  bool factorized_ = false;
  bool indefinite_ = false;  // LDL^T produced a nonpositive pivot
};

/// One-shot SPD solve.
Vector solve_spd(const SparseMatrix& a, const Vector& b, double tol = 1e-10);

enum class Spectrum { smallest, largest };

struct EigenPairs {
  Vector values;   // ascending
  Matrix vectors;  // B-orthonormal columns
};

/// Dense symmetric-definite generalized eigenproblem A v = lambda B v.
/// Returns k pairs from the requested end of the spectrum, ascending.
/// Throws NumericalError when B is not SPD.
EigenPairs eig_sym_generalized(const Matrix& a, const Matrix& b, int k,
                               Spectrum which = Spectrum::smallest);

struct EigenCheck {
  double max_residual = 0.0;       // max ||Av - lambda Bv|| / (||A|| + |lambda| ||B||)
  double max_orthogonality = 0.0;  // max |v_i^T B v_j - delta_ij|
};
EigenCheck check_eigenpairs(const Matrix& a, const Matrix& b, const EigenPairs& pairs);

/// Largest eigenvalue of A v = lambda B v for sparse symmetric A and SPD B,
/// by B-orthogonal Lanczos with full reorthogonalization.
double largest_generalized_eigenvalue(const SparseMatrix& a, const SparseMatrix& b,
                                      double tol = 1e-9, int max_iterations = 400);

/// One family of linear constraints C x = d.
struct ConstraintBlock {
  std::string family;
  Matrix rows;  // m x n
  Vector rhs;   // m
};

/// min 1/2 x^T A x - b^T x subject to every constraint block, i.e.
///   [ A  C^T ] [x ]   [b]
///   [ C   0  ] [mu] = [d]
struct SaddleSystem {
  SparseMatrix primal_operator;
  Vector primal_rhs;
  std::vector<ConstraintBlock> constraints;
};

struct SaddleSolution {
  Vector primal;
  std::vector<Vector> multipliers;  // one per constraint block
  double constraint_residual = 0.0;    // ||Cx - d|| / (||C|| ||x|| + ||d||), inf-norms
  double stationarity_residual = 0.0;  // ||b - Ax - C^T mu|| / (||A|| ||x|| + ||C|| ||mu|| + ||b||)
};

/// Factor-once saddle solver for many right-hand sides sharing the primal
/// operator and the constraint rows. The primal block is factorized sparsely
/// and the constraints are eliminated through a dense Schur complement.
class SaddleSolver {
 public:
  explicit SaddleSolver(const SparseMatrix& primal_operator);

  /// Registers the constraint families. Each row is normalized internally;
  /// throws NumericalError naming the first family that makes the stacked
  /// rows rank deficient (column-pivoted QR, relative tolerance 1e-10).
  void set_constraints(std::vector<ConstraintBlock> blocks);

  /// Uses the rows registered by set_constraints; `constraint_rhs` holds one
  /// vector per family.
  SaddleSolution solve(const Vector& primal_rhs, const std::vector<Vector>& constraint_rhs) const;

  int num_primal() const noexcept { return static_cast<int>(a_.rows()); }
  int num_constraints() const noexcept { return static_cast<int>(c_.rows()); }

 private:
  void correct(const Vector& r1, const Vector& r2, Vector& dx, Vector& dmu) const;

  SparseMatrix a_;
  SpdSolver a_solver_;
  std::vector<std::string> families_;
  std::vector<int> offsets_;  // row offsets per family, size families + 1
  Matrix c_;                  // normalized rows
  Vector row_scale_;          // normalized = scale * original
  Matrix ainv_ct_;
  Eigen::LLT<Matrix> schur_;
  double a_norm_ = 0.0;
  double c_norm_ = 0.0;  // original rows
};

/// Throws NumericalError when post-solve residuals exceed 1e-9.
SaddleSolution solve_saddle(const SaddleSystem& system);

}  // namespace splitcem
