#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "splitcem/assembly.hpp"
#include "splitcem/galerkin.hpp"
#include "splitcem/linsolve.hpp"
#include "splitcem/problems.hpp"
#include "splitcem/spaces.hpp"

namespace splitcem {

struct NewtonConfig {
  int max_iterations = 25;
  double atol = 1e-10;
  double rtol = 1e-10;
  double divergence = 1e4;  // abort when ||r|| > divergence * ||r0||

  /// Throws ConfigError unless tolerances are positive and max_iterations >= 1.
  void validate() const;
};

struct NewtonResult {
  Vector x;
  int iterations = 0;
  double residual = 0.0;
  double initial_residual = 0.0;
  std::vector<double> history;  // ||r|| before the first and after every update
};

using ResidualFn = std::function<Vector(const Vector&)>;
/// Returns the Newton correction J(x)^{-1} r.
using CorrectionFn = std::function<Vector(const Vector& x, const Vector& r)>;
using DenseJacobianFn = std::function<Matrix(const Vector&)>;

/// x <- x - J(x)^{-1} R(x), converged when ||R|| <= atol or ||R|| <= rtol ||R(x0)||.
/// Throws ConvergenceError on the iteration cap, a non-finite residual or
/// the divergence guard.
NewtonResult newton_solve(const ResidualFn& residual, const CorrectionFn& correction, Vector x0,
                          const NewtonConfig& cfg);
NewtonResult newton_solve(const ResidualFn& residual, const DenseJacobianFn& jacobian, Vector x0,
                          const NewtonConfig& cfg);

/// ||J d - (R(x + eps d) - R(x - eps d)) / (2 eps)|| / ||J d||
double jacobian_fd_error(const ResidualFn& residual, const Vector& jd, const Vector& x,
                         const Vector& d, double eps = 1e-6);

/// Fine-grid operators of one problem, shared by every scheme of a run.
class FineProblem {
 public:
  FineProblem(const GridHierarchy& grid, const ProblemSpec& problem);

  const GridHierarchy& grid() const noexcept { return *grid_; }
  const ProblemSpec& problem() const noexcept { return *problem_; }
  const Assembler& assembler() const noexcept { return assembler_; }
  const SparseMatrix& mass() const noexcept { return mass_; }
  /// Linear stiffness int kappa grad . grad
  const SparseMatrix& stiffness() const noexcept { return stiffness_; }
  int dofs() const noexcept { return grid_->num_dofs(); }

  bool linear_diffusion() const noexcept { return problem_->alpha.is_linear(); }
  bool affine_reaction() const noexcept { return problem_->reaction.affine(); }

  /// Diffusion matrix with alpha frozen at `frozen`.
  SparseMatrix diffusion_matrix(const Vector& frozen) const;
  /// kappa alpha(frozen) at the quadrature points.
  Vector diffusion_points(const Vector& frozen) const;
  /// A(frozen) u
  Vector diffusion_action(const Vector& frozen, const Vector& u) const;

  Vector reaction(const Vector& u) const;
  SparseMatrix reaction_jacobian(const Vector& u) const;
  Vector reaction_derivative_points(const Vector& u) const;

  double l2_norm(const Vector& u) const { return std::sqrt(std::max(0.0, u.dot(mass_ * u))); }
  /// (int kappa |grad u|^2)^{1/2} with the linear kappa.
  double energy_norm(const Vector& u) const { return std::sqrt(std::max(0.0, u.dot(stiffness_ * u))); }
  /// F(u): 1/2 int kappa alpha(u) |grad u|^2 (a diagnostic when alpha is nonlinear).
  double diffusion_energy(const Vector& u) const;
  /// G(u) = int E2(u)
  double reaction_energy(const Vector& u) const;

 private:
  const GridHierarchy* grid_;
  const ProblemSpec* problem_;
  Assembler assembler_;
  SparseMatrix mass_;
  SparseMatrix stiffness_;
};

enum class ReactionMode {
  fully_explicit,  // g(u1^n + u2^n)
  semi_implicit,   // g(u1^{n+1} + u2^n)
};
ReactionMode parse_reaction_mode(const std::string& name);
std::string to_string(ReactionMode m);

/// First step of the partially explicit scheme, where no lagged increments exist.
enum class PexpStart {
  coupled,  // one implicit step on V_H,1 + V_H,2 with the full reduced mass
  lagged,   // u^{-1} = u^0, so both cross increments vanish
};
PexpStart parse_pexp_start(const std::string& name);
std::string to_string(PexpStart s);

/// Time-stepping state. Fine schemes use only u; reduced schemes also keep
/// coordinates c1 (in V_H,1 or the single reduced space) and c2 (in V_H,2),
/// with u = Z1 c1 + Z2 c2.
struct SchemeState {
  int step = 0;
  double time = 0.0;
  Vector u, u_prev;
  Vector c1, c2, c1_prev, c2_prev;
  int newton_iterations = 0;
  double newton_residual = 0.0;
  std::vector<double> newton_history;
};

class Stepper {
 public:
  Stepper(const FineProblem& fine, double dt, NewtonConfig newton);
  virtual ~Stepper() = default;

  virtual std::string name() const = 0;
  /// State at step 0 from a fine initial field; the previous level equals the current one.
  virtual SchemeState initial_state(const Vector& u0) const = 0;
  virtual void advance(SchemeState& state) = 0;

  double dt() const noexcept { return dt_; }
  const FineProblem& fine() const noexcept { return *fine_; }
  const NewtonConfig& newton() const noexcept { return newton_; }

 protected:
  void finish_step(SchemeState& s) const;

  const FineProblem* fine_;
  double dt_;
  NewtonConfig newton_;
};

/// Backward Euler on the fine grid: Newton for linear diffusion, Picard-Newton
/// (diffusion frozen at the previous iterate) otherwise.
class FineBackwardEuler : public Stepper {
 public:
  using Stepper::Stepper;
  std::string name() const override { return "fine_be"; }
  SchemeState initial_state(const Vector& u0) const override;
  void advance(SchemeState& state) override;

  /// M (u - u_old) + dt A(u) u + dt G(u)
  Vector residual(const Vector& u, const Vector& u_old) const;
  /// M + dt A(u) + dt JG(u)
  SparseMatrix jacobian(const Vector& u) const;

 private:
  SpdSolver solver_;
  bool cached_ = false;
};

/// u^{n+1} = u^n - dt M^{-1} (A(u^n) u^n + G(u^n))
class FineForwardEuler : public Stepper {
 public:
  FineForwardEuler(const FineProblem& fine, double dt, NewtonConfig newton = {});
  std::string name() const override { return "fine_fe"; }
  SchemeState initial_state(const Vector& u0) const override;
  void advance(SchemeState& state) override;

 private:
  SpdSolver mass_solver_;
};

/// (M + dt A(u^n)) u^{n+1} = M u^n - dt G(u^n)
class FineImex : public Stepper {
 public:
  FineImex(const FineProblem& fine, double dt, NewtonConfig newton = {});
  std::string name() const override { return "fine_imex"; }
  SchemeState initial_state(const Vector& u0) const override;
  void advance(SchemeState& state) override;

 private:
  SpdSolver solver_;
  bool cached_ = false;
};

/// Galerkin restriction of backward Euler to span(Z); the initial value is the
/// L2 projection of u0.
class ImplicitReduced : public Stepper {
 public:
  ImplicitReduced(const FineProblem& fine, SparseMatrix basis, double dt, NewtonConfig newton,
                  std::string label = "implicit_reduced");
  std::string name() const override { return label_; }
  SchemeState initial_state(const Vector& u0) const override;
  void advance(SchemeState& state) override;

  const Matrix& reduced_mass() const noexcept { return mass_; }
  Vector residual(const Vector& c, const Vector& c_old) const;
  Matrix jacobian(const Vector& c) const;

 private:
  SparseMatrix z_;
  GalerkinProjector projector_;
  Matrix mass_;
  Matrix stiffness_;  // linear diffusion only
  Eigen::LLT<Matrix> cached_;
  bool has_cache_ = false;
  std::string label_;
};

/// Partially explicit splitting: implicit solve in V_H,1 with lagged coupling
/// to V_H,2, then one mass solve in V_H,2.
class PartiallyExplicit : public Stepper {
 public:
  PartiallyExplicit(const FineProblem& fine, SparseMatrix z1, SparseMatrix z2, double dt,
                    NewtonConfig newton, ReactionMode mode, PexpStart start = PexpStart::coupled);
  std::string name() const override { return "pexp"; }
  SchemeState initial_state(const Vector& u0) const override;
  void advance(SchemeState& state) override;

  ReactionMode reaction_mode() const noexcept { return mode_; }
  PexpStart start() const noexcept { return start_; }
  int size1() const noexcept { return static_cast<int>(z1_.cols()); }
  int size2() const noexcept { return static_cast<int>(z2_.cols()); }
  const SparseMatrix& z1() const noexcept { return z1_; }
  const SparseMatrix& z2() const noexcept { return z2_; }

  /// Residual of the V_H,1 equation for a trial c1 given the state at level n.
  Vector residual1(const Vector& c1, const SchemeState& s) const;
  Matrix jacobian1(const Vector& c1, const SchemeState& s) const;
  /// Residual and Jacobian of the coupled first step in [c1; c2] coordinates.
  Vector coupled_residual(const Vector& c, const SchemeState& s) const;
  Matrix coupled_jacobian(const Vector& c) const;

 private:
  void advance_coupled(SchemeState& s);

  SparseMatrix z1_, z2_, z_;
  GalerkinProjector projector1_, projector_;
  Matrix m11_, m12_, m21_, m22_;
  Eigen::LLT<Matrix> m22_llt_;
  Matrix a11_;  // linear diffusion only
  Eigen::LLT<Matrix> cached_;
  bool has_cache_ = false;
  Matrix full_mass_;
  Eigen::LLT<Matrix> full_mass_llt_;  // L2 projection of the initial value
  ReactionMode mode_;
  PexpStart start_;
};

// Single-step forms of the schemes.
SchemeState step_backward_euler_fine(SchemeState state, FineBackwardEuler& scheme);
SchemeState step_forward_euler_fine(SchemeState state, FineForwardEuler& scheme);
SchemeState step_implicit_reduced(SchemeState state, ImplicitReduced& scheme);
SchemeState step_partially_explicit(SchemeState state, PartiallyExplicit& scheme);

/// Solves a dense SPD system by Cholesky, falling back to pivoted LU.
Vector dense_solve(const Matrix& a, const Vector& b);

/// Builds the stepper for a scheme name; reduced schemes need `spaces`.
std::unique_ptr<Stepper> make_stepper(Scheme scheme, const FineProblem& fine,
                                      const MultiscaleSpaces* spaces, double dt,
                                      const NewtonConfig& newton, ReactionMode mode,
                                      PexpStart start = PexpStart::coupled);

}  // namespace splitcem
