#include "splitcem/steppers.hpp"

#include <cmath>
#include <sstream>

#include "splitcem/error.hpp"

namespace splitcem {

void NewtonConfig::validate() const {
  if (!(atol > 0.0) || !(rtol > 0.0)) throw ConfigError("Newton tolerances must be positive");
  if (max_iterations < 1) throw ConfigError("Newton needs at least one iteration");
  if (!(divergence > 1.0)) throw ConfigError("Newton divergence factor must exceed 1");
}

NewtonResult newton_solve(const ResidualFn& residual, const CorrectionFn& correction, Vector x0,
                          const NewtonConfig& cfg) {
  NewtonResult out;
  out.x = std::move(x0);
  Vector r = residual(out.x);
  double rn = r.norm();
  out.initial_residual = rn;
  out.residual = rn;
  out.history.push_back(rn);
  if (!std::isfinite(rn)) throw ConvergenceError("Newton: non-finite initial residual", rn, 0);
  if (rn <= cfg.atol) return out;
  const double r0 = rn;
  for (int m = 1; m <= cfg.max_iterations; ++m) {
    out.x -= correction(out.x, r);
    r = residual(out.x);
    rn = r.norm();
    out.iterations = m;
    out.residual = rn;
    out.history.push_back(rn);
    if (!std::isfinite(rn)) throw ConvergenceError("Newton: non-finite residual", rn, m);
    if (rn <= cfg.atol || rn <= cfg.rtol * r0) return out;
    if (rn > cfg.divergence * r0) {
      std::ostringstream msg;
      msg << "Newton diverged: residual " << rn << " after " << m << " iterations (initial " << r0 << ")";
      throw ConvergenceError(msg.str(), rn, m);
    }
  }
  std::ostringstream msg;
  msg << "Newton did not converge in " << cfg.max_iterations << " iterations, residual " << rn;
  throw ConvergenceError(msg.str(), rn, cfg.max_iterations);
}

NewtonResult newton_solve(const ResidualFn& residual, const DenseJacobianFn& jacobian, Vector x0,
                          const NewtonConfig& cfg) {
  return newton_solve(
      residual, [&](const Vector& x, const Vector& r) { return dense_solve(jacobian(x), r); },
      std::move(x0), cfg);
}

double jacobian_fd_error(const ResidualFn& residual, const Vector& jd, const Vector& x,
                         const Vector& d, double eps) {
  const Vector fd = (residual(x + eps * d) - residual(x - eps * d)) / (2.0 * eps);
  const double scale = jd.norm();
  return scale > 0.0 ? (jd - fd).norm() / scale : fd.norm();
}

Vector dense_solve(const Matrix& a, const Vector& b) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() == Eigen::Success) return llt.solve(b);
  Eigen::PartialPivLU<Matrix> lu(a);
  Vector x = lu.solve(b);
  if (!x.allFinite()) throw NumericalError("dense solve: singular matrix");
  return x;
}

// ---------------------------------------------------------------------------

FineProblem::FineProblem(const GridHierarchy& grid, const ProblemSpec& problem)
    : grid_(&grid), problem_(&problem), assembler_(grid) {
  problem.validate(grid);
  mass_ = assembler_.mass();
  stiffness_ = assembler_.stiffness(problem.kappa);
}

SparseMatrix FineProblem::diffusion_matrix(const Vector& frozen) const {
  if (linear_diffusion()) return stiffness_;
  return assembler_.stiffness(problem_->kappa, frozen, problem_->alpha);
}

Vector FineProblem::diffusion_points(const Vector& frozen) const {
  if (!linear_diffusion()) return assembler_.diffusion_coefficient(problem_->kappa, frozen, problem_->alpha);
  const int ne = grid_->num_fine_elements();
  Vector c(4 * ne);
  for (int e = 0; e < ne; ++e) c.segment<4>(4 * e).setConstant(problem_->kappa[e]);
  return c;
}

Vector FineProblem::diffusion_action(const Vector& frozen, const Vector& u) const {
  if (linear_diffusion()) return stiffness_ * u;
  return assembler_.stiffness(problem_->kappa, frozen, problem_->alpha) * u;
}

Vector FineProblem::reaction(const Vector& u) const {
  return assembler_.reaction_residual(problem_->reaction, u);
}

SparseMatrix FineProblem::reaction_jacobian(const Vector& u) const {
  return assembler_.reaction(problem_->reaction, u).jacobian;
}

Vector FineProblem::reaction_derivative_points(const Vector& u) const {
  return assembler_.reaction_derivative(problem_->reaction, u);
}

double FineProblem::diffusion_energy(const Vector& u) const {
  return assembler_.diffusion_energy(problem_->kappa, u, problem_->alpha);
}

double FineProblem::reaction_energy(const Vector& u) const {
  return assembler_.reaction_energy(problem_->reaction, u);
}

ReactionMode parse_reaction_mode(const std::string& name) {
  if (name == "fully_explicit") return ReactionMode::fully_explicit;
  if (name == "semi_implicit") return ReactionMode::semi_implicit;
  throw ConfigError("unknown reaction mode '" + name + "' (valid: fully_explicit, semi_implicit)");
}

std::string to_string(ReactionMode m) {
  return m == ReactionMode::fully_explicit ? "fully_explicit" : "semi_implicit";
}

PexpStart parse_pexp_start(const std::string& name) {
  if (name == "coupled") return PexpStart::coupled;
  if (name == "lagged") return PexpStart::lagged;
  throw ConfigError("unknown partially explicit start '" + name + "' (valid: coupled, lagged)");
}

std::string to_string(PexpStart s) { return s == PexpStart::coupled ? "coupled" : "lagged"; }

// ---------------------------------------------------------------------------

Stepper::Stepper(const FineProblem& fine, double dt, NewtonConfig newton)
    : fine_(&fine), dt_(dt), newton_(newton) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  newton_.validate();
}

void Stepper::finish_step(SchemeState& s) const {
  ++s.step;
  s.time = s.step * dt_;
}

namespace {

SchemeState fine_initial(const Vector& u0) {
  SchemeState s;
  s.u = u0;
  s.u_prev = u0;
  return s;
}

void record(SchemeState& s, const NewtonResult& r) {
  s.newton_iterations = r.iterations;
  s.newton_residual = r.residual;
  s.newton_history = r.history;
}

template <class Fn>
NewtonResult with_step_context(const SchemeState& s, const std::string& scheme, Fn&& fn) {
  try {
    return fn();
  } catch (const ConvergenceError& e) {
    std::ostringstream msg;
    msg << scheme << " step " << s.step + 1 << ": " << e.what();
    throw ConvergenceError(msg.str(), e.residual(), e.iterations());
  } catch (const NumericalError& e) {
    std::ostringstream msg;
    msg << scheme << " step " << s.step + 1 << ": " << e.what();
    throw NumericalError(msg.str(), e.residual());
  }
}

}  // namespace

SchemeState FineBackwardEuler::initial_state(const Vector& u0) const { return fine_initial(u0); }

Vector FineBackwardEuler::residual(const Vector& u, const Vector& u_old) const {
  const FineProblem& f = *fine_;
  return f.mass() * (u - u_old) + dt_ * f.diffusion_action(u, u) + dt_ * f.reaction(u);
}

SparseMatrix FineBackwardEuler::jacobian(const Vector& u) const {
  const FineProblem& f = *fine_;
  SparseMatrix j = f.mass() + dt_ * f.diffusion_matrix(u);
  if (f.problem().reaction.kind() != ReactionKind::none) j += dt_ * f.reaction_jacobian(u);
  return j;
}

void FineBackwardEuler::advance(SchemeState& s) {
  const FineProblem& f = *fine_;
  const bool constant = f.linear_diffusion() && f.affine_reaction();
  const Vector u_old = s.u;
  const NewtonResult r = with_step_context(s, name(), [&] {
    return newton_solve(
        [&](const Vector& u) { return residual(u, u_old); },
        [&](const Vector& u, const Vector& res) -> Vector {
          if (!constant || !cached_) {
            const SparseMatrix j = jacobian(u);
            if (!solver_.analyzed()) solver_.analyze(j);
            solver_.factorize(j);
            cached_ = constant;
          }
          return solver_.solve(res);
        },
        u_old, newton_);
  });
  record(s, r);
  s.u_prev = u_old;
  s.u = r.x;
  finish_step(s);
}

FineForwardEuler::FineForwardEuler(const FineProblem& fine, double dt, NewtonConfig newton)
    : Stepper(fine, dt, newton), mass_solver_(fine.mass()) {}

SchemeState FineForwardEuler::initial_state(const Vector& u0) const { return fine_initial(u0); }

void FineForwardEuler::advance(SchemeState& s) {
  const FineProblem& f = *fine_;
  const Vector rhs = f.diffusion_action(s.u, s.u) + f.reaction(s.u);
  s.u_prev = s.u;
  if (s.u.allFinite() && rhs.allFinite()) {
    // Growth, not a solver failure, is the expected instability signal here.
    s.u = s.u - dt_ * mass_solver_.solve_direct(rhs);
  } else {
    s.u = Vector::Constant(s.u.size(), std::numeric_limits<double>::infinity());
  }
  s.newton_iterations = 0;
  s.newton_residual = 0.0;
  s.newton_history.clear();
  finish_step(s);
}

FineImex::FineImex(const FineProblem& fine, double dt, NewtonConfig newton) : Stepper(fine, dt, newton) {}

SchemeState FineImex::initial_state(const Vector& u0) const { return fine_initial(u0); }

void FineImex::advance(SchemeState& s) {
  const FineProblem& f = *fine_;
  if (!cached_ || !f.linear_diffusion()) {
    const SparseMatrix j = f.mass() + dt_ * f.diffusion_matrix(s.u);
    if (!solver_.analyzed()) solver_.analyze(j);
    solver_.factorize(j);
    cached_ = true;
  }
  const Vector rhs = f.mass() * s.u - dt_ * f.reaction(s.u);
  s.u_prev = s.u;
  s.u = solver_.solve(rhs);
  s.newton_iterations = 1;
  finish_step(s);
}

// ---------------------------------------------------------------------------

namespace {

Vector l2_projection(const FineProblem& f, const SparseMatrix& z, const Eigen::LLT<Matrix>& mass_llt,
                     const Vector& u0) {
  if (z.cols() == 0) return Vector();
  return mass_llt.solve(z.transpose() * (f.mass() * u0));
}

SparseMatrix checked_concatenation(const FineProblem& fine, SparseMatrix& z1, SparseMatrix& z2) {
  if (z1.rows() != fine.dofs() || (z2.cols() > 0 && z2.rows() != fine.dofs()))
    throw ConfigError("partially explicit bases do not match the fine grid");
  if (z1.cols() == 0) throw ConfigError("partially explicit scheme needs a nonempty V_H,1");
  if (z2.cols() == 0) z2.resize(fine.dofs(), 0);
  return concatenate(z1, z2);
}

}  // namespace

ImplicitReduced::ImplicitReduced(const FineProblem& fine, SparseMatrix basis, double dt,
                                 NewtonConfig newton, std::string label)
    : Stepper(fine, dt, newton),
      z_(std::move(basis)),
      projector_(fine.assembler(), z_),
      label_(std::move(label)) {
  if (z_.rows() != fine.dofs()) throw ConfigError("reduced basis does not match the fine grid");
  if (z_.cols() == 0) throw ConfigError("reduced scheme '" + label_ + "' needs a nonempty basis");
  mass_ = projector_.mass(Vector::Ones(4 * fine.grid().num_fine_elements()));
  if (fine.linear_diffusion()) stiffness_ = projector_.stiffness(fine.diffusion_points(Vector()));
}

SchemeState ImplicitReduced::initial_state(const Vector& u0) const {
  SchemeState s;
  Eigen::LLT<Matrix> llt(mass_);
  if (llt.info() != Eigen::Success) throw NumericalError("reduced mass matrix is not SPD");
  s.c1 = l2_projection(*fine_, z_, llt, u0);
  s.c1_prev = s.c1;
  s.u = z_ * s.c1;
  s.u_prev = s.u;
  return s;
}

Vector ImplicitReduced::residual(const Vector& c, const Vector& c_old) const {
  const FineProblem& f = *fine_;
  const Vector u = z_ * c;
  Vector r = mass_ * (c - c_old);
  if (f.linear_diffusion())
    r += dt_ * (stiffness_ * c);
  else
    r += dt_ * (z_.transpose() * f.diffusion_action(u, u));
  if (f.problem().reaction.kind() != ReactionKind::none) r += dt_ * (z_.transpose() * f.reaction(u));
  return r;
}

Matrix ImplicitReduced::jacobian(const Vector& c) const {
  const FineProblem& f = *fine_;
  const Vector u = z_ * c;
  Matrix j = mass_;
  if (f.linear_diffusion())
    j += dt_ * stiffness_;
  else
    j += dt_ * projector_.stiffness(f.diffusion_points(u));
  if (f.problem().reaction.kind() != ReactionKind::none)
    j += dt_ * projector_.mass(f.reaction_derivative_points(u));
  return j;
}

void ImplicitReduced::advance(SchemeState& s) {
  const FineProblem& f = *fine_;
  const bool constant = f.linear_diffusion() && f.affine_reaction();
  const Vector c_old = s.c1;
  const NewtonResult r = with_step_context(s, name(), [&] {
    return newton_solve(
        [&](const Vector& c) { return residual(c, c_old); },
        [&](const Vector& c, const Vector& res) -> Vector {
          if (constant) {
            if (!has_cache_) {
              cached_.compute(jacobian(c));
              if (cached_.info() != Eigen::Success) throw NumericalError("reduced Jacobian is not SPD");
              has_cache_ = true;
            }
            return cached_.solve(res);
          }
          return dense_solve(jacobian(c), res);
        },
        c_old, newton_);
  });
  record(s, r);
  s.c1_prev = c_old;
  s.c1 = r.x;
  s.u_prev = s.u;
  s.u = z_ * s.c1;
  finish_step(s);
}

// ---------------------------------------------------------------------------

PartiallyExplicit::PartiallyExplicit(const FineProblem& fine, SparseMatrix z1, SparseMatrix z2,
                                     double dt, NewtonConfig newton, ReactionMode mode, PexpStart start)
    : Stepper(fine, dt, newton),
      z1_(std::move(z1)),
      z2_(std::move(z2)),
      z_(checked_concatenation(fine, z1_, z2_)),
      projector1_(fine.assembler(), z1_),
      projector_(fine.assembler(), z_),
      mode_(mode),
      start_(start) {
  const Vector ones = Vector::Ones(4 * fine.grid().num_fine_elements());
  const int n1 = size1();
  const int n2 = size2();
  full_mass_ = projector_.mass(ones);
  const Matrix& m = full_mass_;
  m11_ = m.topLeftCorner(n1, n1);
  m12_ = m.topRightCorner(n1, n2);
  m21_ = m.bottomLeftCorner(n2, n1);
  m22_ = m.bottomRightCorner(n2, n2);
  if (n2 > 0) {
    m22_llt_.compute(m22_);
    if (m22_llt_.info() != Eigen::Success) throw NumericalError("Z2^T M Z2 is singular");
  }
  full_mass_llt_.compute(m);
  if (full_mass_llt_.info() != Eigen::Success) throw NumericalError("[Z1 Z2]^T M [Z1 Z2] is singular");
  if (fine.linear_diffusion()) a11_ = projector1_.stiffness(fine.diffusion_points(Vector()));
}

SchemeState PartiallyExplicit::initial_state(const Vector& u0) const {
  SchemeState s;
  const Vector c = l2_projection(*fine_, z_, full_mass_llt_, u0);
  s.c1 = c.head(size1());
  s.c2 = c.tail(size2());
  s.c1_prev = s.c1;
  s.c2_prev = s.c2;
  s.u = z1_ * s.c1 + z2_ * s.c2;
  s.u_prev = s.u;
  return s;
}

Vector PartiallyExplicit::residual1(const Vector& c1, const SchemeState& s) const {
  const FineProblem& f = *fine_;
  const Vector u2 = z2_ * s.c2;
  const Vector arg = z1_ * c1 + u2;
  Vector r = m11_ * (c1 - s.c1);
  if (size2() > 0) r += m12_ * (s.c2 - s.c2_prev);
  r += dt_ * (z1_.transpose() * f.diffusion_action(arg, arg));
  if (f.problem().reaction.kind() != ReactionKind::none) {
    const Vector& g_arg = mode_ == ReactionMode::fully_explicit ? s.u : arg;
    r += dt_ * (z1_.transpose() * f.reaction(g_arg));
  }
  return r;
}

Matrix PartiallyExplicit::jacobian1(const Vector& c1, const SchemeState& s) const {
  const FineProblem& f = *fine_;
  const Vector arg = z1_ * c1 + z2_ * s.c2;
  Matrix j = m11_;
  if (f.linear_diffusion())
    j += dt_ * a11_;
  else
    j += dt_ * projector1_.stiffness(f.diffusion_points(arg));
  if (mode_ == ReactionMode::semi_implicit && f.problem().reaction.kind() != ReactionKind::none)
    j += dt_ * projector1_.mass(f.reaction_derivative_points(arg));
  return j;
}

Vector PartiallyExplicit::coupled_residual(const Vector& c, const SchemeState& s) const {
  const FineProblem& f = *fine_;
  const Vector u = z_ * c;
  Vector c_old(size1() + size2());
  c_old << s.c1, s.c2;
  Vector r = full_mass_ * (c - c_old) + dt_ * (z_.transpose() * f.diffusion_action(u, u));
  if (f.problem().reaction.kind() != ReactionKind::none) {
    const Vector& g_arg = mode_ == ReactionMode::fully_explicit ? s.u : u;
    r += dt_ * (z_.transpose() * f.reaction(g_arg));
  }
  return r;
}

Matrix PartiallyExplicit::coupled_jacobian(const Vector& c) const {
  const FineProblem& f = *fine_;
  const Vector u = z_ * c;
  Matrix j = full_mass_ + dt_ * projector_.stiffness(f.diffusion_points(u));
  if (mode_ == ReactionMode::semi_implicit && f.problem().reaction.kind() != ReactionKind::none)
    j += dt_ * projector_.mass(f.reaction_derivative_points(u));
  return j;
}

// The lagged increments of the splitting stand in for the off-diagonal mass
// coupling; before any increment exists the step is taken on the joint space.
void PartiallyExplicit::advance_coupled(SchemeState& s) {
  Vector c0(size1() + size2());
  c0 << s.c1, s.c2;
  const NewtonResult r = with_step_context(s, name(), [&] {
    return newton_solve([&](const Vector& c) { return coupled_residual(c, s); },
                        [&](const Vector& c, const Vector& res) -> Vector {
                          return dense_solve(coupled_jacobian(c), res);
                        },
                        c0, newton_);
  });
  record(s, r);
  s.c1_prev = s.c1;
  s.c2_prev = s.c2;
  s.c1 = r.x.head(size1());
  s.c2 = r.x.tail(size2());
  s.u_prev = s.u;
  s.u = z_ * r.x;
  finish_step(s);
}

void PartiallyExplicit::advance(SchemeState& s) {
  if (start_ == PexpStart::coupled && s.step == 0 && size2() > 0) {
    advance_coupled(s);
    return;
  }
  const FineProblem& f = *fine_;
  const bool constant =
      f.linear_diffusion() && (mode_ == ReactionMode::fully_explicit || f.affine_reaction());
  const NewtonResult r = with_step_context(s, name(), [&] {
    return newton_solve(
        [&](const Vector& c1) { return residual1(c1, s); },
        [&](const Vector& c1, const Vector& res) -> Vector {
          if (constant) {
            if (!has_cache_) {
              cached_.compute(jacobian1(c1, s));
              if (cached_.info() != Eigen::Success) throw NumericalError("V_H,1 Jacobian is not SPD");
              has_cache_ = true;
            }
            return cached_.solve(res);
          }
          return dense_solve(jacobian1(c1, s), res);
        },
        s.c1, newton_);
  });
  record(s, r);

  const Vector c1_new = r.x;
  Vector c2_new = s.c2;
  if (size2() > 0) {
    const Vector arg = z1_ * c1_new + z2_ * s.c2;
    Vector rhs = -(m21_ * (s.c1 - s.c1_prev));
    rhs -= dt_ * (z2_.transpose() * f.diffusion_action(arg, arg));
    if (f.problem().reaction.kind() != ReactionKind::none) {
      const Vector& g_arg = mode_ == ReactionMode::fully_explicit ? s.u : arg;
      rhs -= dt_ * (z2_.transpose() * f.reaction(g_arg));
    }
    c2_new = s.c2 + m22_llt_.solve(rhs);
  }
  s.c1_prev = s.c1;
  s.c2_prev = s.c2;
  s.c1 = c1_new;
  s.c2 = c2_new;
  s.u_prev = s.u;
  s.u = z1_ * s.c1 + z2_ * s.c2;
  finish_step(s);
}

// ---------------------------------------------------------------------------

SchemeState step_backward_euler_fine(SchemeState state, FineBackwardEuler& scheme) {
  scheme.advance(state);
  return state;
}

SchemeState step_forward_euler_fine(SchemeState state, FineForwardEuler& scheme) {
  scheme.advance(state);
  return state;
}

SchemeState step_implicit_reduced(SchemeState state, ImplicitReduced& scheme) {
  scheme.advance(state);
  return state;
}

SchemeState step_partially_explicit(SchemeState state, PartiallyExplicit& scheme) {
  scheme.advance(state);
  return state;
}

std::unique_ptr<Stepper> make_stepper(Scheme scheme, const FineProblem& fine,
                                      const MultiscaleSpaces* spaces, double dt,
                                      const NewtonConfig& newton, ReactionMode mode, PexpStart start) {
  auto need_spaces = [&] {
    if (!spaces) throw ConfigError("scheme " + to_string(scheme) + " requires multiscale spaces");
  };
  switch (scheme) {
    case Scheme::fine_be: return std::make_unique<FineBackwardEuler>(fine, dt, newton);
    case Scheme::fine_fe: return std::make_unique<FineForwardEuler>(fine, dt, newton);
    case Scheme::cem:
      need_spaces();
      return std::make_unique<ImplicitReduced>(fine, spaces->cem.basis, dt, newton, "cem");
    case Scheme::cem_plus:
      need_spaces();
      return std::make_unique<ImplicitReduced>(fine, concatenate(spaces->cem.basis, spaces->v2.basis),
                                               dt, newton, "cem_plus");
    case Scheme::pexp:
      need_spaces();
      return std::make_unique<PartiallyExplicit>(fine, spaces->cem.basis, spaces->v2.basis, dt, newton,
                                                 mode, start);
  }
  throw ConfigError("unknown scheme");
}

}  // namespace splitcem
