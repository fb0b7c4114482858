#include "splitcem/stability.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "splitcem/error.hpp"
#include "splitcem/galerkin.hpp"
#include "splitcem/linsolve.hpp"

namespace splitcem {

namespace {

constexpr int kDenseLimit = 1500;

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : "undefined"; }

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> x(n);
  for (int k = 0; k < n; ++k) x[k] = n == 1 ? lo : lo + (hi - lo) * k / (n - 1);
  return x;
}

}  // namespace

double energy_ratio(const SparseMatrix& z, const SparseMatrix& a, const SparseMatrix& m) {
  if (z.cols() == 0) throw ConfigError("energy ratio of an empty space is undefined");
  if (z.rows() != a.rows() || a.rows() != m.rows()) throw ConfigError("energy ratio: size mismatch");
  if (z.cols() <= kDenseLimit) {
    const Matrix az = galerkin(z, a);
    const Matrix mz = galerkin(z, m);
    return eig_sym_generalized(az, mz, 1, Spectrum::largest).values(0);
  }
  const SparseMatrix az = SparseMatrix(z.transpose() * a * z);
  const SparseMatrix mz = SparseMatrix(z.transpose() * m * z);
  return largest_generalized_eigenvalue(az, mz);
}

double energy_ratio(const ReducedSpace& space, const SparseMatrix& a, const SparseMatrix& m) {
  return energy_ratio(space.basis, a, m);
}

double admissible_dt(double gamma, double lambda2, double c_lower, double c2_upper, double b) {
  if (!(gamma < 1.0)) throw NumericalError("gamma >= 1: V_H,1 and V_H,2 are not transversal", gamma);
  if (!(c_lower > 0.0)) throw ConfigError("lower diffusion bound must be positive");
  const double denom = c2_upper * c2_upper * lambda2 / (2.0 * c_lower) + (1.0 + gamma) * b / 2.0;
  if (denom <= 0.0) return std::numeric_limits<double>::infinity();
  return (1.0 - gamma) / denom;
}

double admissible_dt_example1(double gamma, double lambda2) {
  return admissible_dt(gamma, lambda2, 1.0, 1.0, 0.0);
}

ReactionBounds estimate_reaction_bounds(const ReactionTerm& g, double u_min, double u_max, int samples) {
  if (!(u_min <= u_max) || !std::isfinite(u_min) || !std::isfinite(u_max))
    throw ConfigError("reaction bounds need a finite range");
  if (samples < 1) throw ConfigError("reaction bounds need at least one sample");
  ReactionBounds r;
  r.u_min = u_min;
  r.u_max = u_max;
  if (g.kind() == ReactionKind::none) return r;

  // g' depends on the cell only through a1.
  std::vector<int> cells{0};
  if (g.kind() == ReactionKind::cosine) {
    const CellField& a1 = g.a1();
    std::vector<std::pair<double, int>> v;
    v.reserve(a1.size());
    for (int c = 0; c < a1.size(); ++c) v.emplace_back(a1[c], c);
    std::sort(v.begin(), v.end());
    cells.clear();
    for (std::size_t k = 0; k < v.size(); ++k)
      if (k == 0 || v[k].first != v[k - 1].first) cells.push_back(v[k].second);
  }
  double gmin = std::numeric_limits<double>::infinity();
  for (const double u : linspace(u_min, u_max, samples)) {
    for (const int c : cells) {
      const double d = g.derivative(u, c);
      r.b = std::max(r.b, std::abs(d));
      gmin = std::min(gmin, d);
    }
  }
  r.b_lower = std::max(0.0, -gmin);
  return r;
}

DiffusionBounds estimate_diffusion_bounds(const DiffusionNonlinearity& alpha, double u_min, double u_max,
                                          int samples) {
  DiffusionBounds d;
  if (alpha.is_linear()) return d;
  if (samples < 1 || !(u_min <= u_max)) throw ConfigError("diffusion bounds need a valid range");
  d.heuristic = true;
  d.c_lower = std::numeric_limits<double>::infinity();
  d.c2_upper = 0.0;
  for (const double u : linspace(u_min, u_max, samples)) {
    const double a = alpha.value(u);
    d.c_lower = std::min(d.c_lower, a);
    d.c2_upper = std::max(d.c2_upper, a);
  }
  if (!(d.c_lower > 0.0)) throw NumericalError("alpha is not positive on the sampled range", d.c_lower);
  return d;
}

StabilityReport stability_report(const FineProblem& fine, const MultiscaleSpaces& spaces, double dt,
                                 const StabilityOptions& options) {
  StabilityReport r;
  r.dt = dt;
  r.contrast = fine.problem().contrast();
  r.v1_size = static_cast<int>(spaces.cem.size());
  r.v2_size = static_cast<int>(spaces.v2.size());
  r.reaction = estimate_reaction_bounds(fine.problem().reaction, options.u_min, options.u_max, options.samples);
  r.diffusion =
      estimate_diffusion_bounds(fine.problem().alpha, options.u_min, options.u_max, options.samples);
  if (r.diffusion.heuristic)
    r.notes.push_back("c and C2 are min/max of alpha over the assumed solution range (heuristic)");

  const SparseMatrix& a = fine.stiffness();
  const SparseMatrix& m = fine.mass();
  const GammaResult g = compute_gamma(spaces.cem.basis, spaces.v2.basis, m);
  r.gamma = g.gamma;
  r.gamma_near_one = g.near_one;
  if (r.v2_size > 0)
    r.lambda2 = energy_ratio(spaces.v2, a, m);
  else
    r.notes.push_back("V_H,2 is empty: lambda2 undefined, pexp degenerates to implicit V_H,1 with explicit reaction");
  if (options.compute_lambda_full) r.lambda_full = largest_generalized_eigenvalue(a, m);

  if (r.gamma >= 1.0 || r.gamma_near_one) {
    r.notes.push_back("gamma is 1 to within 1e-8: V_H,1 and V_H,2 are not transversal");
  }
  if (r.gamma < 1.0) {
    const double l2 = r.lambda2.value_or(0.0);
    r.dt_general = admissible_dt(r.gamma, l2, r.diffusion.c_lower, r.diffusion.c2_upper, r.reaction.b);
    if (r.lambda2) r.dt_example1 = admissible_dt_example1(r.gamma, l2);
    r.pass = dt <= *r.dt_general * (1.0 + 1e-12);
  }
  return r;
}

std::string StabilityReport::to_key_value() const {
  std::ostringstream o;
  o << "dt = " << num(dt) << "\n"
    << "contrast = " << num(contrast) << "\n"
    << "v1_size = " << v1_size << "\n"
    << "v2_size = " << v2_size << "\n"
    << "gamma = " << num(gamma) << "\n"
    << "gamma_near_one = " << (gamma_near_one ? "true" : "false") << "\n"
    << "lambda2 = " << num(lambda2) << "\n"
    << "lambda_full = " << num(lambda_full) << "\n"
    << "u_range = [" << num(reaction.u_min) << ", " << num(reaction.u_max) << "]\n"
    << "reaction_B = " << num(reaction.b) << "\n"
    << "reaction_b_lower = " << num(reaction.b_lower) << "\n"
    << "diffusion_c_lower = " << num(diffusion.c_lower) << "\n"
    << "diffusion_C2 = " << num(diffusion.c2_upper) << "\n"
    << "diffusion_bounds_heuristic = " << (diffusion.heuristic ? "true" : "false") << "\n"
    << "dt_star_general = " << num(dt_general) << "\n"
    << "dt_star_example1 = " << num(dt_example1) << "\n"
    << "result = " << (pass ? "PASS" : "FAIL") << "\n";
  for (const auto& n : notes) o << "note = " << n << "\n";
  return o.str();
}

std::string StabilityReport::csv_header() {
  return "dt,contrast,v1_size,v2_size,gamma,lambda2,lambda_full,reaction_B,reaction_b_lower,"
         "diffusion_c_lower,diffusion_C2,dt_star_general,dt_star_example1,result";
}

std::string StabilityReport::csv_row() const {
  std::ostringstream o;
  o << num(dt) << ',' << num(contrast) << ',' << v1_size << ',' << v2_size << ',' << num(gamma) << ','
    << num(lambda2) << ',' << num(lambda_full) << ',' << num(reaction.b) << ',' << num(reaction.b_lower) << ','
    << num(diffusion.c_lower) << ',' << num(diffusion.c2_upper) << ',' << num(dt_general) << ','
    << num(dt_example1) << ',' << (pass ? "PASS" : "FAIL");
  return o.str();
}

std::optional<int> EnergyTrace::first_increase(double slack) const {
  for (std::size_t n = 1; n < points.size(); ++n) {
    const double prev = points[n - 1].lyapunov();
    const double cur = points[n].lyapunov();
    if (cur - prev > slack * std::max(std::abs(cur), std::abs(prev))) return static_cast<int>(n);
  }
  return std::nullopt;
}

double EnergyTrace::max_relative_increase() const {
  double worst = 0.0;
  for (std::size_t n = 1; n < points.size(); ++n) {
    const double prev = points[n - 1].lyapunov();
    const double cur = points[n].lyapunov();
    const double scale = std::max(std::abs(cur), std::abs(prev));
    if (cur > prev && scale > 0.0) worst = std::max(worst, (cur - prev) / scale);
  }
  return worst;
}

namespace {

EnergyPoint energy_point(const FineProblem& fine, const SchemeState& s, const SparseMatrix* z1,
                         const SparseMatrix* z2, double gamma, double dt) {
  EnergyPoint p;
  p.step = s.step;
  p.time = s.time;
  p.f = fine.diffusion_energy(s.u);
  p.g = fine.reaction_energy(s.u);
  if (z1 && z2) {
    double sum = 0.0;
    if (z1->cols() > 0) {
      const Vector d1 = *z1 * (s.c1 - s.c1_prev);
      sum += d1.dot(fine.mass() * d1);
    }
    if (z2->cols() > 0) {
      const Vector d2 = *z2 * (s.c2 - s.c2_prev);
      sum += d2.dot(fine.mass() * d2);
    }
    p.kinetic = gamma / (2.0 * dt) * sum;
  }
  return p;
}

}  // namespace

EnergyTracker::EnergyTracker(const FineProblem& fine, double gamma) : fine_(&fine) {
  trace_.gamma = gamma;
  trace_.diagnostic = !fine.linear_diffusion();
}

Observer EnergyTracker::observer() {
  return [this](const Stepper& stepper, const SchemeState& s) { record(stepper, s); };
}

void EnergyTracker::record(const Stepper& stepper, const SchemeState& s) {
  const auto* split = dynamic_cast<const PartiallyExplicit*>(&stepper);
  if (trace_.points.empty()) {
    trace_.scheme = stepper.name();
    trace_.dt = stepper.dt();
    trace_.split = split != nullptr;
  }
  trace_.points.push_back(split ? energy_point(*fine_, s, &split->z1(), &split->z2(), trace_.gamma, stepper.dt())
                                : energy_point(*fine_, s, nullptr, nullptr, trace_.gamma, stepper.dt()));
}

EnergyTrace track_energy(const FineProblem& fine, std::span<const SchemeState> states, const SparseMatrix* z1,
                         const SparseMatrix* z2, double gamma, double dt) {
  EnergyTrace t;
  t.gamma = gamma;
  t.dt = dt;
  t.split = z1 && z2;
  t.diagnostic = !fine.linear_diffusion();
  for (const auto& s : states) t.points.push_back(energy_point(fine, s, z1, z2, gamma, dt));
  return t;
}

}  // namespace splitcem
