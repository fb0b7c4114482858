#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splitcem/spaces.hpp"
#include "splitcem/steppers.hpp"
#include "splitcem/transient.hpp"

namespace splitcem {

/// Largest generalized eigenvalue of (Z^T A Z, Z^T M Z): dense below 1500
/// columns, Lanczos above. Throws ConfigError for an empty basis.
double energy_ratio(const SparseMatrix& z, const SparseMatrix& a, const SparseMatrix& m);
double energy_ratio(const ReducedSpace& space, const SparseMatrix& a, const SparseMatrix& m);

/// dt* = (1 - gamma) / (C2^2 lambda2 / (2 c) + (1 + gamma) B / 2), +inf when
/// the denominator vanishes. Throws NumericalError when gamma >= 1.
double admissible_dt(double gamma, double lambda2, double c_lower = 1.0, double c2_upper = 1.0,
                     double b = 0.0);
/// c = C2 = 1, B = 0: dt* = 2 (1 - gamma) / lambda2.
double admissible_dt_example1(double gamma, double lambda2);

struct ReactionBounds {
  double b = 0.0;        // max |g'|
  double b_lower = 0.0;  // max(0, -min g')
  double u_min = -1.0;
  double u_max = 1.0;
};
/// Samples g' at `samples` uniform points of [u_min, u_max] for every
/// distinct per-cell parameter.
ReactionBounds estimate_reaction_bounds(const ReactionTerm& g, double u_min = -1.0, double u_max = 1.0,
                                        int samples = 1000);

struct DiffusionBounds {
  double c_lower = 1.0;   // min alpha
  double c2_upper = 1.0;  // max alpha
  bool heuristic = false;  // true for nonlinear alpha: a sampled range, not a proven bound
};
DiffusionBounds estimate_diffusion_bounds(const DiffusionNonlinearity& alpha, double u_min = -1.0,
                                          double u_max = 1.0, int samples = 1000);

struct StabilityOptions {
  double u_min = -1.0;  // solution range assumed by the coefficient bounds
  double u_max = 1.0;
  int samples = 1000;
  bool compute_lambda_full = true;
};

struct StabilityReport {
  double dt = 0.0;  // configured step
  double contrast = 1.0;
  int v1_size = 0;
  int v2_size = 0;
  double gamma = 0.0;
  bool gamma_near_one = false;
  std::optional<double> lambda2;  // empty when V_H,2 is empty
  std::optional<double> lambda_full;
  ReactionBounds reaction;
  DiffusionBounds diffusion;
  std::optional<double> dt_general;   // empty when gamma >= 1
  std::optional<double> dt_example1;  // empty when gamma >= 1 or V_H,2 empty
  bool pass = false;  // dt <= dt_general
  std::vector<std::string> notes;

  std::string to_key_value() const;
  static std::string csv_header();
  std::string csv_row() const;
};

StabilityReport stability_report(const FineProblem& fine, const MultiscaleSpaces& spaces, double dt,
                                 const StabilityOptions& options = {});

struct EnergyPoint {
  int step = 0;
  double time = 0.0;
  double f = 0.0;        // 1/2 int kappa alpha(u) |grad u|^2
  double g = 0.0;        // int E2(u)
  double kinetic = 0.0;  // gamma / (2 dt) sum_i ||u_i^n - u_i^{n-1}||^2, split schemes only
  double lyapunov() const { return kinetic + f + g; }
};

struct EnergyTrace {
  std::string scheme;
  double gamma = 0.0;
  double dt = 0.0;
  bool split = false;
  bool diagnostic = false;  // nonlinear alpha: F is not an energy of the flow
  std::vector<EnergyPoint> points;

  /// First index n with L_n - L_{n-1} > slack max(|L_n|, |L_{n-1}|).
  std::optional<int> first_increase(double slack = 1e-10) const;
  /// Largest relative increase over consecutive steps, 0 when nonincreasing.
  double max_relative_increase() const;
};

/// Appends one energy point per observed state. Split components are read
/// from PartiallyExplicit steppers; other schemes record F + G only.
class EnergyTracker {
 public:
  EnergyTracker(const FineProblem& fine, double gamma);

  Observer observer();
  void record(const Stepper& stepper, const SchemeState& state);
  const EnergyTrace& trace() const { return trace_; }

 private:
  const FineProblem* fine_;
  EnergyTrace trace_;
};

/// Energy trace of stored states. z2 may be null for monolithic schemes.
EnergyTrace track_energy(const FineProblem& fine, std::span<const SchemeState> states,
                         const SparseMatrix* z1, const SparseMatrix* z2, double gamma, double dt);

}  // namespace splitcem
