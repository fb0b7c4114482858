#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splitcem/steppers.hpp"

namespace splitcem {

/// Number of steps N with N * dt = T; throws ConfigError when T / dt is not
/// an integer within 1e-12 relative.
int step_count(double dt, double final_time);

/// Fine fields u^0 ... u^N.
struct Trajectory {
  std::vector<Vector> u;
  int steps() const { return u.empty() ? 0 : static_cast<int>(u.size()) - 1; }
};

struct ErrorPoint {
  int step = 0;
  double time = 0.0;
  double rel_l2 = 0.0;
  double rel_energy = 0.0;
};

/// Errors against a reference trajectory at steps 1 ... N.
struct ErrorSeries {
  std::string scheme;
  std::vector<ErrorPoint> points;

  double max_rel_l2() const;
  double max_rel_energy() const;
  double final_rel_l2() const { return points.empty() ? 0.0 : points.back().rel_l2; }
  double final_rel_energy() const { return points.empty() ? 0.0 : points.back().rel_energy; }
};

/// ||u_ref - u|| / ||u_ref|| in the mass and linear stiffness norms; the
/// absolute error is reported where the reference vanishes.
ErrorPoint relative_errors(const FineProblem& fine, const Vector& reference, const Vector& u);

enum class RunStatus { completed, blow_up, failed };
std::string to_string(RunStatus s);

/// Called with the initial state and after every completed step, in order.
using Observer = std::function<void(const Stepper&, const SchemeState&)>;

struct TransientOptions {
  double final_time = 0.05;
  double blow_up_threshold = 1e10;  // ||u||_inf above this aborts with blow_up
  bool store_trajectory = false;
  const Trajectory* reference = nullptr;  // enables the error series
  int snapshot_stride = 0;                // > 0 writes u every stride steps
  std::filesystem::path snapshot_dir;
};

struct RunResult {
  std::string scheme;
  RunStatus status = RunStatus::completed;
  std::string message;
  int steps_requested = 0;
  int steps_completed = 0;
  double final_time = 0.0;
  double max_abs = 0.0;  // max over steps of ||u||_inf
  Vector final_u;
  Trajectory trajectory;  // filled when store_trajectory
  std::optional<ErrorSeries> errors;
  std::vector<int> newton_iterations;  // per step
  double seconds = 0.0;

  bool ok() const { return status == RunStatus::completed; }
  int max_newton_iterations() const;
};

/// Runs N = T / dt steps from the fine initial field u0. Step failures and
/// blow-up end the run early with the partial series kept.
RunResult run_transient(Stepper& stepper, const Vector& u0, const TransientOptions& options,
                        std::span<const Observer> observers = {});

}  // namespace splitcem
