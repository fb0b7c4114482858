#include "splitcem/transient.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "splitcem/error.hpp"
#include "splitcem/matrix_io.hpp"

namespace splitcem {

int step_count(double dt, double final_time) {
  if (!(dt > 0.0) || !(final_time > 0.0)) throw ConfigError("dt and final time must be positive");
  const double q = final_time / dt;
  const double n = std::round(q);
  if (n < 1.0 || std::abs(n * dt - final_time) > 1e-12 * std::max(1.0, final_time)) {
    std::ostringstream msg;
    msg << "final time " << final_time << " is not an integer multiple of dt " << dt;
    throw ConfigError(msg.str());
  }
  return static_cast<int>(n);
}

double ErrorSeries::max_rel_l2() const {
  double m = 0.0;
  for (const auto& p : points) m = std::max(m, p.rel_l2);
  return m;
}

double ErrorSeries::max_rel_energy() const {
  double m = 0.0;
  for (const auto& p : points) m = std::max(m, p.rel_energy);
  return m;
}

ErrorPoint relative_errors(const FineProblem& fine, const Vector& reference, const Vector& u) {
  const Vector e = reference - u;
  const Vector me = fine.mass() * e;
  const Vector ke = fine.stiffness() * e;
  const double e_l2 = std::sqrt(std::max(0.0, e.dot(me)));
  const double e_a = std::sqrt(std::max(0.0, e.dot(ke)));
  const double r_l2 = fine.l2_norm(reference);
  const double r_a = fine.energy_norm(reference);
  ErrorPoint p;
  p.rel_l2 = r_l2 > 0.0 ? e_l2 / r_l2 : e_l2;
  p.rel_energy = r_a > 0.0 ? e_a / r_a : e_a;
  return p;
}

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::completed: return "completed";
    case RunStatus::blow_up: return "blow_up";
    case RunStatus::failed: return "failed";
  }
  return "unknown";
}

int RunResult::max_newton_iterations() const {
  return newton_iterations.empty() ? 0 : *std::max_element(newton_iterations.begin(), newton_iterations.end());
}

namespace {

void write_snapshot(const std::filesystem::path& dir, const std::string& scheme, const GridHierarchy& grid,
                    const SchemeState& s) {
  char name[96];
  std::snprintf(name, sizeof name, "u_%s_%06d.txt", scheme.c_str(), s.step);
  std::ostringstream t;
  t.precision(17);
  t << "t = " << s.time;
  write_matrix(dir / name, nodal_matrix(grid, s.u), {"scheme " + scheme, "step " + std::to_string(s.step), t.str()});
}

}  // namespace

RunResult run_transient(Stepper& stepper, const Vector& u0, const TransientOptions& options,
                        std::span<const Observer> observers) {
  const auto start = std::chrono::steady_clock::now();
  const FineProblem& fine = stepper.fine();
  RunResult res;
  res.scheme = stepper.name();
  res.steps_requested = step_count(stepper.dt(), options.final_time);
  if (u0.size() != fine.dofs()) throw ConfigError("initial field does not match the fine grid");
  if (options.reference && options.reference->steps() < res.steps_requested)
    throw ConfigError("reference trajectory is shorter than the run");
  if (options.snapshot_stride > 0) std::filesystem::create_directories(options.snapshot_dir);
  if (options.reference) res.errors = ErrorSeries{res.scheme, {}};

  SchemeState s = stepper.initial_state(u0);
  res.max_abs = s.u.size() ? s.u.lpNorm<Eigen::Infinity>() : 0.0;
  if (options.store_trajectory) res.trajectory.u.push_back(s.u);
  if (options.snapshot_stride > 0) write_snapshot(options.snapshot_dir, res.scheme, fine.grid(), s);

  try {
    for (const auto& obs : observers) obs(stepper, s);
    for (int n = 0; n < res.steps_requested; ++n) {
      stepper.advance(s);
      const double amax = s.u.size() ? s.u.lpNorm<Eigen::Infinity>() : 0.0;
      if (!std::isfinite(amax) || amax > options.blow_up_threshold) {
        res.status = RunStatus::blow_up;
        std::ostringstream msg;
        msg << "blow-up at step " << s.step << ": |u|_inf = " << amax;
        res.message = msg.str();
        res.max_abs = std::isfinite(amax) ? std::max(res.max_abs, amax) : amax;
        break;
      }
      res.max_abs = std::max(res.max_abs, amax);
      res.steps_completed = s.step;
      res.newton_iterations.push_back(s.newton_iterations);
      if (options.store_trajectory) res.trajectory.u.push_back(s.u);
      if (res.errors) {
        ErrorPoint p = relative_errors(fine, options.reference->u[s.step], s.u);
        p.step = s.step;
        p.time = s.time;
        res.errors->points.push_back(p);
      }
      if (options.snapshot_stride > 0 && s.step % options.snapshot_stride == 0)
        write_snapshot(options.snapshot_dir, res.scheme, fine.grid(), s);
      for (const auto& obs : observers) obs(stepper, s);
    }
  } catch (const std::exception& e) {
    res.status = RunStatus::failed;
    res.message = e.what();
  }
  res.final_time = s.step * stepper.dt();
  res.final_u = s.u;
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

}  // namespace splitcem
