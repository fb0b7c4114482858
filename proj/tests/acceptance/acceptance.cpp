// Acceptance checks: one PASS/FAIL line per criterion.
//
//   splitcem_acceptance [--only ac1|ac2|ac3|ac4|ac5|ac9|ac6_ac7_ac8] [--out DIR]
//
// Exit status is 0 when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "splitcem/assembly.hpp"
#include "splitcem/config.hpp"
#include "splitcem/driver.hpp"
#include "splitcem/problems.hpp"
#include "splitcem/spaces.hpp"
#include "splitcem/stability.hpp"
#include "splitcem/steppers.hpp"
#include "splitcem/transient.hpp"

using namespace splitcem;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

struct Verdict {
  std::string id;
  bool pass = false;
  std::string detail;
};

void report(const Verdict& v) {
  std::cout << v.id << " " << (v.pass ? "PASS" : "FAIL") << ": " << v.detail << std::endl;
}

double sine(double x, double y) { return std::sin(std::numbers::pi * x) * std::sin(std::numbers::pi * y); }

ProblemSpec plain_problem(CellField kappa, ReactionTerm g = ReactionTerm::none()) {
  ProblemSpec p;
  p.kappa = std::move(kappa);
  p.reaction = std::move(g);
  return p;
}

// ---------------------------------------------------------------- criterion 1

// Max over steps of the relative L2 error of fine backward Euler against the
// decaying sine mode.
double heat_error(int nc, int nf, double dt) {
  const auto g = build_grids(nc, nf);
  const ProblemSpec p = plain_problem(CellField(nf, 1.0));
  const FineProblem fine(g, p);
  FineBackwardEuler be(fine, dt, NewtonConfig{});
  InitialCondition ic;
  ic.kind = InitialKind::sine_product;
  const Vector u0 = ic.interpolate(g);
  double worst = 0.0;
  const Observer obs = [&](const Stepper&, const SchemeState& s) {
    if (s.step == 0) return;
    const Vector exact = std::exp(-2.0 * std::numbers::pi * std::numbers::pi * s.time) * u0;
    worst = std::max(worst, fine.l2_norm(s.u - exact) / fine.l2_norm(exact));
  };
  TransientOptions opt;
  opt.final_time = 0.05;
  const std::vector<Observer> observers = {obs};
  const RunResult r = run_transient(be, u0, opt, observers);
  if (!r.ok()) return std::numeric_limits<double>::infinity();
  return worst;
}

Verdict criterion1() {
  const auto t0 = Clock::now();
  const double e64 = heat_error(8, 64, 1e-4);
  // Refinement ladder through the target resolution. The coarsest rung is
  // reported only: at h = 1/16 the spatial and temporal errors nearly cancel.
  const double e16 = heat_error(4, 16, 4e-4);
  const double e32 = heat_error(4, 32, 2e-4);
  const double e128 = heat_error(8, 128, 5e-5);
  const double secs = seconds_since(t0);
  const bool ok = e64 <= 0.01 && e64 < e32 && e128 < e64 && secs < 60.0;
  return {"ac1", ok,
          "max rel L2 error at Nf 64 " + fmt(e64) + " (limit 0.01); refinement Nf 32, 64, 128: " + fmt(e32) +
              " > " + fmt(e64) + " > " + fmt(e128) + " (Nf 16: " + fmt(e16) + "); " + fmt(secs) +
              " s (limit 60)"};
}

// ---------------------------------------------------------------- criterion 2

Verdict criterion2() {
  const auto t0 = Clock::now();
  const Preset e1 = preset("E1");
  const auto g = build_grids(e1.coarse_cells, e1.fine_cells);
  SpaceOptions opt;
  opt.aux_modes = 3;
  opt.slow_modes = 1;
  opt.layers = 2;
  const MultiscaleSpaces sp = build_spaces(g, e1.problem.kappa, opt);
  const SpaceDiagnostics d = diagnose_spaces(g, e1.problem.kappa, sp);
  const double secs = seconds_since(t0);
  const std::map<std::string, double> residuals = {
      {"pi_idempotency", d.pi_idempotency}, {"pi_orthogonality", d.pi_orthogonality},
      {"pi_reproduction", d.pi_reproduction}, {"cem_constraint", d.cem_constraint},
      {"v2_s_orthogonality", d.v2_s_orthogonality}, {"v2_l2_matching", d.v2_l2_matching},
      {"aux2_kernel", d.aux2_kernel}};
  bool ok = d.gamma.gamma < 1.0 && secs < 300.0;
  std::ostringstream s;
  for (const auto& [k, v] : residuals) {
    ok = ok && v <= 1e-8;
    s << k << " " << fmt(v) << ", ";
  }
  s << "gamma " << fmt(d.gamma.gamma) << ", " << fmt(secs) << " s (limit 300)";
  return {"ac2", ok, s.str()};
}

// ---------------------------------------------------------------- criterion 3

Verdict criterion3() {
  const int nc = 2, nf = 8;
  const auto g = build_grids(nc, nf);
  CellField kappa(nf, 1.0);
  for (int e = 0; e < kappa.size(); ++e) {
    const int ex = e % nf, ey = e / nf;
    if (ex == 2 || ex == 3 || (ey == 5 && ex > 2)) kappa[e] = 1e4;
  }
  SpaceOptions opt;
  opt.layers = 1;
  bool covers = true;
  for (int i = 0; i < nc * nc; ++i) covers = covers && oversample(g, i, opt.layers).coarse_elements().size() == 4u;
  const MultiscaleSpaces sp = build_spaces(g, kappa, opt);

  const std::vector<double> kv(kappa.values().data(), kappa.values().data() + kappa.size());
  std::vector<double> sw = kv;
  for (double& x : sw) x *= nc * nc;
  const oracle::Mat a = oracle::stiffness(nf, kv);
  const oracle::Mat s = oracle::mass(nf, sw);
  const oracle::Mat m = oracle::mass(nf);
  const oracle::Mat psi = Matrix(sp.aux1.basis);
  const oracle::Mat xi = Matrix(sp.aux2.basis);
  const int n = g.num_dofs();
  const oracle::Vec zero = oracle::Vec::Zero(n);

  // CEM: min a(phi, phi) subject to s(phi, psi_k) = delta_jk.
  const oracle::Mat c1 = psi.transpose() * s;
  double cem_err = 0.0;
  for (int j = 0; j < psi.cols(); ++j) {
    const oracle::Vec ref = oracle::kkt_solve(a, zero, c1, oracle::Vec::Unit(psi.cols(), j));
    const Vector got = Vector(sp.cem.basis.col(j));
    cem_err = std::max(cem_err, (got - ref).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff());
  }
  // V2: s(zeta, psi) = 0 and (zeta, xi_k) = (xi_j, xi_k).
  oracle::Mat c2(psi.cols() + xi.cols(), n);
  c2.topRows(psi.cols()) = c1;
  c2.bottomRows(xi.cols()) = xi.transpose() * m;
  const oracle::Mat xx = xi.transpose() * m * xi;
  double v2_err = 0.0;
  for (int j = 0; j < xi.cols(); ++j) {
    oracle::Vec d = oracle::Vec::Zero(c2.rows());
    d.tail(xi.cols()) = xx.col(j);
    const oracle::Vec ref = oracle::kkt_solve(a, zero, c2, d);
    const Vector got = Vector(sp.v2.basis.col(j));
    v2_err = std::max(v2_err, (got - ref).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff());
  }
  const bool ok = covers && cem_err <= 1e-8 && v2_err <= 1e-8;
  return {"ac3", ok,
          "max relative basis difference vs dense KKT: cem " + fmt(cem_err) + ", v2 " + fmt(v2_err) +
              " (limit 1e-8)" + (covers ? "" : "; patches do not cover the domain")};
}

// ---------------------------------------------------------------- criterion 4

Verdict criterion4() {
  const Preset e1 = preset("E1");
  const auto g = build_grids(e1.coarse_cells, e1.fine_cells);
  ProblemSpec p = plain_problem(e1.problem.kappa);
  p.initial.kind = InitialKind::sine_product;
  const FineProblem fine(g, p);
  const MultiscaleSpaces sp = build_spaces(g, p.kappa, {});
  const StabilityReport rep = stability_report(fine, sp, 1e-4);
  if (!rep.dt_general) return {"ac4", false, "no admissible dt: gamma " + fmt(rep.gamma)};
  const double dt = *rep.dt_general;
  PartiallyExplicit px(fine, sp.cem.basis, sp.v2.basis, dt, NewtonConfig{}, ReactionMode::fully_explicit);
  EnergyTracker tracker(fine, rep.gamma);
  const std::vector<Observer> obs = {tracker.observer()};
  TransientOptions opt;
  opt.final_time = 500 * dt;
  const RunResult r = run_transient(px, p.initial.interpolate(g), opt, obs);
  const auto inc = tracker.trace().first_increase(1e-10);
  const bool ok = r.ok() && r.steps_completed == 500 && !inc.has_value();
  return {"ac4", ok,
          "pexp at dt* = " + fmt(dt) + " (gamma " + fmt(rep.gamma) + ", lambda2 " + fmt(rep.lambda2.value_or(0)) +
              "), " + std::to_string(r.steps_completed) + "/500 steps, largest relative Lyapunov increase " +
              fmt(tracker.trace().max_relative_increase()) +
              (inc ? ", first increase at step " + std::to_string(*inc) : ", nonincreasing")};
}

// ---------------------------------------------------------------- criterion 5

Verdict criterion5() {
  const auto t0 = Clock::now();
  const std::vector<double> contrasts = {1e2, 1e4, 1e6};
  std::vector<double> lam_full, lam2, pexp_max;
  std::vector<RunStatus> fe_status;
  bool pexp_ok = true;
  for (double c : contrasts) {
    PresetOverrides ov;
    ov.contrast = c;
    const Preset e1 = preset("E1", ov);
    const auto g = build_grids(e1.coarse_cells, e1.fine_cells);
    const FineProblem fine(g, e1.problem);
    const MultiscaleSpaces sp = build_spaces(g, e1.problem.kappa, {});
    const StabilityReport rep = stability_report(fine, sp, 1e-4);
    lam_full.push_back(rep.lambda_full.value_or(0.0));
    lam2.push_back(rep.lambda2.value_or(0.0));
    TransientOptions opt;
    opt.final_time = 0.05;
    PartiallyExplicit px(fine, sp.cem.basis, sp.v2.basis, 1e-4, NewtonConfig{}, ReactionMode::fully_explicit);
    const RunResult rp = run_transient(px, Vector::Zero(g.num_dofs()), opt);
    pexp_ok = pexp_ok && rp.ok() && rp.steps_completed == 500 && rp.max_abs < 1e3;
    pexp_max.push_back(rp.max_abs);
    FineForwardEuler fe(fine, 1e-4);
    fe_status.push_back(run_transient(fe, Vector::Zero(g.num_dofs()), opt).status);
  }
  const double secs = seconds_since(t0);
  const bool full_grows = lam_full[1] >= 10.0 * lam_full[0] && lam_full[2] >= 10.0 * lam_full[1];
  const double lam2_growth = *std::max_element(lam2.begin(), lam2.end()) / *std::min_element(lam2.begin(), lam2.end());
  const bool fe_blows = fe_status[1] == RunStatus::blow_up && fe_status[2] == RunStatus::blow_up;
  const bool ok = full_grows && lam2_growth <= 2.0 && pexp_ok && fe_blows && secs < 900.0;
  std::ostringstream s;
  s << "lambda_full " << fmt(lam_full[0]) << ", " << fmt(lam_full[1]) << ", " << fmt(lam_full[2])
    << "; lambda2 " << fmt(lam2[0]) << ", " << fmt(lam2[1]) << ", " << fmt(lam2[2]) << " (growth " << fmt(lam2_growth)
    << ", limit 2); pexp max|u| " << fmt(pexp_max[0]) << ", " << fmt(pexp_max[1]) << ", " << fmt(pexp_max[2])
    << "; fine_fe " << to_string(fe_status[0]) << ", " << to_string(fe_status[1]) << ", " << to_string(fe_status[2])
    << "; " << fmt(secs) << " s (limit 900)";
  return {"ac5", ok, s.str()};
}

// ------------------------------------------------------- criteria 6, 7 and 8

// Largest relative finite-difference defect of the step Jacobians at a
// smooth state in the solution range. Nonlinear diffusion is frozen at the
// evaluation point, matching the Picard-Newton linearization.
double jacobian_defect(const Preset& p, const MultiscaleSpaces& sp) {
  const auto g = build_grids(p.coarse_cells, p.fine_cells);
  const FineProblem fine(g, p.problem);
  const double dt = p.dt;
  const Vector frozen = oracle::interpolate(p.fine_cells, [](double x, double y) { return 0.8 * sine(x, y); });
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const auto random = [&](int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = unit(rng);
    return v;
  };
  const SparseMatrix a = fine.diffusion_matrix(frozen);
  const ResidualFn fine_res = [&](const Vector& x) {
    return Vector(fine.mass() * x + dt * (a * x) + dt * fine.reaction(x));
  };
  const SparseMatrix j = fine.mass() + dt * a + dt * fine.reaction_jacobian(frozen);
  const Vector d = random(fine.dofs());
  double worst = jacobian_fd_error(fine_res, j * d, frozen, d);

  if (fine.linear_diffusion()) {
    const SparseMatrix z = concatenate(sp.cem.basis, sp.v2.basis);
    ImplicitReduced red(fine, z, dt, NewtonConfig{});
    const Vector c = red.initial_state(frozen).c1;
    const Vector dc = random(static_cast<int>(c.size()));
    const ResidualFn rr = [&](const Vector& x) { return red.residual(x, c); };
    worst = std::max(worst, jacobian_fd_error(rr, red.jacobian(c) * dc, c, dc));
    for (ReactionMode mode : {ReactionMode::fully_explicit, ReactionMode::semi_implicit}) {
      PartiallyExplicit px(fine, sp.cem.basis, sp.v2.basis, dt, NewtonConfig{}, mode);
      const SchemeState st = px.initial_state(frozen);
      const Vector d1 = random(px.size1());
      const ResidualFn r1 = [&](const Vector& x) { return px.residual1(x, st); };
      worst = std::max(worst, jacobian_fd_error(r1, px.jacobian1(st.c1, st) * d1, st.c1, d1));
    }
  }
  return worst;
}

struct PresetRun {
  std::string name;
  RunOutcome outcome;
  double jac_defect = 0.0;
  double seconds = 0.0;
};

PresetRun run_preset(const std::string& name, const fs::path& out) {
  const auto t0 = Clock::now();
  std::istringstream text("[problem]\npreset = " + name + "\n");
  IniFile ini = IniFile::parse(text, name);
  ini.set("output", "dir", name);
  const RunConfig cfg = make_config(ini, out);
  fs::create_directories(cfg.output_dir);
  std::ostringstream log;
  PresetRun r;
  r.name = name;
  r.outcome = execute_run(cfg, log);
  const Preset p = preset(name);
  const auto g = build_grids(p.coarse_cells, p.fine_cells);
  r.jac_defect = jacobian_defect(p, build_spaces(g, p.problem.kappa, cfg.spaces));
  r.seconds = seconds_since(t0);
  std::cerr << name << ": " << fmt(r.seconds) << " s" << (r.outcome.complete ? "" : " incomplete: " + r.outcome.error)
            << std::endl;
  return r;
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

std::vector<Verdict> criteria678(const fs::path& out) {
  std::vector<PresetRun> runs;
  for (const auto& name : preset_names()) runs.push_back(run_preset(name, out));

  bool ok6 = true, ok7 = true, ok8 = true;
  std::ostringstream s6, s7, s8;
  for (const auto& r : runs) {
    const int index = r.name[1] - '0';
    const RunResult* cem = r.outcome.find(Scheme::cem);
    const RunResult* plus = r.outcome.find(Scheme::cem_plus);
    const RunResult* pexp = r.outcome.find(Scheme::pexp);
    const bool have = cem && plus && pexp && cem->ok() && plus->ok() && pexp->ok() && cem->errors &&
                      plus->errors && pexp->errors;
    if (!have) {
      ok6 = ok7 = ok8 = false;
      s6 << r.name << " incomplete (" << r.outcome.error << "); ";
      continue;
    }
    const double dl2 = rel_diff(pexp->errors->max_rel_l2(), plus->errors->max_rel_l2());
    ok6 = ok6 && dl2 < 0.10;
    s6 << r.name << " L2 " << fmt(dl2);
    if (index <= 6) {
      const double den = rel_diff(pexp->errors->max_rel_energy(), plus->errors->max_rel_energy());
      ok6 = ok6 && den < 0.10;
      s6 << " energy " << fmt(den);
    }
    s6 << "; ";
    if (index == 1 || index == 3 || index == 5 || index == 6) {
      const double ec = cem->errors->final_rel_energy(), ep = plus->errors->final_rel_energy();
      ok7 = ok7 && ep <= ec;
      s7 << r.name << " cem " << fmt(ec, 7) << " cem_plus " << fmt(ep, 7) << "; ";
    }
    if (index == 1 || index >= 7) {
      const int limit = index == 1 ? 6 : 10;
      int worst = 0;
      for (const auto& res : r.outcome.results)
        if (res.scheme != "fine_fe") worst = std::max(worst, res.max_newton_iterations());
      ok8 = ok8 && worst <= limit;
      s8 << r.name << " max iterations " << worst << " (limit " << limit << "); ";
    }
    ok8 = ok8 && r.jac_defect <= 1e-5;
  }
  double defect = 0.0;
  for (const auto& r : runs) defect = std::max(defect, r.jac_defect);
  s8 << "largest Jacobian finite-difference defect " << fmt(defect) << " (limit 1e-5)";
  std::string d6 = s6.str(), d7 = s7.str();
  d6 = "pexp vs cem_plus relative differences (limit 0.1): " + d6.substr(0, d6.size() - 2);
  d7 = "final relative energy error: " + d7.substr(0, d7.size() - 2);
  return {{"ac6", ok6, d6}, {"ac7", ok7, d7}, {"ac8", ok8, s8.str()}};
}

// ---------------------------------------------------------------- criterion 9

Verdict criterion9() {
  PresetOverrides ov;
  ov.coarse_cells = 5;
  ov.fine_cells = 40;
  const Preset e1 = preset("E1", ov);
  const auto g = build_grids(5, 40);
  const FineProblem fine(g, e1.problem);
  SparseMatrix id(g.num_dofs(), g.num_dofs());
  id.setIdentity();
  NewtonConfig cfg;
  cfg.atol = 1e-14;
  cfg.rtol = 1e-14;
  PartiallyExplicit px(fine, id, SparseMatrix(g.num_dofs(), 0), e1.dt, cfg, ReactionMode::fully_explicit);
  FineImex imex(fine, e1.dt);
  SchemeState ref = imex.initial_state(Vector::Zero(g.num_dofs()));
  double worst = 0.0;
  for (int n = 0; n < e1.steps; ++n) {
    SchemeState from = ref;
    from.c1 = ref.u;
    from.c1_prev = ref.u_prev;
    from.c2 = from.c2_prev = Vector::Zero(0);
    px.advance(from);
    imex.advance(ref);
    const double scale = std::max(1e-300, ref.u.cwiseAbs().maxCoeff());
    worst = std::max(worst, (from.u - ref.u).cwiseAbs().maxCoeff() / scale);
  }
  return {"ac9", worst <= 1e-10,
          "largest per-step relative difference to fine IMEX over " + std::to_string(e1.steps) + " steps " +
              fmt(worst) + " (limit 1e-10)"};
}

}  // namespace

int main(int argc, char** argv) {
  std::string only;
  fs::path out = "acceptance_out";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      only = argv[++i];
    } else if (a == "--out" && i + 1 < argc) {
      out = argv[++i];
    } else {
      std::cerr << "usage: splitcem_acceptance [--only ac1|ac2|ac3|ac4|ac5|ac9|ac6_ac7_ac8] [--out DIR]\n";
      return 2;
    }
  }
  const std::vector<std::pair<std::string, std::function<std::vector<Verdict>()>>> groups = {
      {"ac1", [] { return std::vector<Verdict>{criterion1()}; }},
      {"ac2", [] { return std::vector<Verdict>{criterion2()}; }},
      {"ac3", [] { return std::vector<Verdict>{criterion3()}; }},
      {"ac4", [] { return std::vector<Verdict>{criterion4()}; }},
      {"ac5", [] { return std::vector<Verdict>{criterion5()}; }},
      {"ac6_ac7_ac8", [&] { return criteria678(out); }},
      {"ac9", [] { return std::vector<Verdict>{criterion9()}; }},
  };
  bool known = only.empty();
  bool all = true;
  for (const auto& [id, run] : groups) {
    if (!only.empty() && only != id) continue;
    known = true;
    std::vector<Verdict> verdicts;
    try {
      verdicts = run();
    } catch (const std::exception& e) {
      verdicts = {{id, false, std::string("error: ") + e.what()}};
    }
    for (const auto& v : verdicts) {
      report(v);
      all = all && v.pass;
    }
  }
  if (!known) {
    std::cerr << "unknown criterion '" << only << "'\n";
    return 2;
  }
  return all ? 0 : 1;
}
