#include "splitcem/driver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "splitcem/error.hpp"
#include "splitcem/matrix_io.hpp"
#include "splitcem/parallel.hpp"

namespace splitcem {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

const RunResult* RunOutcome::find(Scheme s) const {
  const std::string name = to_string(s);
  for (const auto& r : results)
    if (r.scheme == name) return &r;
  return nullptr;
}

namespace {

std::string hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  return s;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw NumericalError("cannot write " + path.string());
  return f;
}

void write_manifest(const RunConfig& cfg, const RunOutcome& o, const std::string& command) {
  auto f = open_out(cfg.output_dir / "MANIFEST");
  f << "tool = splitcem " << kVersion << "\n"
    << "command = " << command << "\n"
    << "config = " << cfg.source << "\n"
    << "config_hash = fnv1a:" << hex(cfg.hash) << "\n"
    << "modules = grid " << kVersion << ", assembly " << kVersion << ", linsolve " << kVersion << ", spaces "
    << kVersion << ", steppers " << kVersion << ", stability " << kVersion << ", problems " << kVersion
    << ", cli " << kVersion << "\n"
    << "problem.kappa = " << cfg.problem.kappa_description << "\n"
    << "problem.source = " << cfg.problem.source_description << "\n"
    << "problem.alpha = " << cfg.problem.alpha.name() << "\n"
    << "problem.reaction = " << cfg.problem.reaction.name() << "\n"
    << "problem.initial = " << cfg.problem.initial.describe() << "\n"
    << "schemes.reaction_mode = " << to_string(cfg.reaction_mode) << "\n"
    << "schemes.pexp_start = " << to_string(cfg.pexp_start) << "\n"
    << "reference = fine_be at the same dt\n"
    << "energy_error = linear form a(e,e) = int kappa |grad e|^2, also for nonlinear alpha\n";
  for (const auto& r : o.results)
    f << "scheme." << r.scheme << " = " << to_string(r.status) << " " << r.steps_completed << "/" << r.steps_requested
      << (r.message.empty() ? "" : " (" + r.message + ")") << "\n";
  if (!o.error.empty()) f << "error = " << o.error << "\n";
  f << "status = " << (o.complete ? "complete" : "incomplete") << "\n";
}

void write_diagnostics(const std::filesystem::path& path, const SpaceDiagnostics& d, const MultiscaleSpaces& s) {
  auto f = open_out(path);
  f << "aux1_size = " << s.aux1.size() << "\n"
    << "cem_size = " << s.cem.size() << "\n"
    << "aux2_size = " << s.aux2.size() << "\n"
    << "v2_size = " << s.v2.size() << "\n"
    << "layers = " << s.options.layers << "\n"
    << "ktilde = " << to_string(s.options.ktilde) << "\n"
    << "pi_idempotency = " << format_number(d.pi_idempotency) << "\n"
    << "pi_orthogonality = " << format_number(d.pi_orthogonality) << "\n"
    << "pi_reproduction = " << format_number(d.pi_reproduction) << "\n"
    << "cem_constraint = " << format_number(d.cem_constraint) << "\n"
    << "cem_support = " << format_number(d.cem_support) << "\n"
    << "v2_s_orthogonality = " << format_number(d.v2_s_orthogonality) << "\n"
    << "v2_l2_matching = " << format_number(d.v2_l2_matching) << "\n"
    << "v2_support = " << format_number(d.v2_support) << "\n"
    << "aux2_kernel = " << format_number(d.aux2_kernel) << "\n"
    << "gamma = " << format_number(d.gamma.gamma) << "\n"
    << "cem_min_singular = " << format_number(d.cem_min_singular) << "\n"
    << "v2_min_singular = " << format_number(d.v2_min_singular) << "\n";
}

void write_outputs(const RunConfig& cfg, const RunOutcome& o) {
  {
    auto f = open_out(cfg.output_dir / "errors.csv");
    f << "step,t,scheme,rel_l2,rel_energy\n";
    for (const auto& r : o.results) {
      if (!r.errors) continue;
      for (const auto& p : r.errors->points)
        f << p.step << ',' << format_number(p.time) << ',' << r.scheme << ',' << format_number(p.rel_l2) << ','
          << format_number(p.rel_energy) << '\n';
    }
  }
  {
    auto f = open_out(cfg.output_dir / "energy.csv");
    f << "step,t,scheme,F,G,kinetic,lyapunov\n";
    for (const auto& t : o.energy)
      for (const auto& p : t.points)
        f << p.step << ',' << format_number(p.time) << ',' << t.scheme << ',' << format_number(p.f) << ','
          << format_number(p.g) << ',' << format_number(p.kinetic) << ',' << format_number(p.lyapunov()) << '\n';
  }
  {
    auto f = open_out(cfg.output_dir / "runs.csv");
    f << "scheme,status,steps_completed,steps_requested,max_rel_l2,max_rel_energy,final_rel_l2,final_rel_energy,"
         "max_abs,max_newton_iterations,message\n";
    for (const auto& r : o.results) {
      const bool e = r.errors.has_value();
      f << r.scheme << ',' << to_string(r.status) << ',' << r.steps_completed << ',' << r.steps_requested << ','
        << (e ? format_number(r.errors->max_rel_l2()) : "") << ','
        << (e ? format_number(r.errors->max_rel_energy()) : "") << ','
        << (e ? format_number(r.errors->final_rel_l2()) : "") << ','
        << (e ? format_number(r.errors->final_rel_energy()) : "") << ',' << format_number(r.max_abs) << ','
        << r.max_newton_iterations() << ',' << csv_safe(r.message) << '\n';
    }
  }
  {
    auto f = open_out(cfg.output_dir / "stability_report.txt");
    if (o.stability)
      f << o.stability->to_key_value();
    else
      f << "dt = " << format_number(cfg.dt) << "\nresult = undefined\nnote = no multiscale spaces were built\n";
  }
}

}  // namespace

RunOutcome execute_run(const RunConfig& cfg, std::ostream& log) {
  RunOutcome o;
  std::filesystem::create_directories(cfg.output_dir);
  try {
    const GridHierarchy grid(cfg.coarse_cells, cfg.fine_cells);
    const FineProblem fine(grid, cfg.problem);
    const Vector u0 = cfg.problem.initial.interpolate(grid);

    std::unique_ptr<MultiscaleSpaces> spaces;
    double gamma = 0.0;
    if (cfg.needs_spaces()) {
      log << "building spaces (" << cfg.coarse_cells << "x" << cfg.coarse_cells << " coarse, " << cfg.fine_cells << "x"
          << cfg.fine_cells << " fine)\n";
      spaces = std::make_unique<MultiscaleSpaces>(build_spaces(grid, cfg.problem.kappa, cfg.spaces));
      o.diagnostics = diagnose_spaces(grid, cfg.problem.kappa, *spaces);
      write_diagnostics(cfg.output_dir / "spaces.txt", *o.diagnostics, *spaces);
      o.stability = stability_report(fine, *spaces, cfg.dt, cfg.stability);
      gamma = o.stability->gamma;
      log << "gamma = " << format_number(gamma) << ", dt* = "
          << (o.stability->dt_general ? format_number(*o.stability->dt_general) : "undefined") << "\n";
    }

    TransientOptions topt;
    topt.final_time = cfg.final_time;
    topt.snapshot_stride = cfg.snapshot_stride;
    topt.snapshot_dir = cfg.output_dir / "snapshots";

    log << "reference fine_be: " << cfg.steps() << " steps\n";
    FineBackwardEuler reference_stepper(fine, cfg.dt, cfg.newton);
    EnergyTracker ref_energy(fine, gamma);
    TransientOptions ropt = topt;
    ropt.store_trajectory = true;
    const bool report_reference =
        std::find(cfg.schemes.begin(), cfg.schemes.end(), Scheme::fine_be) != cfg.schemes.end();
    if (!report_reference) ropt.snapshot_stride = 0;
    const std::vector<Observer> ref_obs{ref_energy.observer()};
    RunResult reference = run_transient(reference_stepper, u0, ropt, ref_obs);
    const bool have_reference = reference.ok();
    if (!have_reference) {
      o.complete = false;
      o.error = "reference run " + to_string(reference.status) + ": " + reference.message;
    } else {
      ErrorSeries self{reference.scheme, {}};
      for (int n = 1; n <= reference.trajectory.steps(); ++n) {
        ErrorPoint p = relative_errors(fine, reference.trajectory.u[n], reference.trajectory.u[n]);
        p.step = n;
        p.time = n * cfg.dt;
        self.points.push_back(p);
      }
      reference.errors = std::move(self);
    }

    const int ns = static_cast<int>(cfg.schemes.size());
    o.results.resize(ns);
    o.energy.resize(ns);
    parallel_for(ns, cfg.threads, [&](int k) {
      const Scheme s = cfg.schemes[k];
      if (s == Scheme::fine_be) {
        o.results[k] = reference;
        o.results[k].trajectory = {};
        o.energy[k] = ref_energy.trace();
        return;
      }
      const auto stepper = make_stepper(s, fine, spaces.get(), cfg.dt, cfg.newton, cfg.reaction_mode, cfg.pexp_start);
      EnergyTracker tracker(fine, gamma);
      TransientOptions opt = topt;
      if (have_reference) opt.reference = &reference.trajectory;
      const std::vector<Observer> obs{tracker.observer()};
      o.results[k] = run_transient(*stepper, u0, opt, obs);
      o.energy[k] = tracker.trace();
    });
    for (const auto& r : o.results) {
      log << r.scheme << ": " << to_string(r.status) << " " << r.steps_completed << "/" << r.steps_requested
          << " steps, " << format_number(r.seconds) << " s";
      if (r.errors) log << ", max rel L2 " << format_number(r.errors->max_rel_l2());
      if (!r.message.empty()) log << " (" << r.message << ")";
      log << "\n";
      if (!r.ok()) o.complete = false;
    }
  } catch (const std::exception& e) {
    o.complete = false;
    o.error = e.what();
    log << "error: " << e.what() << "\n";
  }
  write_outputs(cfg, o);
  return o;
}

int cmd_run(const std::filesystem::path& config, const ConfigOverrides& overrides, std::ostream& out,
            std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = load_config(config, overrides);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    const RunOutcome o = execute_run(cfg, out);
    write_manifest(cfg, o, "run");
    out << "outputs in " << cfg.output_dir.string() << (o.complete ? "" : " (incomplete)") << "\n";
    return o.complete ? kExitOk : kExitIncomplete;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_stability(const std::filesystem::path& config, const ConfigOverrides& overrides, std::ostream& out,
                  std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = load_config(config, overrides);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  RunOutcome o;
  try {
    std::filesystem::create_directories(cfg.output_dir);
    const GridHierarchy grid(cfg.coarse_cells, cfg.fine_cells);
    const FineProblem fine(grid, cfg.problem);
    const MultiscaleSpaces spaces = build_spaces(grid, cfg.problem.kappa, cfg.spaces);
    o.stability = stability_report(fine, spaces, cfg.dt, cfg.stability);
    auto f = open_out(cfg.output_dir / "stability_report.txt");
    f << o.stability->to_key_value();
    out << o.stability->to_key_value();
  } catch (const std::exception& e) {
    o.complete = false;
    o.error = e.what();
    err << "error: " << e.what() << "\n";
  }
  try {
    write_manifest(cfg, o, "stability");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  if (!o.complete) return kExitError;
  return o.stability->pass ? kExitOk : kExitIncomplete;
}

int cmd_kappa_generate(const KappaParams& p, const std::filesystem::path& file, std::ostream& out,
                       std::ostream& err) {
  try {
    const CellField kappa = generate_channel_kappa(p.fine_cells, p.seed, p.contrast, p.channels, p.complexity);
    std::ostringstream d;
    d << "kappa channels(" << to_string(p.complexity) << ", seed " << p.seed << ", contrast "
      << format_number(p.contrast) << ", " << p.channels << " channels), " << p.fine_cells << "x" << p.fine_cells;
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    write_matrix(file, to_matrix(kappa), {d.str(), "row iy, column ix"});
    out << "wrote " << file.string() << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_kappa_inspect(const std::filesystem::path& file, std::ostream& out, std::ostream& err) {
  try {
    const CellField kappa = load_kappa(file);
    out << "cells = " << kappa.fine_cells() << "x" << kappa.fine_cells() << "\n"
        << "min = " << format_number(kappa.min()) << "\n"
        << "max = " << format_number(kappa.max()) << "\n"
        << "contrast = " << format_number(kappa.contrast()) << "\n"
        << "channel_fraction = " << format_number(channel_fraction(kappa)) << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "contrast") return SweepAxis::contrast;
  if (name == "dt") return SweepAxis::dt;
  if (name == "layers") return SweepAxis::layers;
  throw ConfigError("unknown sweep axis '" + name + "' (valid: contrast, dt, layers)");
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::contrast: return "contrast";
    case SweepAxis::dt: return "dt";
    case SweepAxis::layers: return "layers";
  }
  return "unknown";
}

int cmd_sweep(const std::filesystem::path& config, SweepAxis axis, const std::vector<double>& values,
              const ConfigOverrides& overrides, std::ostream& out, std::ostream& err) {
  std::vector<RunConfig> cfgs;
  RunConfig base;
  try {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    const IniFile ini = IniFile::load(config);
    base = make_config(ini, config.parent_path(), overrides);
    const int steps = base.steps();
    for (std::size_t k = 0; k < values.size(); ++k) {
      IniFile v = ini;
      const double x = values[k];
      switch (axis) {
        case SweepAxis::contrast: v.set("problem", "contrast", format_number(x)); break;
        case SweepAxis::dt:
          // The step count is held fixed so that every value reaches an integer N.
          v.set("time", "dt", format_number(x));
          v.erase("time", "final_time");
          v.set("time", "steps", std::to_string(steps));
          break;
        case SweepAxis::layers:
          if (x != std::round(x) || x < 0) throw ConfigError("layers values must be nonnegative integers");
          v.set("spaces", "layers", std::to_string(static_cast<int>(x)));
          break;
      }
      ConfigOverrides ov = overrides;
      ov.output_dir = base.output_dir / (to_string(axis) + "_" + std::to_string(k));
      ov.threads = 1;
      RunConfig c = make_config(v, config.parent_path(), ov);
      cfgs.push_back(std::move(c));
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  const int n = static_cast<int>(cfgs.size());
  std::vector<RunOutcome> outcomes(n);
  std::vector<std::string> logs(n);
  parallel_for(n, base.threads, [&](int k) {
    std::ostringstream log;
    outcomes[k] = execute_run(cfgs[k], log);
    write_manifest(cfgs[k], outcomes[k], "sweep " + to_string(axis) + " value " + format_number(values[k]));
    logs[k] = log.str();
  });
  for (int k = 0; k < n; ++k) out << "[" << to_string(axis) << " = " << format_number(values[k]) << "]\n" << logs[k];

  try {
    std::filesystem::create_directories(base.output_dir);
    auto f = open_out(base.output_dir / "sweep.csv");
    f << "axis,value,status," << StabilityReport::csv_header();
    for (const Scheme s : base.schemes) {
      const std::string p = to_string(s);
      f << ',' << p << "_status," << p << "_steps," << p << "_final_rel_l2," << p << "_final_rel_energy," << p
        << "_max_abs";
    }
    f << ",message\n";
    bool all = true;
    for (int k = 0; k < n; ++k) {
      const RunOutcome& o = outcomes[k];
      all = all && o.complete;
      f << to_string(axis) << ',' << format_number(values[k]) << ',' << (o.complete ? "complete" : "incomplete")
        << ',';
      if (o.stability) {
        f << o.stability->csv_row();
      } else {
        const std::string header = StabilityReport::csv_header();
        const int cols = static_cast<int>(std::count(header.begin(), header.end(), ','));
        f << std::string(cols, ',');
      }
      for (const Scheme s : base.schemes) {
        const RunResult* r = o.find(s);
        if (!r) {
          f << ",not_run,,,,";
          continue;
        }
        f << ',' << to_string(r->status) << ',' << r->steps_completed << ','
          << (r->errors ? format_number(r->errors->final_rel_l2()) : "") << ','
          << (r->errors ? format_number(r->errors->final_rel_energy()) : "") << ',' << format_number(r->max_abs);
      }
      f << ',' << csv_safe(o.error) << '\n';
    }
    out << "wrote " << (base.output_dir / "sweep.csv").string() << "\n";
    return all ? kExitOk : kExitIncomplete;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace splitcem
