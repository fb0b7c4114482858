#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "splitcem/config.hpp"
#include "splitcem/stability.hpp"
#include "splitcem/transient.hpp"

namespace splitcem {

#ifdef SPLITCEM_VERSION
inline constexpr const char* kVersion = SPLITCEM_VERSION;
#else
inline constexpr const char* kVersion = "0.1.0";
#endif

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitIncomplete = 1,  // a run failed or blew up, or a stability check failed
  kExitConfig = 2,
  kExitError = 3,
};

struct RunOutcome {
  bool complete = true;
  std::string error;  // set when the run stopped before all schemes ran
  std::optional<StabilityReport> stability;
  std::optional<SpaceDiagnostics> diagnostics;
  std::vector<RunResult> results;  // config order
  std::vector<EnergyTrace> energy;

  const RunResult* find(Scheme s) const;
};

/// Builds grids and spaces once, runs the reference and every configured
/// scheme, and writes errors.csv, energy.csv, stability_report.txt and
/// MANIFEST under cfg.output_dir. Module errors are captured in the outcome.
RunOutcome execute_run(const RunConfig& cfg, std::ostream& log);

int cmd_run(const std::filesystem::path& config, const ConfigOverrides& overrides, std::ostream& out,
            std::ostream& err);
int cmd_stability(const std::filesystem::path& config, const ConfigOverrides& overrides, std::ostream& out,
                  std::ostream& err);

struct KappaParams {
  int fine_cells = 100;
  std::uint64_t seed = kDefaultKappaSeed;
  double contrast = 1e4;
  int channels = 6;
  ChannelComplexity complexity = ChannelComplexity::simple;
};
int cmd_kappa_generate(const KappaParams& params, const std::filesystem::path& file, std::ostream& out,
                       std::ostream& err);
int cmd_kappa_inspect(const std::filesystem::path& file, std::ostream& out, std::ostream& err);

enum class SweepAxis { contrast, dt, layers };
SweepAxis parse_sweep_axis(const std::string& name);
std::string to_string(SweepAxis a);

/// One row per value in sweep.csv; value k runs into <out>/<axis>_<k>/.
int cmd_sweep(const std::filesystem::path& config, SweepAxis axis, const std::vector<double>& values,
              const ConfigOverrides& overrides, std::ostream& out, std::ostream& err);

/// "%.12g"
std::string format_number(double v);

}  // namespace splitcem
