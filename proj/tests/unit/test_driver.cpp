#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "splitcem/driver.hpp"
#include "splitcem/error.hpp"

using namespace splitcem;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("splitcem_drv_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  if (!s.empty() && s.back() == ',') out.push_back("");
  return out;
}

// Small channelized problem with a cubic reaction and a singular source.
const char* kSmall =
    "[grid]\ncoarse_cells = 4\nfine_cells = 16\n"
    "[problem]\ncontrast = 100\nchannels = 1\nreaction = cubic\nsource = singular\nsource_magnitude = 200\n"
    "[time]\ndt = 1e-3\nfinal_time = 0.01\n";

fs::path write_config(const fs::path& dir, const std::string& body, const std::string& name = "run.ini") {
  std::ofstream(dir / name) << body << "[output]\ndir = out\n";
  return dir / name;
}

int run(const fs::path& cfg, ConfigOverrides ov = {}) {
  std::ostringstream out, err;
  return cmd_run(cfg, ov, out, err);
}

}  // namespace

TEST(CmdRun, WritesEveryArtifact) {
  const fs::path d = temp_dir("full");
  ASSERT_EQ(run(write_config(d, kSmall)), kExitOk);
  for (const char* f : {"errors.csv", "energy.csv", "runs.csv", "stability_report.txt", "spaces.txt", "MANIFEST"})
    EXPECT_TRUE(fs::exists(d / "out" / f)) << f;
  const auto e = lines(d / "out" / "errors.csv");
  EXPECT_EQ(e.front(), "step,t,scheme,rel_l2,rel_energy");
  EXPECT_EQ(e.size(), 1u + 4u * 10u);
  const std::string manifest = slurp(d / "out" / "MANIFEST");
  EXPECT_NE(manifest.find("config_hash = fnv1a:"), std::string::npos);
  EXPECT_NE(manifest.find("status = complete"), std::string::npos);
  EXPECT_NE(manifest.find("spaces " + std::string(kVersion)), std::string::npos);
  EXPECT_EQ(lines(d / "out" / "energy.csv").front(), "step,t,scheme,F,G,kinetic,lyapunov");
}

TEST(CmdRun, ReferenceAgainstItselfIsZero) {
  const fs::path d = temp_dir("ref");
  ASSERT_EQ(run(write_config(d, std::string(kSmall) + "[schemes]\nrun = fine_be\n")), kExitOk);
  const auto e = lines(d / "out" / "errors.csv");
  ASSERT_EQ(e.size(), 11u);
  for (std::size_t i = 1; i < e.size(); ++i) {
    const auto f = split(e[i]);
    ASSERT_EQ(f.size(), 5u);
    EXPECT_EQ(f[2], "fine_be");
    EXPECT_EQ(f[3], "0");
    EXPECT_EQ(f[4], "0");
  }
  EXPECT_FALSE(fs::exists(d / "out" / "spaces.txt"));
}

TEST(CmdRun, MissingKappaFileIsAConfigErrorWithoutOutputs) {
  const fs::path d = temp_dir("missing");
  const fs::path cfg = write_config(d, "[grid]\ncoarse_cells = 2\nfine_cells = 8\n[problem]\nkappa_file = none.txt\n");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(cfg, {}, out, err), kExitConfig);
  EXPECT_NE(err.str().find("none.txt"), std::string::npos);
  EXPECT_FALSE(fs::exists(d / "out"));
  EXPECT_EQ(cmd_stability(cfg, {}, out, err), kExitConfig);
  EXPECT_FALSE(fs::exists(d / "out"));
}

TEST(CmdRun, RerunsAreByteIdentical) {
  const fs::path d = temp_dir("rerun");
  const fs::path cfg = write_config(d, kSmall);
  ASSERT_EQ(run(cfg, {.output_dir = d / "a", .threads = 1}), kExitOk);
  ASSERT_EQ(run(cfg, {.output_dir = d / "b", .threads = 2}), kExitOk);
  for (const char* f : {"errors.csv", "energy.csv", "stability_report.txt"})
    EXPECT_EQ(slurp(d / "a" / f), slurp(d / "b" / f)) << f;
}

TEST(CmdRun, FailedSchemeMarksTheManifestIncomplete) {
  const fs::path d = temp_dir("blowup");
  const fs::path cfg =
      write_config(d, "[grid]\ncoarse_cells = 2\nfine_cells = 8\n[problem]\ninitial = sine_product\n"
                      "[time]\ndt = 0.01\nsteps = 200\n[schemes]\nrun = fine_be, fine_fe\n");
  EXPECT_EQ(run(cfg), kExitIncomplete);
  const std::string manifest = slurp(d / "out" / "MANIFEST");
  EXPECT_NE(manifest.find("scheme.fine_fe = blow_up"), std::string::npos) << manifest;
  EXPECT_NE(manifest.find("status = incomplete"), std::string::npos);
  // Partial series of the blown-up scheme are kept.
  EXPECT_GT(lines(d / "out" / "errors.csv").size(), 201u);
}

TEST(CmdRun, SnapshotsFollowTheStride) {
  const fs::path d = temp_dir("snap");
  const fs::path cfg = write_config(d, std::string(kSmall) + "[schemes]\nrun = fine_be, pexp\n");
  std::ofstream(cfg, std::ios::app) << "snapshot_stride = 5\n";
  ASSERT_EQ(run(cfg), kExitOk);
  int count = 0;
  for (const auto& e : fs::recursive_directory_iterator(d / "out"))
    if (e.path().filename().string().rfind("u_", 0) == 0) ++count;
  EXPECT_EQ(count, 2 * 3);  // steps 0, 5, 10 for both schemes
}

TEST(CmdStability, PassFailAndEmptySlowSpace) {
  const fs::path d = temp_dir("stab");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_stability(write_config(d, kSmall), {}, out, err), kExitIncomplete) << err.str();
  const std::string report = slurp(d / "out" / "stability_report.txt");
  double dt_star = 0.0;
  {
    std::istringstream in(report);
    for (std::string l; std::getline(in, l);)
      if (l.rfind("dt_star_general = ", 0) == 0) dt_star = std::stod(l.substr(18));
  }
  ASSERT_GT(dt_star, 0.0);
  EXPECT_NE(report.find("result = FAIL"), std::string::npos);  // dt = 1e-3 exceeds dt*

  const std::string small_dt = std::string(kSmall).replace(std::string(kSmall).find("dt = 1e-3"), 9,
                                                          "dt = " + format_number(dt_star / 2));
  const fs::path p2 = d / "pass";
  fs::create_directories(p2);
  std::string body = small_dt;
  body.replace(body.find("final_time = 0.01"), 17, "steps = 4");
  ASSERT_EQ(cmd_stability(write_config(p2, body), {}, out, err), kExitOk) << err.str();
  EXPECT_NE(slurp(p2 / "out" / "stability_report.txt").find("result = PASS"), std::string::npos);

  const fs::path p3 = d / "empty";
  fs::create_directories(p3);
  cmd_stability(write_config(p3, std::string(kSmall) + "[spaces]\nslow_modes = 0\n"), {}, out, err);
  const std::string empty = slurp(p3 / "out" / "stability_report.txt");
  EXPECT_NE(empty.find("lambda2 = undefined"), std::string::npos) << empty;
  EXPECT_NE(empty.find("empty"), std::string::npos);
}

TEST(CmdKappa, GenerateInspectRoundTripAndSeeds) {
  const fs::path d = temp_dir("kappa");
  std::ostringstream out, err;
  KappaParams p;
  p.fine_cells = 40;
  p.contrast = 1e4;
  p.channels = 3;
  ASSERT_EQ(cmd_kappa_generate(p, d / "a.txt", out, err), kExitOk);
  p.seed = 8;
  ASSERT_EQ(cmd_kappa_generate(p, d / "b.txt", out, err), kExitOk);
  EXPECT_NE(slurp(d / "a.txt"), slurp(d / "b.txt"));
  std::ostringstream info;
  ASSERT_EQ(cmd_kappa_inspect(d / "a.txt", info, err), kExitOk);
  EXPECT_NE(info.str().find("contrast = 10000\n"), std::string::npos) << info.str();
  p.contrast = 1.0;
  ASSERT_EQ(cmd_kappa_generate(p, d / "u.txt", out, err), kExitOk);
  std::ostringstream uni;
  cmd_kappa_inspect(d / "u.txt", uni, err);
  EXPECT_NE(uni.str().find("contrast = 1\n"), std::string::npos);
  EXPECT_EQ(cmd_kappa_inspect(d / "nope.txt", uni, err), kExitConfig);
  p.channels = 1000;
  p.contrast = 10.0;
  EXPECT_EQ(cmd_kappa_generate(p, d / "c.txt", out, err), kExitConfig);
}

TEST(CmdSweep, ContrastRowsAndSingleValueConsistency) {
  const fs::path d = temp_dir("sweep");
  const fs::path cfg = write_config(d, std::string(kSmall) + "[schemes]\nrun = fine_be, pexp\n");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_sweep(cfg, SweepAxis::contrast, {1e2, 1e4, 1e6}, {}, out, err), kExitOk) << err.str();
  const auto rows = lines(d / "out" / "sweep.csv");
  ASSERT_EQ(rows.size(), 4u);
  const auto header = split(rows[0]);
  const auto col = std::find(header.begin(), header.end(), "lambda_full") - header.begin();
  double prev = 0.0;
  for (int k = 1; k <= 3; ++k) {
    const auto f = split(rows[k]);
    ASSERT_EQ(f.size(), header.size()) << rows[k];
    const double lam = std::stod(f[col]);
    EXPECT_GT(lam, prev);
    prev = lam;
  }
  // The value 100 equals the config's contrast: the sweep run is the plain run.
  ASSERT_EQ(run(cfg, {.output_dir = d / "plain"}), kExitOk);
  for (const char* f : {"errors.csv", "energy.csv", "stability_report.txt"})
    EXPECT_EQ(slurp(d / "out" / "contrast_0" / f), slurp(d / "plain" / f)) << f;
}

TEST(CmdSweep, DtAcrossThreshold) {
  const fs::path d = temp_dir("sweep_dt");
  const fs::path cfg = write_config(d, std::string(kSmall) + "[schemes]\nrun = fine_be, pexp\n");
  std::ostringstream out, err;
  cmd_stability(cfg, {}, out, err);
  double dt_star = 0.0;
  {
    std::istringstream in(slurp(d / "out" / "stability_report.txt"));
    for (std::string l; std::getline(in, l);)
      if (l.rfind("dt_star_general = ", 0) == 0) dt_star = std::stod(l.substr(18));
  }
  ASSERT_GT(dt_star, 0.0);
  cmd_sweep(cfg, SweepAxis::dt, {dt_star / 4, dt_star / 2, 4 * dt_star, 16 * dt_star}, {}, out, err);
  const auto rows = lines(d / "out" / "sweep.csv");
  ASSERT_EQ(rows.size(), 5u);
  const auto header = split(rows[0]);
  const auto res = std::find(header.begin(), header.end(), "result") - header.begin();
  EXPECT_EQ(split(rows[1])[res], "PASS");
  EXPECT_EQ(split(rows[2])[res], "PASS");
  EXPECT_EQ(split(rows[3])[res], "FAIL");
  EXPECT_EQ(split(rows[4])[res], "FAIL");
  std::ostringstream bad;
  EXPECT_EQ(cmd_sweep(cfg, SweepAxis::layers, {1.5}, {}, out, bad), kExitConfig);
  EXPECT_THROW(parse_sweep_axis("grid"), ConfigError);
}

#ifdef SPLITCEM_CLI_PATH
TEST(Cli, ExitCodes) {
  const std::string exe = SPLITCEM_CLI_PATH;
  const auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(status(exe + " --help"), 0);
  EXPECT_EQ(status(exe + " --version"), 0);
  EXPECT_EQ(status(exe + " run --config /nonexistent.ini"), kExitConfig);
  EXPECT_EQ(status(exe + " frobnicate"), kExitConfig);
  const fs::path d = temp_dir("cli");
  const fs::path cfg = write_config(d, std::string(kSmall) + "[schemes]\nrun = fine_be\n");
  EXPECT_EQ(status(exe + " run --config " + cfg.string() + " --out " + (d / "o").string()), 0);
  EXPECT_TRUE(fs::exists(d / "o" / "errors.csv"));
  EXPECT_EQ(status(exe + " kappa generate --out " + (d / "k.txt").string() + " --fine-cells 40 --channels 2"), 0);
  EXPECT_EQ(status(exe + " kappa inspect " + (d / "k.txt").string()), 0);
}
#endif
