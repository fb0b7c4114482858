#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "splitcem/problems.hpp"
#include "splitcem/spaces.hpp"
#include "splitcem/stability.hpp"
#include "splitcem/steppers.hpp"

namespace splitcem {

/// Sectioned key = value text. '#' and ';' start comments; keys outside a
/// section are rejected; duplicate keys are errors.
class IniFile {
 public:
  static IniFile parse(std::istream& in, const std::string& source = "<config>");
  static IniFile load(const std::filesystem::path& path);

  bool has(const std::string& section, const std::string& key) const;
  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, const std::string& value);
  void erase(const std::string& section, const std::string& key);
  /// Keys present in the file but not listed in `known` ("section.key").
  std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const;
  std::string source() const { return source_; }
  /// Canonical "section.key = value" listing, sorted.
  std::string canonical() const;

 private:
  std::string source_;
  std::map<std::string, std::map<std::string, std::string>> values_;
};

/// Command-line values that take precedence over the file.
struct ConfigOverrides {
  std::optional<std::filesystem::path> output_dir;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
};

struct RunConfig {
  std::string source;  // config path
  std::string canonical_text;
  std::uint64_t hash = 0;  // FNV-1a of canonical_text

  int coarse_cells = 10;
  int fine_cells = 100;
  SpaceOptions spaces;

  std::string preset;  // empty for an explicit problem
  PresetOverrides preset_overrides;
  ProblemSpec problem;

  double dt = 1e-4;
  double final_time = 0.05;
  std::vector<Scheme> schemes;
  ReactionMode reaction_mode = ReactionMode::fully_explicit;
  PexpStart pexp_start = PexpStart::coupled;
  NewtonConfig newton;
  StabilityOptions stability;

  std::filesystem::path output_dir = "out";
  int snapshot_stride = 0;
  int threads = 1;

  bool needs_spaces() const;
  int steps() const;
};

/// Reads and validates a configuration; problem files are loaded here so
/// that missing inputs fail before any output is written.
RunConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});
RunConfig make_config(const IniFile& ini, const std::filesystem::path& base_dir,
                      const ConfigOverrides& overrides = {});

std::uint64_t fnv1a(const std::string& text);

/// Documented keys, one "section.key" per entry.
const std::vector<std::string>& config_keys();

}  // namespace splitcem
