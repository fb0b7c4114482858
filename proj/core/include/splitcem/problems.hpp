#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "splitcem/coefficients.hpp"
#include "splitcem/fields.hpp"
#include "splitcem/grid.hpp"

namespace splitcem {

enum class ChannelComplexity { simple, complex };
ChannelComplexity parse_complexity(const std::string& name);
std::string to_string(ChannelComplexity c);

/// Background 1 with straight and L-shaped strips, two cells wide, of value
/// `contrast`. Simple fields keep strips separated by at least three cells;
/// complex fields place twice as many strips and let them cross.
/// Throws ConfigError when the strips cannot be placed.
CellField generate_channel_kappa(int fine_cells, std::uint64_t seed, double contrast, int channels,
                                 ChannelComplexity complexity);

/// Fraction of cells whose value differs from the minimum.
double channel_fraction(const CellField& kappa);

/// Reads an Nf x Nf field (expected_cells = 0 accepts any size) and
/// verifies positivity; errors name the offending row and column.
CellField load_kappa(const std::filesystem::path& path, int expected_cells = 0);

enum class SourceKind { singular, smooth };
SourceKind parse_source_kind(const std::string& name);

struct SourceParams {
  int cell_x = -1;  // singular: cell indices, -1 selects the centre cell
  int cell_y = -1;
  double magnitude = 1000.0;  // singular: value inside the cell
  double amplitude = 10.0;    // smooth: amplitude of sin(pi x) sin(pi y)
};

CellField make_source(int fine_cells, SourceKind kind, const SourceParams& params = {});

/// a1(x, y) = 2 cos(20 pi x) cos(20 pi y)
double a1_coefficient(double x, double y) noexcept;
CellField a1_field(int fine_cells);

enum class InitialKind { zero, sine_product };

struct InitialCondition {
  InitialKind kind = InitialKind::zero;
  double amplitude = 1.0;  // sine_product: amplitude * sin(pi x) sin(pi y)

  double value(double x, double y) const noexcept;
  /// Nodal interpolant on the interior dofs.
  Vector interpolate(const GridHierarchy& grid) const;
  std::string describe() const;
};
InitialCondition parse_initial_condition(const std::string& text);

struct ProblemSpec {
  CellField kappa;
  DiffusionNonlinearity alpha;
  ReactionTerm reaction;
  InitialCondition initial;
  std::string kappa_description;
  std::string source_description;

  double contrast() const { return kappa.contrast(); }
  /// Positive kappa, matching field sizes.
  void validate(const GridHierarchy& grid) const;
};

enum class Scheme { fine_be, fine_fe, cem, cem_plus, pexp };
Scheme parse_scheme(const std::string& name);
std::string to_string(Scheme s);

struct Preset {
  std::string name;
  ProblemSpec problem;
  int coarse_cells = 10;
  int fine_cells = 100;
  double dt = 1e-4;
  double final_time = 0.05;
  int steps = 500;
  std::vector<Scheme> schemes;
  bool semi_implicit_reaction = false;  // pexp evaluates g at u1^{n+1} + u2^n
  std::string expected;  // qualitative outcome
  std::string notes;     // assumptions carried by the preset
};

struct PresetOverrides {
  int coarse_cells = 10;
  int fine_cells = 100;
  double contrast = 1e4;
  std::uint64_t seed = 7;
  int channels = 6;
  SourceParams source;
};

inline constexpr std::uint64_t kDefaultKappaSeed = 7;

/// E1 ... E9; unknown names throw ConfigError listing the valid names.
Preset preset(const std::string& name, const PresetOverrides& overrides = {});
std::vector<std::string> preset_names();

}  // namespace splitcem
