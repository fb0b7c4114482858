#include "splitcem/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "splitcem/error.hpp"
#include "splitcem/matrix_io.hpp"

namespace splitcem {

ChannelComplexity parse_complexity(const std::string& name) {
  if (name == "simple") return ChannelComplexity::simple;
  if (name == "complex") return ChannelComplexity::complex;
  throw ConfigError("unknown channel complexity '" + name + "' (valid: simple, complex)");
}

std::string to_string(ChannelComplexity c) {
  return c == ChannelComplexity::simple ? "simple" : "complex";
}

namespace {

constexpr int kWidth = 2;
constexpr int kMargin = 2;
constexpr int kGap = 3;

struct Strip {
  int x0, y0, x1, y1;  // inclusive cell box
};

using Channel = std::vector<Strip>;

class ChannelPlacer {
 public:
  ChannelPlacer(int n, std::uint64_t seed) : n_(n), rng_(seed), covered_(n * n, 0), blocked_(n * n, 0) {}

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  Strip horizontal(int y, int x0, int len) const { return {x0, y, x0 + len - 1, y + kWidth - 1}; }
  Strip vertical(int x, int y0, int len) const { return {x, y0, x + kWidth - 1, y0 + len - 1}; }

  Channel random_channel() {
    const int lo = kMargin;
    const int hi = n_ - kMargin;  // exclusive
    const int type = uniform(0, 2);
    if (type < 2) {
      const int len = uniform(n_ / 2, hi - lo);
      const int along = uniform(lo, hi - len);
      const int across = uniform(lo, hi - kWidth);
      return {type == 0 ? horizontal(across, along, len) : vertical(across, along, len)};
    }
    // L shape: a horizontal leg and a vertical leg sharing a corner block.
    const int lh = uniform(n_ / 4, n_ / 2);
    const int lv = uniform(n_ / 4, n_ / 2);
    const int cx = uniform(lo, hi - kWidth);
    const int cy = uniform(lo, hi - kWidth);
    const bool right = uniform(0, 1) == 1;
    const bool up = uniform(0, 1) == 1;
    const int hx0 = right ? cx : cx + kWidth - lh;
    const int vy0 = up ? cy : cy + kWidth - lv;
    return {horizontal(cy, hx0, lh), vertical(cx, vy0, lv)};
  }

  /// Perpendicular straight strip through a random cell of `other`.
  Channel crossing(const Channel& other) {
    const Strip& s = other[uniform(0, static_cast<int>(other.size()) - 1)];
    const bool was_horizontal = (s.x1 - s.x0) >= (s.y1 - s.y0);
    const int lo = kMargin;
    const int hi = n_ - kMargin;
    const int len = uniform(n_ / 3, hi - lo);
    if (was_horizontal) {
      const int x = std::clamp(uniform(s.x0, s.x1), lo, hi - kWidth);
      const int y0 = std::clamp(s.y0 - uniform(0, len - kWidth), lo, hi - len);
      return {vertical(x, y0, len)};
    }
    const int y = std::clamp(uniform(s.y0, s.y1), lo, hi - kWidth);
    const int x0 = std::clamp(s.x0 - uniform(0, len - kWidth), lo, hi - len);
    return {horizontal(y, x0, len)};
  }

  bool inside(const Channel& c) const {
    for (const auto& s : c)
      if (s.x0 < 0 || s.y0 < 0 || s.x1 >= n_ || s.y1 >= n_) return false;
    return true;
  }

  bool free_of_others(const Channel& c) const {
    for (const auto& s : c)
      for (int y = s.y0; y <= s.y1; ++y)
        for (int x = s.x0; x <= s.x1; ++x)
          if (blocked_[y * n_ + x]) return false;
    return true;
  }

  void place(const Channel& c) {
    for (const auto& s : c) {
      for (int y = s.y0; y <= s.y1; ++y)
        for (int x = s.x0; x <= s.x1; ++x) covered_[y * n_ + x] = 1;
      for (int y = std::max(0, s.y0 - kGap); y <= std::min(n_ - 1, s.y1 + kGap); ++y)
        for (int x = std::max(0, s.x0 - kGap); x <= std::min(n_ - 1, s.x1 + kGap); ++x)
          blocked_[y * n_ + x] = 1;
    }
  }

  const std::vector<char>& covered() const { return covered_; }

 private:
  int n_;
  std::mt19937_64 rng_;
  std::vector<char> covered_;
  std::vector<char> blocked_;
};

}  // namespace

CellField generate_channel_kappa(int fine_cells, std::uint64_t seed, double contrast, int channels,
                                 ChannelComplexity complexity) {
  if (fine_cells < 1) throw ConfigError("channel field needs at least one cell per side");
  if (!(contrast >= 1.0)) throw ConfigError("channel contrast must be at least 1");
  if (channels < 0) throw ConfigError("channel count must be nonnegative");
  CellField kappa(fine_cells, 1.0);
  if (channels == 0 || contrast == 1.0) return kappa;
  if (fine_cells < 4 * (kMargin + kWidth)) {
    std::ostringstream msg;
    msg << "channels do not fit into a " << fine_cells << " x " << fine_cells << " field";
    throw ConfigError(msg.str());
  }
  ChannelPlacer placer(fine_cells, seed);
  const int total = complexity == ChannelComplexity::simple ? channels : 2 * channels;
  Channel previous;
  for (int k = 0; k < total; ++k) {
    const bool cross = complexity == ChannelComplexity::complex && k % 2 == 1;
    bool placed = false;
    for (int attempt = 0; attempt < 4000 && !placed; ++attempt) {
      Channel c = cross ? placer.crossing(previous) : placer.random_channel();
      if (!placer.inside(c)) continue;
      if (complexity == ChannelComplexity::simple && !placer.free_of_others(c)) continue;
      placer.place(c);
      previous = std::move(c);
      placed = true;
    }
    if (!placed) {
      std::ostringstream msg;
      msg << "cannot place channel " << k + 1 << " of " << total << " in a " << fine_cells << " x "
          << fine_cells << " field: channels exceed the domain";
      throw ConfigError(msg.str());
    }
  }
  const auto& cov = placer.covered();
  for (int e = 0; e < fine_cells * fine_cells; ++e)
    if (cov[e]) kappa[e] = contrast;
  return kappa;
}

double channel_fraction(const CellField& kappa) {
  if (kappa.empty()) return 0.0;
  const double lo = kappa.min();
  int count = 0;
  for (int e = 0; e < kappa.size(); ++e) count += kappa[e] > lo ? 1 : 0;
  return static_cast<double>(count) / kappa.size();
}

CellField load_kappa(const std::filesystem::path& path, int expected_cells) {
  const Matrix m = read_matrix(path);
  if (m.rows() != m.cols() || (expected_cells > 0 && m.rows() != expected_cells)) {
    std::ostringstream msg;
    msg << path.string() << ": field is " << m.rows() << " x " << m.cols() << ", expected ";
    if (expected_cells > 0)
      msg << expected_cells << " x " << expected_cells;
    else
      msg << "a square matrix";
    throw ConfigError(msg.str());
  }
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      if (!(m(r, c) > 0.0) || !std::isfinite(m(r, c))) {
        std::ostringstream msg;
        msg << path.string() << ": value " << m(r, c) << " at row " << r << ", column " << c
            << " is not positive";
        throw ConfigError(msg.str());
      }
  return cell_field_from_matrix(m);
}

SourceKind parse_source_kind(const std::string& name) {
  if (name == "singular") return SourceKind::singular;
  if (name == "smooth") return SourceKind::smooth;
  throw ConfigError("unknown source kind '" + name + "' (valid: singular, smooth)");
}

CellField make_source(int fine_cells, SourceKind kind, const SourceParams& params) {
  CellField g0(fine_cells, 0.0);
  if (kind == SourceKind::singular) {
    const int cx = params.cell_x < 0 ? fine_cells / 2 : params.cell_x;
    const int cy = params.cell_y < 0 ? fine_cells / 2 : params.cell_y;
    if (cx >= fine_cells || cy >= fine_cells) {
      std::ostringstream msg;
      msg << "source cell (" << cx << ", " << cy << ") is outside the " << fine_cells << " x "
          << fine_cells << " grid";
      throw ConfigError(msg.str());
    }
    g0[cy * fine_cells + cx] = params.magnitude;
    return g0;
  }
  const double h = 1.0 / fine_cells;
  for (int iy = 0; iy < fine_cells; ++iy)
    for (int ix = 0; ix < fine_cells; ++ix) {
      const double x = (ix + 0.5) * h;
      const double y = (iy + 0.5) * h;
      // The product is formed first so the field is exactly symmetric in x and y.
      g0[iy * fine_cells + ix] =
          params.amplitude * (std::sin(std::numbers::pi * x) * std::sin(std::numbers::pi * y));
    }
  return g0;
}

double a1_coefficient(double x, double y) noexcept {
  return 2.0 * std::cos(20.0 * std::numbers::pi * x) * std::cos(20.0 * std::numbers::pi * y);
}

CellField a1_field(int fine_cells) {
  CellField a(fine_cells, 0.0);
  const double h = 1.0 / fine_cells;
  for (int iy = 0; iy < fine_cells; ++iy)
    for (int ix = 0; ix < fine_cells; ++ix)
      a[iy * fine_cells + ix] = a1_coefficient((ix + 0.5) * h, (iy + 0.5) * h);
  return a;
}

double InitialCondition::value(double x, double y) const noexcept {
  if (kind == InitialKind::zero) return 0.0;
  return amplitude * std::sin(std::numbers::pi * x) * std::sin(std::numbers::pi * y);
}

Vector InitialCondition::interpolate(const GridHierarchy& grid) const {
  Vector u(grid.num_dofs());
  for (int d = 0; d < grid.num_dofs(); ++d) {
    const int nd = grid.node_of_dof(d);
    u[d] = value(grid.node_x(nd), grid.node_y(nd));
  }
  return u;
}

std::string InitialCondition::describe() const {
  if (kind == InitialKind::zero) return "zero";
  std::ostringstream s;
  s << "sine_product:" << amplitude;
  return s.str();
}

InitialCondition parse_initial_condition(const std::string& text) {
  InitialCondition ic;
  if (text == "zero" || text == "0") return ic;
  const std::string prefix = "sine_product";
  if (text.rfind(prefix, 0) == 0) {
    ic.kind = InitialKind::sine_product;
    if (text.size() > prefix.size()) {
      if (text[prefix.size()] != ':') throw ConfigError("malformed initial condition '" + text + "'");
      try {
        ic.amplitude = std::stod(text.substr(prefix.size() + 1));
      } catch (const std::exception&) {
        throw ConfigError("malformed initial condition amplitude in '" + text + "'");
      }
    }
    return ic;
  }
  throw ConfigError("unknown initial condition '" + text + "' (valid: zero, sine_product[:A])");
}

void ProblemSpec::validate(const GridHierarchy& grid) const {
  if (kappa.fine_cells() != grid.fine_cells()) {
    std::ostringstream msg;
    msg << "kappa has " << kappa.fine_cells() << " cells per side, the grid has " << grid.fine_cells();
    throw ConfigError(msg.str());
  }
  kappa.require_positive("kappa");
  const auto check = [&](const CellField& f, const char* what) {
    if (!f.empty() && f.fine_cells() != grid.fine_cells())
      throw ConfigError(std::string(what) + " does not match the grid");
  };
  check(reaction.source(), "source g0");
  check(reaction.a1(), "a1 field");
}

Scheme parse_scheme(const std::string& name) {
  if (name == "fine_be") return Scheme::fine_be;
  if (name == "fine_fe") return Scheme::fine_fe;
  if (name == "cem") return Scheme::cem;
  if (name == "cem_plus") return Scheme::cem_plus;
  if (name == "pexp") return Scheme::pexp;
  throw ConfigError("unknown scheme '" + name + "' (valid: fine_be, fine_fe, cem, cem_plus, pexp)");
}

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::fine_be: return "fine_be";
    case Scheme::fine_fe: return "fine_fe";
    case Scheme::cem: return "cem";
    case Scheme::cem_plus: return "cem_plus";
    case Scheme::pexp: return "pexp";
  }
  return "fine_be";
}

std::vector<std::string> preset_names() {
  return {"E1", "E2", "E3", "E4", "E5", "E6", "E7", "E8", "E9"};
}

Preset preset(const std::string& name, const PresetOverrides& ov) {
  const auto names = preset_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    std::ostringstream msg;
    msg << "unknown preset '" << name << "' (valid:";
    for (const auto& n : names) msg << ' ' << n;
    msg << ')';
    throw ConfigError(msg.str());
  }
  const int index = static_cast<int>(it - names.begin()) + 1;

  Preset p;
  p.name = name;
  p.coarse_cells = ov.coarse_cells;
  p.fine_cells = ov.fine_cells;
  const int nf = p.fine_cells;
  const bool complex = index == 3 || index == 4 || index == 6 || index == 9;
  const bool smooth = index == 2 || index == 4;
  const bool cosine = index == 5 || index == 6;

  const auto cx = complex ? ChannelComplexity::complex : ChannelComplexity::simple;
  p.problem.kappa = generate_channel_kappa(nf, ov.seed, ov.contrast, ov.channels, cx);
  {
    std::ostringstream d;
    d << "channels(" << to_string(cx) << ", seed " << ov.seed << ", contrast " << ov.contrast << ", "
      << ov.channels << " channels)";
    p.problem.kappa_description = d.str();
  }
  const SourceKind sk = smooth ? SourceKind::smooth : SourceKind::singular;
  CellField g0 = make_source(nf, sk, ov.source);
  p.problem.source_description = smooth ? "smooth" : "singular";
  if (cosine)
    p.problem.reaction = ReactionTerm::cosine(a1_field(nf), std::move(g0));
  else
    p.problem.reaction = ReactionTerm::cubic(10.0, std::move(g0));

  if (index == 7) p.problem.alpha.kind = DiffusionKind::one_plus_u_sq;
  if (index == 8 || index == 9) {
    p.problem.alpha.kind = DiffusionKind::two_plus_cos;
    p.dt = 0.05 / 1500.0;
    p.steps = 1500;
  }
  p.semi_implicit_reaction = index >= 7;
  p.schemes = {Scheme::fine_be, Scheme::cem, Scheme::cem_plus, Scheme::pexp};
  p.expected = "pexp error curves coincide with cem_plus; cem_plus at or below cem";
  p.notes = "initial condition u0 = 0 (assumed); kappa and g0 are procedural stand-ins";
  return p;
}

}  // namespace splitcem
