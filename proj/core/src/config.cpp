#include "splitcem/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "splitcem/error.hpp"
#include "splitcem/matrix_io.hpp"
#include "splitcem/transient.hpp"

namespace splitcem {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : s + ",") {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

class Reader {
 public:
  Reader(const IniFile& ini) : ini_(ini) {}

  std::optional<std::string> str(const std::string& sec, const std::string& key) const {
    return ini_.get(sec, key);
  }

  template <class T>
  std::optional<T> number(const std::string& sec, const std::string& key) const {
    const auto v = ini_.get(sec, key);
    if (!v) return std::nullopt;
    T out{};
    const char* b = v->data();
    const char* e = b + v->size();
    const auto [p, ec] = std::from_chars(b, e, out);
    if (ec != std::errc() || p != e) bad(sec, key, *v, "a number");
    if constexpr (std::is_floating_point_v<T>)
      if (!std::isfinite(out)) bad(sec, key, *v, "a finite number");
    return out;
  }

  std::optional<bool> boolean(const std::string& sec, const std::string& key) const {
    const auto v = ini_.get(sec, key);
    if (!v) return std::nullopt;
    if (*v == "true" || *v == "yes" || *v == "1") return true;
    if (*v == "false" || *v == "no" || *v == "0") return false;
    bad(sec, key, *v, "true or false");
  }

  [[noreturn]] void bad(const std::string& sec, const std::string& key, const std::string& v,
                        const std::string& expected) const {
    throw ConfigError(ini_.source() + ": " + sec + "." + key + " = '" + v + "' is not " + expected);
  }

 private:
  const IniFile& ini_;
};

template <class F>
auto wrap(const IniFile& ini, const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(ini.source() + ": " + key + ": " + e.what());
  }
}

}  // namespace

IniFile IniFile::parse(std::istream& in, const std::string& source) {
  IniFile ini;
  ini.source_ = source;
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto c = line.find_first_of("#;");
    const std::string t = trim(c == std::string::npos ? line : line.substr(0, c));
    if (t.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      if (section.empty()) throw ConfigError(where + "empty section name");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside of a section");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "empty key");
    if (ini.has(section, key)) throw ConfigError(where + "duplicate key " + section + "." + key);
    ini.values_[section][key] = value;
  }
  return ini;
}

IniFile IniFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse(in, path.string());
}

bool IniFile::has(const std::string& section, const std::string& key) const {
  const auto s = values_.find(section);
  return s != values_.end() && s->second.count(key) > 0;
}

std::optional<std::string> IniFile::get(const std::string& section, const std::string& key) const {
  const auto s = values_.find(section);
  if (s == values_.end()) return std::nullopt;
  const auto k = s->second.find(key);
  if (k == s->second.end()) return std::nullopt;
  return k->second;
}

void IniFile::set(const std::string& section, const std::string& key, const std::string& value) {
  values_[section][key] = value;
}

void IniFile::erase(const std::string& section, const std::string& key) {
  const auto s = values_.find(section);
  if (s != values_.end()) s->second.erase(key);
}

std::vector<std::string> IniFile::unknown_keys(const std::vector<std::string>& known) const {
  std::vector<std::string> out;
  for (const auto& [sec, kv] : values_)
    for (const auto& [k, v] : kv) {
      const std::string full = sec + "." + k;
      if (std::find(known.begin(), known.end(), full) == known.end()) out.push_back(full);
    }
  return out;
}

std::string IniFile::canonical() const {
  std::ostringstream o;
  for (const auto& [sec, kv] : values_)
    for (const auto& [k, v] : kv) o << sec << '.' << k << " = " << v << '\n';
  return o.str();
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "grid.coarse_cells",      "grid.fine_cells",
      "spaces.aux_modes",       "spaces.slow_modes",
      "spaces.layers",          "spaces.ktilde",
      "problem.preset",         "problem.contrast",
      "problem.seed",           "problem.channels",
      "problem.complexity",     "problem.kappa_file",
      "problem.alpha",          "problem.reaction",
      "problem.reaction_scale", "problem.source",
      "problem.source_file",    "problem.source_magnitude",
      "problem.source_amplitude", "problem.source_cell_x",
      "problem.source_cell_y",  "problem.initial",
      "time.dt",                "time.final_time",
      "time.steps",             "schemes.run",
      "schemes.reaction_mode",  "schemes.pexp_start",
      "newton.max_iterations",
      "newton.atol",            "newton.rtol",
      "newton.divergence",      "stability.u_min",
      "stability.u_max",        "stability.samples",
      "stability.lambda_full",  "output.dir",
      "output.snapshot_stride", "run.threads",
  };
  return keys;
}

bool RunConfig::needs_spaces() const {
  return std::any_of(schemes.begin(), schemes.end(), [](Scheme s) {
    return s == Scheme::cem || s == Scheme::cem_plus || s == Scheme::pexp;
  });
}

int RunConfig::steps() const { return step_count(dt, final_time); }

namespace {

void resolve_explicit_problem(RunConfig& cfg, const Reader& r, const std::filesystem::path& base) {
  const int nf = cfg.fine_cells;
  ProblemSpec& p = cfg.problem;
  const auto resolve_path = [&](const std::string& f) {
    const std::filesystem::path path(f);
    return path.is_absolute() ? path : base / path;
  };

  if (const auto f = r.str("problem", "kappa_file")) {
    const auto path = resolve_path(*f);
    if (!std::filesystem::exists(path)) throw ConfigError("kappa file not found: " + path.string());
    p.kappa = load_kappa(path, nf);
    p.kappa_description = "file " + path.string();
  } else {
    const double contrast = cfg.preset_overrides.contrast;
    const int channels = cfg.preset_overrides.channels;
    if (channels == 0 || contrast == 1.0) {
      p.kappa = CellField(nf, 1.0);
      p.kappa_description = "uniform 1";
    } else {
      const auto cx = parse_complexity(r.str("problem", "complexity").value_or("simple"));
      p.kappa = generate_channel_kappa(nf, cfg.preset_overrides.seed, contrast, channels, cx);
      std::ostringstream d;
      d << "channels(" << to_string(cx) << ", seed " << cfg.preset_overrides.seed << ", contrast " << contrast
        << ", " << channels << " channels)";
      p.kappa_description = d.str();
    }
  }

  CellField g0;
  const std::string source = r.str("problem", "source").value_or("none");
  if (const auto f = r.str("problem", "source_file")) {
    const auto path = resolve_path(*f);
    if (!std::filesystem::exists(path)) throw ConfigError("source file not found: " + path.string());
    g0 = cell_field_from_matrix(read_matrix(path));
    if (g0.fine_cells() != nf) throw ConfigError("source file " + path.string() + " does not match the fine grid");
    p.source_description = "file " + path.string();
  } else if (source == "none") {
    p.source_description = "none";
  } else {
    g0 = make_source(nf, parse_source_kind(source), cfg.preset_overrides.source);
    p.source_description = source;
  }

  const std::string reaction = r.str("problem", "reaction").value_or(g0.empty() ? "none" : "linear");
  if (reaction == "none") {
    if (!g0.empty()) throw ConfigError("problem.reaction = none cannot carry a source; use linear with scale 0");
    p.reaction = ReactionTerm::none();
  } else if (reaction == "linear") {
    p.reaction = ReactionTerm::linear(r.number<double>("problem", "reaction_scale").value_or(0.0), g0);
  } else if (reaction == "cubic") {
    p.reaction = ReactionTerm::cubic(r.number<double>("problem", "reaction_scale").value_or(10.0),
                                     g0.empty() ? CellField(nf, 0.0) : g0);
  } else if (reaction == "cosine") {
    p.reaction = ReactionTerm::cosine(a1_field(nf), g0.empty() ? CellField(nf, 0.0) : g0);
  } else {
    throw ConfigError("unknown reaction '" + reaction + "' (valid: none, linear, cubic, cosine)");
  }
  p.alpha = DiffusionNonlinearity::parse(r.str("problem", "alpha").value_or("linear"));
  p.initial = parse_initial_condition(r.str("problem", "initial").value_or("zero"));
}

}  // namespace

RunConfig make_config(const IniFile& ini, const std::filesystem::path& base_dir, const ConfigOverrides& ov) {
  const auto unknown = ini.unknown_keys(config_keys());
  if (!unknown.empty()) {
    std::string msg = ini.source() + ": unknown key(s):";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
  const Reader r(ini);
  RunConfig cfg;
  cfg.source = ini.source();
  cfg.preset = r.str("problem", "preset").value_or("");

  std::optional<Preset> pre;
  PresetOverrides& po = cfg.preset_overrides;
  po.coarse_cells = r.number<int>("grid", "coarse_cells").value_or(10);
  po.fine_cells = r.number<int>("grid", "fine_cells").value_or(100);
  po.contrast = r.number<double>("problem", "contrast").value_or(cfg.preset.empty() ? 1.0 : 1e4);
  po.seed = r.number<std::uint64_t>("problem", "seed").value_or(kDefaultKappaSeed);
  if (ov.seed) po.seed = *ov.seed;
  po.channels = r.number<int>("problem", "channels").value_or(cfg.preset.empty() ? 0 : 6);
  if (auto v = r.number<int>("problem", "source_cell_x")) po.source.cell_x = *v;
  if (auto v = r.number<int>("problem", "source_cell_y")) po.source.cell_y = *v;
  if (auto v = r.number<double>("problem", "source_magnitude")) po.source.magnitude = *v;
  if (auto v = r.number<double>("problem", "source_amplitude")) po.source.amplitude = *v;
  if (!(po.contrast >= 1.0)) throw ConfigError("problem.contrast must be at least 1");
  if (po.channels < 0) throw ConfigError("problem.channels must be nonnegative");

  cfg.coarse_cells = po.coarse_cells;
  cfg.fine_cells = po.fine_cells;
  wrap(ini, "grid", [&] { return build_grids(cfg.coarse_cells, cfg.fine_cells); });

  if (!cfg.preset.empty()) {
    for (const char* k : {"kappa_file", "alpha", "reaction", "reaction_scale", "source", "source_file", "complexity"})
      if (ini.has("problem", k))
        throw ConfigError(ini.source() + ": problem." + k + " cannot be combined with problem.preset");
    pre = preset(cfg.preset, po);
    cfg.problem = pre->problem;
    if (auto v = r.str("problem", "initial")) cfg.problem.initial = parse_initial_condition(*v);
    cfg.dt = pre->dt;
    cfg.final_time = pre->final_time;
    cfg.schemes = pre->schemes;
    cfg.reaction_mode = pre->semi_implicit_reaction ? ReactionMode::semi_implicit : ReactionMode::fully_explicit;
  } else {
    resolve_explicit_problem(cfg, r, base_dir);
    cfg.schemes = {Scheme::fine_be, Scheme::cem, Scheme::cem_plus, Scheme::pexp};
  }

  cfg.spaces.aux_modes = r.number<int>("spaces", "aux_modes").value_or(3);
  cfg.spaces.slow_modes = r.number<int>("spaces", "slow_modes").value_or(1);
  cfg.spaces.layers = r.number<int>("spaces", "layers").value_or(2);
  if (auto v = r.str("spaces", "ktilde")) cfg.spaces.ktilde = parse_ktilde_variant(*v);
  if (cfg.spaces.aux_modes < 1) throw ConfigError("spaces.aux_modes must be at least 1");
  if (cfg.spaces.slow_modes < 0) throw ConfigError("spaces.slow_modes must be nonnegative");
  if (cfg.spaces.layers < 0) throw ConfigError("spaces.layers must be nonnegative");

  if (auto v = r.number<double>("time", "dt")) cfg.dt = *v;
  if (auto v = r.number<double>("time", "final_time")) cfg.final_time = *v;
  if (auto v = r.number<int>("time", "steps")) {
    if (ini.has("time", "final_time")) throw ConfigError("give time.steps or time.final_time, not both");
    if (*v < 1) throw ConfigError("time.steps must be positive");
    cfg.final_time = *v * cfg.dt;
  }
  cfg.steps();

  if (auto v = r.str("schemes", "run")) {
    cfg.schemes.clear();
    for (const auto& name : split_list(*v)) {
      const Scheme s = parse_scheme(name);
      if (std::find(cfg.schemes.begin(), cfg.schemes.end(), s) == cfg.schemes.end()) cfg.schemes.push_back(s);
    }
  }
  if (cfg.schemes.empty()) throw ConfigError("schemes.run must name at least one scheme");
  if (auto v = r.str("schemes", "reaction_mode"); v && *v != "auto") cfg.reaction_mode = parse_reaction_mode(*v);
  if (auto v = r.str("schemes", "pexp_start")) cfg.pexp_start = parse_pexp_start(*v);

  if (auto v = r.number<int>("newton", "max_iterations")) cfg.newton.max_iterations = *v;
  if (auto v = r.number<double>("newton", "atol")) cfg.newton.atol = *v;
  if (auto v = r.number<double>("newton", "rtol")) cfg.newton.rtol = *v;
  if (auto v = r.number<double>("newton", "divergence")) cfg.newton.divergence = *v;
  cfg.newton.validate();

  if (auto v = r.number<double>("stability", "u_min")) cfg.stability.u_min = *v;
  if (auto v = r.number<double>("stability", "u_max")) cfg.stability.u_max = *v;
  if (auto v = r.number<int>("stability", "samples")) cfg.stability.samples = *v;
  if (auto v = r.boolean("stability", "lambda_full")) cfg.stability.compute_lambda_full = *v;
  if (!(cfg.stability.u_min <= cfg.stability.u_max)) throw ConfigError("stability.u_min exceeds stability.u_max");
  if (cfg.stability.samples < 1) throw ConfigError("stability.samples must be positive");

  if (auto v = r.str("output", "dir")) {
    const std::filesystem::path p(*v);
    cfg.output_dir = p.is_absolute() ? p : base_dir / p;
  }
  if (ov.output_dir) cfg.output_dir = *ov.output_dir;
  cfg.snapshot_stride = r.number<int>("output", "snapshot_stride").value_or(0);
  if (cfg.snapshot_stride < 0) throw ConfigError("output.snapshot_stride must be nonnegative");
  cfg.threads = r.number<int>("run", "threads").value_or(1);
  if (ov.threads) cfg.threads = *ov.threads;
  if (cfg.threads < 1) throw ConfigError("threads must be at least 1");
  cfg.spaces.threads = cfg.threads;

  cfg.problem.validate(GridHierarchy(cfg.coarse_cells, cfg.fine_cells));

  // Command-line overrides that change results enter the hash.
  IniFile effective = ini;
  if (ov.seed) effective.set("problem", "seed", std::to_string(*ov.seed));
  cfg.canonical_text = effective.canonical();
  cfg.hash = fnv1a(cfg.canonical_text);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  const IniFile ini = IniFile::load(path);
  return make_config(ini, path.parent_path(), overrides);
}

}  // namespace splitcem
