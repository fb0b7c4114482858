#include "splitcem/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "splitcem/assembly.hpp"
#include "splitcem/error.hpp"
#include "splitcem/linsolve.hpp"
#include "splitcem/parallel.hpp"

namespace splitcem {

std::string to_string(SpaceKind kind) {
  switch (kind) {
    case SpaceKind::aux1: return "aux1";
    case SpaceKind::cem: return "cem";
    case SpaceKind::aux2: return "aux2";
    case SpaceKind::v2: return "v2";
    case SpaceKind::custom: return "custom";
  }
  return "custom";
}

KtildeVariant parse_ktilde_variant(const std::string& name) {
  if (name == "scaled_kappa") return KtildeVariant::scaled_kappa;
  if (name == "partition_of_unity") return KtildeVariant::partition_of_unity;
  throw ConfigError("unknown ktilde variant '" + name +
                    "' (valid: scaled_kappa, partition_of_unity)");
}

std::string to_string(KtildeVariant v) {
  return v == KtildeVariant::scaled_kappa ? "scaled_kappa" : "partition_of_unity";
}

ReducedSpace custom_space(SparseMatrix basis) {
  ReducedSpace s;
  s.kind = SpaceKind::custom;
  s.basis = std::move(basis);
  return s;
}

SparseMatrix concatenate(const SparseMatrix& z1, const SparseMatrix& z2) {
  if (z1.rows() != z2.rows() && z1.cols() > 0 && z2.cols() > 0)
    throw NumericalError("concatenate: row counts differ");
  const Eigen::Index rows = z1.cols() > 0 ? z1.rows() : z2.rows();
  SparseMatrix out(rows, z1.cols() + z2.cols());
  out.reserve(z1.nonZeros() + z2.nonZeros());
  for (Eigen::Index c = 0; c < z1.cols(); ++c) {
    out.startVec(c);
    for (SparseMatrix::InnerIterator it(z1, c); it; ++it) out.insertBack(it.row(), c) = it.value();
  }
  for (Eigen::Index c = 0; c < z2.cols(); ++c) {
    out.startVec(z1.cols() + c);
    for (SparseMatrix::InnerIterator it(z2, c); it; ++it)
      out.insertBack(it.row(), z1.cols() + c) = it.value();
  }
  out.finalize();
  return out;
}

CellField ktilde_weight(const GridHierarchy& grid, const CellField& kappa, KtildeVariant variant) {
  kappa.require_positive("kappa");
  const double big_h = grid.coarse_size();
  if (variant == KtildeVariant::scaled_kappa) return kappa.scaled(1.0 / (big_h * big_h));
  // Sum of squared gradients of the four coarse hats touching the cell's coarse element,
  // 2 [xi^2 + (1-xi)^2 + eta^2 + (1-eta)^2] / H^2 in local coordinates.
  Vector w(grid.num_fine_elements());
  for (int e = 0; e < grid.num_fine_elements(); ++e) {
    const auto c = grid.element_center(e);
    const double xi = c[0] / big_h - std::floor(c[0] / big_h);
    const double eta = c[1] / big_h - std::floor(c[1] / big_h);
    const double s = 2.0 * (xi * xi + (1 - xi) * (1 - xi) + eta * eta + (1 - eta) * (1 - eta));
    w[e] = kappa[e] * s / (big_h * big_h);
  }
  return CellField(grid.fine_cells(), std::move(w));
}

namespace {

std::vector<int> expand_counts(std::span<const int> modes, int elements, const char* what) {
  std::vector<int> out;
  if (modes.size() == 1) {
    out.assign(elements, modes[0]);
  } else if (static_cast<int>(modes.size()) == elements) {
    out.assign(modes.begin(), modes.end());
  } else {
    std::ostringstream msg;
    msg << what << ": expected 1 or " << elements << " per-element counts, got " << modes.size();
    throw ConfigError(msg.str());
  }
  for (int i = 0; i < elements; ++i)
    if (out[i] < 0) {
      std::ostringstream msg;
      msg << what << ": negative mode count for coarse element " << i;
      throw ConfigError(msg.str());
    }
  return out;
}

/// Global-to-local index table for a list of global dofs.
std::vector<int> index_map(int size, const std::vector<int>& local_to_global) {
  std::vector<int> map(size, -1);
  for (int l = 0; l < static_cast<int>(local_to_global.size()); ++l) map[local_to_global[l]] = l;
  return map;
}

Matrix dense_block(const SparseMatrix& a, const std::vector<int>& l2g, const std::vector<int>& g2l) {
  const int n = static_cast<int>(l2g.size());
  Matrix out = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (SparseMatrix::InnerIterator it(a, l2g[j]); it; ++it) {
      const int i = g2l[it.row()];
      if (i >= 0) out(i, j) = it.value();
    }
  return out;
}

SparseMatrix sparse_block(const SparseMatrix& a, const std::vector<int>& l2g,
                          const std::vector<int>& g2l) {
  const int n = static_cast<int>(l2g.size());
  std::vector<Triplet> trip;
  trip.reserve(9 * n);
  for (int j = 0; j < n; ++j)
    for (SparseMatrix::InnerIterator it(a, l2g[j]); it; ++it) {
      const int i = g2l[it.row()];
      if (i >= 0) trip.emplace_back(i, j, it.value());
    }
  SparseMatrix out(n, n);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

/// Restricts column `col` of a global basis to local dofs; the support must lie inside.
Vector restrict_column(const SparseMatrix& z, int col, const std::vector<int>& g2l, int n_local) {
  Vector v = Vector::Zero(n_local);
  for (SparseMatrix::InnerIterator it(z, col); it; ++it) {
    const int l = g2l[it.row()];
    if (l < 0) {
      if (it.value() != 0.0) throw NumericalError("basis column leaves the local domain");
      continue;
    }
    v[l] = it.value();
  }
  return v;
}

/// Sign convention: the entry of largest magnitude (first on near-ties) is positive.
void normalize_sign(Eigen::Ref<Vector> v) {
  const double vmax = v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v[i]) >= (1.0 - 1e-8) * vmax) {
      if (v[i] < 0) v = -v;
      return;
    }
}

void verify_pairs(const Matrix& a, const Matrix& b, const EigenPairs& pairs, const char* what,
                  int element) {
  const EigenCheck chk = check_eigenpairs(a, b, pairs);
  if (!(chk.max_residual <= 1e-8) || !(chk.max_orthogonality <= 1e-10)) {
    std::ostringstream msg;
    msg << what << " eigenproblem on coarse element " << element << ": residual "
        << chk.max_residual << ", orthogonality defect " << chk.max_orthogonality;
    throw NumericalError(msg.str(), chk.max_residual);
  }
}

struct ElementColumns {
  std::vector<Triplet> entries;  // column index relative to the element
  std::vector<double> values;    // eigenvalues
  int count = 0;
};

ReducedSpace gather_columns(SpaceKind kind, int dofs, std::vector<ElementColumns>& parts) {
  ReducedSpace out;
  out.kind = kind;
  out.offsets.assign(parts.size() + 1, 0);
  std::size_t nnz = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    out.offsets[i + 1] = out.offsets[i] + parts[i].count;
    nnz += parts[i].entries.size();
  }
  std::vector<Triplet> trip;
  trip.reserve(nnz);
  out.origin.resize(out.offsets.back());
  const bool has_values =
      std::any_of(parts.begin(), parts.end(), [](const ElementColumns& p) { return !p.values.empty(); });
  if (has_values) out.eigenvalues.resize(out.offsets.back());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const int off = out.offsets[i];
    for (const auto& t : parts[i].entries) trip.emplace_back(t.row(), off + t.col(), t.value());
    for (int j = 0; j < parts[i].count; ++j) {
      out.origin[off + j] = {static_cast<int>(i), j};
      if (has_values) out.eigenvalues[off + j] = parts[i].values[j];
    }
    std::vector<Triplet>().swap(parts[i].entries);
  }
  out.basis.resize(dofs, out.offsets.back());
  out.basis.setFromTriplets(trip.begin(), trip.end());
  return out;
}

void append_local(ElementColumns& part, const Vector& v, const std::vector<int>& l2g, int col) {
  for (int l = 0; l < v.size(); ++l)
    if (v[l] != 0.0) part.entries.emplace_back(l2g[l], col, v[l]);
}

void require_aux_kind(const ReducedSpace& s, SpaceKind kind, const char* what) {
  if (s.kind != kind || !s.gram_weight)
    throw ConfigError(std::string(what) + ": expected a space of kind " + to_string(kind));
}

}  // namespace

ReducedSpace build_aux_space(const GridHierarchy& grid, const CellField& kappa,
                             std::span<const int> modes, KtildeVariant variant) {
  const int ne = grid.num_coarse_elements();
  const auto counts = expand_counts(modes, ne, "auxiliary space");
  Assembler asmb(grid);
  const SparseMatrix stiff = asmb.stiffness(kappa);
  auto s = std::make_shared<SparseMatrix>(asmb.mass(ktilde_weight(grid, kappa, variant)));

  std::vector<ElementColumns> parts(ne);
  for (int i = 0; i < ne; ++i) {
    const Patch local(grid, i, 0);
    const auto& l2g = local.local_to_global();
    const int n = local.num_local_dofs();
    if (counts[i] > n) {
      std::ostringstream msg;
      msg << "auxiliary space: " << counts[i] << " modes requested on coarse element " << i
          << " which has only " << n << " local dofs";
      throw ConfigError(msg.str());
    }
    if (counts[i] == 0) continue;
    const auto g2l = index_map(grid.num_dofs(), l2g);
    const Matrix a = dense_block(stiff, l2g, g2l);
    const Matrix b = dense_block(*s, l2g, g2l);
    EigenPairs pairs = eig_sym_generalized(a, b, counts[i], Spectrum::smallest);
    verify_pairs(a, b, pairs, "auxiliary", i);
    for (int j = 0; j < counts[i]; ++j) {
      normalize_sign(pairs.vectors.col(j));
      append_local(parts[i], pairs.vectors.col(j), l2g, j);
      parts[i].values.push_back(pairs.values[j]);
    }
    parts[i].count = counts[i];
  }
  ReducedSpace out = gather_columns(SpaceKind::aux1, grid.num_dofs(), parts);
  out.gram_weight = std::move(s);
  out.layers = 0;
  return out;
}

ReducedSpace build_aux_space(const GridHierarchy& grid, const CellField& kappa, int modes,
                             KtildeVariant variant) {
  const int m[1] = {modes};
  return build_aux_space(grid, kappa, std::span<const int>(m), variant);
}

Vector project_Pi(const ReducedSpace& aux, const Vector& u) {
  require_aux_kind(aux, SpaceKind::aux1, "project_Pi");
  if (aux.empty()) return Vector::Zero(u.size());
  const SparseMatrix& s = *aux.gram_weight;
  const SparseMatrix sz = s * aux.basis;
  const Matrix gram = Matrix(aux.basis.transpose() * sz);
  const Vector rhs = sz.transpose() * u;
  const Vector c = gram.llt().solve(rhs);
  return aux.basis * c;
}

Field project_Pi(const ReducedSpace& aux, const Field& u) {
  Field out = u;
  out.values() = project_Pi(aux, u.values());
  return out;
}

ReducedSpace build_aux2_space(const GridHierarchy& grid, const CellField& kappa,
                              const ReducedSpace& aux, std::span<const int> modes) {
  require_aux_kind(aux, SpaceKind::aux1, "second auxiliary space");
  const int ne = grid.num_coarse_elements();
  const auto counts = expand_counts(modes, ne, "second auxiliary space");
  Assembler asmb(grid);
  const SparseMatrix stiff = asmb.stiffness(kappa);
  auto mass = std::make_shared<SparseMatrix>(asmb.mass());
  const SparseMatrix& s = *aux.gram_weight;

  std::vector<ElementColumns> parts(ne);
  for (int i = 0; i < ne; ++i) {
    if (counts[i] == 0) continue;
    const Patch local(grid, i, 0);
    const auto& l2g = local.local_to_global();
    const int n = local.num_local_dofs();
    const auto g2l = index_map(grid.num_dofs(), l2g);
    const Matrix a = dense_block(stiff, l2g, g2l);
    const Matrix m = dense_block(*mass, l2g, g2l);
    const Matrix sl = dense_block(s, l2g, g2l);
    const int nl = aux.count(i);
    Matrix psi(n, nl);
    for (int j = 0; j < nl; ++j) psi.col(j) = restrict_column(aux.basis, aux.offsets[i] + j, g2l, n);

    // Orthonormal basis of the kernel of v -> psi^T S v.
    Matrix kernel;
    if (nl == 0) {
      kernel = Matrix::Identity(n, n);
    } else {
      const Matrix ct = sl * psi;  // n x nl
      Eigen::ColPivHouseholderQR<Matrix> rank_qr(ct);
      rank_qr.setThreshold(1e-10);
      if (rank_qr.rank() < nl) {
        std::ostringstream msg;
        msg << "second auxiliary space: auxiliary constraints on coarse element " << i
            << " are rank deficient";
        throw NumericalError(msg.str());
      }
      Eigen::HouseholderQR<Matrix> qr(ct);
      const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
      kernel = q.rightCols(n - nl);
    }
    const int dim = static_cast<int>(kernel.cols());
    if (counts[i] > dim) {
      std::ostringstream msg;
      msg << "second auxiliary space: " << counts[i] << " modes requested on coarse element " << i
          << " but the constrained space has dimension " << dim;
      throw ConfigError(msg.str());
    }
    const Matrix ar = kernel.transpose() * a * kernel;
    const Matrix mr = kernel.transpose() * m * kernel;
    const EigenPairs pairs = eig_sym_generalized(ar, mr, counts[i], Spectrum::smallest);
    verify_pairs(ar, mr, pairs, "second auxiliary", i);
    for (int j = 0; j < counts[i]; ++j) {
      Vector xi = kernel * pairs.vectors.col(j);
      xi /= std::sqrt(xi.dot(m * xi));
      normalize_sign(xi);
      if (nl > 0) {
        const double defect = (psi.transpose() * (sl * xi)).norm() / std::sqrt(xi.dot(sl * xi));
        if (!(defect <= 1e-10)) {
          std::ostringstream msg;
          msg << "second auxiliary space: mode " << j << " on coarse element " << i
              << " has projection defect " << defect;
          throw NumericalError(msg.str(), defect);
        }
      }
      append_local(parts[i], xi, l2g, j);
      parts[i].values.push_back(pairs.values[j]);
    }
    parts[i].count = counts[i];
  }
  ReducedSpace out = gather_columns(SpaceKind::aux2, grid.num_dofs(), parts);
  out.gram_weight = std::move(mass);
  out.layers = 0;
  return out;
}

ReducedSpace build_aux2_space(const GridHierarchy& grid, const CellField& kappa,
                              const ReducedSpace& aux, int modes) {
  const int m[1] = {modes};
  return build_aux2_space(grid, kappa, aux, std::span<const int>(m));
}

namespace {

/// Energy minimization problems on one oversampled patch. The local
/// stiffness is factorized once for both basis families.
void solve_patch(const GridHierarchy& grid, int element, int layers, const SparseMatrix& stiff,
                 const ReducedSpace& aux, const ReducedSpace* aux2, bool want_cem,
                 ElementColumns* cem_out, ElementColumns* v2_out) {
  const Patch patch(grid, element, layers);
  const auto& l2g = patch.local_to_global();
  const int n = patch.num_local_dofs();
  const auto g2l = index_map(grid.num_dofs(), l2g);

  // Columns owned by elements inside the patch.
  auto patch_columns = [&](const ReducedSpace& sp) {
    std::vector<int> cols;
    for (int k : patch.coarse_elements())
      for (int c = sp.offsets[k]; c < sp.offsets[k + 1]; ++c) cols.push_back(c);
    return cols;
  };
  auto local_rows = [&](const ReducedSpace& sp, const std::vector<int>& cols) {
    const SparseMatrix w = sparse_block(*sp.gram_weight, l2g, g2l);
    Matrix basis(n, static_cast<int>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
      basis.col(static_cast<Eigen::Index>(c)) = restrict_column(sp.basis, cols[c], g2l, n);
    return Matrix((w * basis).transpose());  // rows: (W nu)^T
  };

  SaddleSolver solver(sparse_block(stiff, l2g, g2l));
  const std::vector<int> cols1 = patch_columns(aux);
  const Matrix c1 = local_rows(aux, cols1);
  const Vector zero = Vector::Zero(n);

  auto check = [&](const SaddleSolution& sol, const char* what, int mode) {
    if (!(sol.constraint_residual <= 1e-9) || !(sol.stationarity_residual <= 1e-9)) {
      std::ostringstream msg;
      msg << what << " basis, coarse element " << element << " mode " << mode
          << ": saddle residuals " << sol.constraint_residual << ", " << sol.stationarity_residual;
      throw NumericalError(msg.str(), std::max(sol.constraint_residual, sol.stationarity_residual));
    }
  };
  auto guarded = [&](const char* what, auto&& fn) {
    try {
      fn();
    } catch (const NumericalError& e) {
      std::ostringstream msg;
      msg << what << " basis, coarse element " << element << ": " << e.what();
      throw NumericalError(msg.str(), e.residual());
    }
  };

  if (want_cem && cem_out) {
    guarded("cem", [&] { solver.set_constraints({{"aux1", c1, {}}}); });
    const int nl = aux.count(element);
    for (int j = 0; j < nl; ++j) {
      // s(psi_j, nu) for every nu in the patch.
      const Vector psi = restrict_column(aux.basis, aux.offsets[element] + j, g2l, n);
      const Vector rhs = c1 * psi;
      const SaddleSolution sol = solver.solve(zero, {rhs});
      check(sol, "cem", j);
      append_local(*cem_out, sol.primal, l2g, j);
    }
    cem_out->count = nl;
  }
  if (aux2 && v2_out) {
    const int nj = aux2->count(element);
    if (nj > 0) {
      const std::vector<int> cols2 = patch_columns(*aux2);
      const Matrix c2 = local_rows(*aux2, cols2);
      guarded("v2", [&] { solver.set_constraints({{"aux1", c1, {}}, {"aux2", c2, {}}}); });
      const Vector rhs1 = Vector::Zero(c1.rows());
      for (int j = 0; j < nj; ++j) {
        const Vector xi = restrict_column(aux2->basis, aux2->offsets[element] + j, g2l, n);
        const Vector rhs2 = c2 * xi;
        const SaddleSolution sol = solver.solve(zero, {rhs1, rhs2});
        check(sol, "v2", j);
        append_local(*v2_out, sol.primal, l2g, j);
      }
    }
    v2_out->count = nj;
  }
}

}  // namespace

ReducedSpace build_cem_basis(const GridHierarchy& grid, const CellField& kappa,
                             const ReducedSpace& aux, int layers, int threads) {
  require_aux_kind(aux, SpaceKind::aux1, "cem basis");
  const SparseMatrix stiff = Assembler(grid).stiffness(kappa);
  const int ne = grid.num_coarse_elements();
  std::vector<ElementColumns> parts(ne);
  parallel_for(ne, threads, [&](int i) {
    solve_patch(grid, i, layers, stiff, aux, nullptr, true, &parts[i], nullptr);
  });
  ReducedSpace out = gather_columns(SpaceKind::cem, grid.num_dofs(), parts);
  out.layers = layers;
  return out;
}

ReducedSpace build_v2_basis(const GridHierarchy& grid, const CellField& kappa,
                            const ReducedSpace& aux, const ReducedSpace& aux2, int layers,
                            int threads) {
  require_aux_kind(aux, SpaceKind::aux1, "v2 basis");
  require_aux_kind(aux2, SpaceKind::aux2, "v2 basis");
  const SparseMatrix stiff = Assembler(grid).stiffness(kappa);
  const int ne = grid.num_coarse_elements();
  std::vector<ElementColumns> parts(ne);
  parallel_for(ne, threads, [&](int i) {
    solve_patch(grid, i, layers, stiff, aux, &aux2, false, nullptr, &parts[i]);
  });
  ReducedSpace out = gather_columns(SpaceKind::v2, grid.num_dofs(), parts);
  out.layers = layers;
  return out;
}

MultiscaleSpaces build_spaces(const GridHierarchy& grid, const CellField& kappa,
                              const SpaceOptions& options) {
  if (options.layers < 0) throw ConfigError("oversampling layers must be nonnegative");
  MultiscaleSpaces out;
  out.options = options;
  const std::vector<int> l1 = options.aux_modes_per_element.empty()
                                  ? std::vector<int>{options.aux_modes}
                                  : options.aux_modes_per_element;
  const std::vector<int> l2 = options.slow_modes_per_element.empty()
                                  ? std::vector<int>{options.slow_modes}
                                  : options.slow_modes_per_element;
  out.aux1 = build_aux_space(grid, kappa, l1, options.ktilde);
  out.aux2 = build_aux2_space(grid, kappa, out.aux1, l2);
  const SparseMatrix stiff = Assembler(grid).stiffness(kappa);
  const int ne = grid.num_coarse_elements();
  std::vector<ElementColumns> cem(ne), v2(ne);
  parallel_for(ne, options.threads, [&](int i) {
    solve_patch(grid, i, options.layers, stiff, out.aux1, &out.aux2, true, &cem[i], &v2[i]);
  });
  out.cem = gather_columns(SpaceKind::cem, grid.num_dofs(), cem);
  out.cem.layers = options.layers;
  out.v2 = gather_columns(SpaceKind::v2, grid.num_dofs(), v2);
  out.v2.layers = options.layers;
  return out;
}

namespace {

/// Scaled Gram matrix D^-1/2 Z^T M Z D^-1/2 with its eigen-decomposition.
struct ScaledGram {
  Vector scale;  // D^-1/2
  Eigen::SelfAdjointEigenSolver<Matrix> eig;
};

ScaledGram scaled_gram(const SparseMatrix& z, const SparseMatrix& mass) {
  const SparseMatrix mz = mass * z;
  Matrix g = Matrix(z.transpose() * mz);
  g = 0.5 * (g + g.transpose());
  ScaledGram out;
  const Vector d = g.diagonal();
  if (d.size() && !(d.minCoeff() > 0.0)) throw NumericalError("basis has a zero column");
  out.scale = d.cwiseSqrt().cwiseInverse();
  const Matrix gs = out.scale.asDiagonal() * g * out.scale.asDiagonal();
  out.eig.compute(gs);
  return out;
}

}  // namespace

double normalized_min_singular_value(const SparseMatrix& z, const SparseMatrix& mass) {
  if (z.cols() == 0) return 0.0;
  const ScaledGram g = scaled_gram(z, mass);
  return std::sqrt(std::max(0.0, g.eig.eigenvalues()[0]));
}

GammaResult compute_gamma(const SparseMatrix& z1, const SparseMatrix& z2, const SparseMatrix& mass) {
  GammaResult out;
  if (z1.cols() == 0 || z2.cols() == 0) return out;
  auto orthonormalizer = [&](const SparseMatrix& z) {
    const ScaledGram g = scaled_gram(z, mass);
    const Vector lam = g.eig.eigenvalues();
    if (!(lam[0] > 1e-14)) throw NumericalError("compute_gamma: basis columns are dependent", lam[0]);
    return Matrix(g.scale.asDiagonal() * g.eig.eigenvectors() *
                  lam.cwiseSqrt().cwiseInverse().asDiagonal());
  };
  const Matrix w1 = orthonormalizer(z1);
  const Matrix w2 = orthonormalizer(z2);
  const SparseMatrix mz2 = mass * z2;
  const Matrix cross = Matrix(z1.transpose() * mz2);
  const Matrix k = w1.transpose() * cross * w2;
  Eigen::JacobiSVD<Matrix> svd(k);
  out.gamma = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
  out.near_one = out.gamma >= 1.0 - 1e-8;
  return out;
}

double SpaceDiagnostics::max_constraint_residual() const {
  return std::max({pi_idempotency, pi_orthogonality, pi_reproduction, cem_constraint, cem_support,
                   v2_s_orthogonality, v2_l2_matching, v2_support, aux2_kernel});
}

namespace {

double max_outside_patch(const GridHierarchy& grid, const ReducedSpace& sp) {
  double worst = 0.0;
  for (int c = 0; c < sp.size(); ++c) {
    const Patch patch(grid, sp.origin[c].element, sp.layers);
    for (SparseMatrix::InnerIterator it(sp.basis, c); it; ++it)
      if (!patch.local_of_global(static_cast<int>(it.row())))
        worst = std::max(worst, std::abs(it.value()));
  }
  return worst;
}

}  // namespace

SpaceDiagnostics diagnose_spaces(const GridHierarchy& grid, const CellField& kappa,
                                 const MultiscaleSpaces& spaces) {
  SpaceDiagnostics d;
  Assembler asmb(grid);
  const SparseMatrix s = asmb.mass(ktilde_weight(grid, kappa, spaces.options.ktilde));
  const SparseMatrix m = asmb.mass();
  const SparseMatrix k = asmb.stiffness(kappa);
  const ReducedSpace& aux = spaces.aux1;
  const ReducedSpace& aux2 = spaces.aux2;
  const SparseMatrix& psi = aux.basis;
  const SparseMatrix& xi = aux2.basis;

  const SparseMatrix s_psi = s * psi;
  const Matrix gs = Matrix(psi.transpose() * s_psi);
  const Vector psi_s = gs.diagonal().cwiseSqrt();
  // Pi in its orthonormal form u -> Psi Psi^T S u; defects in orthonormality show up here.
  auto pi = [&](const Vector& u) -> Vector { return psi * (s_psi.transpose() * u); };
  auto snorm = [&](const Vector& u) { return std::sqrt(u.dot(s * u)); };

  const int n = grid.num_dofs();
  std::mt19937_64 rng(20240917ULL);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 3 && aux.size() > 0; ++trial) {
    Vector u(n);
    for (int i = 0; i < n; ++i) u[i] = nd(rng);
    const Vector pu = pi(u);
    const Vector ppu = pi(pu);
    const double pun = snorm(pu);
    if (pun > 0) d.pi_idempotency = std::max(d.pi_idempotency, snorm(ppu - pu) / pun);
    const Vector orth = s_psi.transpose() * (u - pu);
    const double un = snorm(u);
    for (int j = 0; j < aux.size(); ++j)
      d.pi_orthogonality = std::max(d.pi_orthogonality, std::abs(orth[j]) / (un * psi_s[j]));
  }
  for (int j = 0; j < aux.size(); ++j) {
    const Vector col = psi.col(j);
    d.pi_reproduction = std::max(d.pi_reproduction, snorm(pi(col) - col) / psi_s[j]);
  }

  if (!spaces.cem.empty()) {
    const Matrix x = Matrix(spaces.cem.basis.transpose() * s_psi);
    for (int p = 0; p < spaces.cem.size(); ++p) {
      const int q = aux.offsets[spaces.cem.origin[p].element] + spaces.cem.origin[p].mode;
      for (int kk = 0; kk < aux.size(); ++kk)
        d.cem_constraint = std::max(d.cem_constraint,
                                    std::abs(x(p, kk) - gs(q, kk)) / (psi_s[q] * psi_s[kk]));
    }
    d.cem_support = max_outside_patch(grid, spaces.cem);
    d.cem_min_singular = normalized_min_singular_value(spaces.cem.basis, m);
  }
  if (!aux2.empty()) {
    const SparseMatrix m_xi = m * xi;
    const Matrix gm = Matrix(xi.transpose() * m_xi);
    const Vector xi_l2 = gm.diagonal().cwiseSqrt();
    const Matrix ker = Matrix(xi.transpose() * s_psi);
    for (int q = 0; q < aux2.size(); ++q) {
      const Vector col = xi.col(q);
      d.aux2_kernel = std::max(d.aux2_kernel, ker.row(q).norm() / snorm(col));
    }
    if (!spaces.v2.empty()) {
      const SparseMatrix& z2 = spaces.v2.basis;
      const Matrix y = Matrix(z2.transpose() * s_psi);
      const Matrix w = Matrix(z2.transpose() * m_xi);
      for (int p = 0; p < spaces.v2.size(); ++p) {
        const Vector col = z2.col(p);
        const double zs = snorm(col);
        for (int kk = 0; kk < aux.size(); ++kk)
          d.v2_s_orthogonality = std::max(d.v2_s_orthogonality, std::abs(y(p, kk)) / (zs * psi_s[kk]));
        const int q = aux2.offsets[spaces.v2.origin[p].element] + spaces.v2.origin[p].mode;
        for (int kk = 0; kk < aux2.size(); ++kk)
          d.v2_l2_matching = std::max(d.v2_l2_matching,
                                      std::abs(w(p, kk) - gm(q, kk)) / (xi_l2[q] * xi_l2[kk]));
      }
      d.v2_support = max_outside_patch(grid, spaces.v2);
      d.v2_min_singular = normalized_min_singular_value(z2, m);
      d.gamma = compute_gamma(spaces.cem.basis, z2, m);
    }
  }

  const int ne = grid.num_coarse_elements();
  d.lambda.assign(ne, {});
  d.gamma_local.assign(ne, {});
  for (int c = 0; c < aux.size(); ++c) {
    const Vector v = psi.col(c);
    d.lambda[aux.origin[c].element].push_back(v.dot(k * v) / v.dot(s * v));
  }
  for (int c = 0; c < aux2.size(); ++c) {
    const Vector v = xi.col(c);
    d.gamma_local[aux2.origin[c].element].push_back(v.dot(k * v) / v.dot(m * v));
  }
  return d;
}

}  // namespace splitcem
