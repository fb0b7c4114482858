#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "splitcem/fields.hpp"
#include "splitcem/grid.hpp"
#include "splitcem/types.hpp"

namespace splitcem {

enum class SpaceKind { aux1, cem, aux2, v2, custom };
std::string to_string(SpaceKind kind);

struct BasisOrigin {
  int element = -1;  // coarse element
  int mode = -1;     // index within the element, ascending eigenvalue order
};

/// Columns of `basis` are FE coefficient vectors on the interior fine dofs.
/// Columns are grouped by coarse element (offsets) and ordered by mode.
struct ReducedSpace {
  SpaceKind kind = SpaceKind::custom;
  SparseMatrix basis;
  std::vector<BasisOrigin> origin;
  std::vector<int> offsets;  // num_coarse_elements + 1 entries
  Vector eigenvalues;        // local eigenvalue per column (aux kinds), empty otherwise
  int layers = -1;           // oversampling of the local problems (cem, v2)
  /// Inner product the columns are orthonormal in: s for aux1, L2 mass for aux2.
  std::shared_ptr<const SparseMatrix> gram_weight;

  int size() const noexcept { return static_cast<int>(basis.cols()); }
  int dofs() const noexcept { return static_cast<int>(basis.rows()); }
  bool empty() const noexcept { return basis.cols() == 0; }
  int count(int element) const { return offsets[element + 1] - offsets[element]; }
};

/// Wraps an arbitrary basis matrix (no provenance), e.g. the identity.
ReducedSpace custom_space(SparseMatrix basis);

/// Horizontal concatenation [Z1 Z2].
SparseMatrix concatenate(const SparseMatrix& z1, const SparseMatrix& z2);

enum class KtildeVariant {
  scaled_kappa,        // kappa H^-2
  partition_of_unity,  // kappa sum_i |grad chi_i|^2, chi_i coarse Q1 hats, at cell centers
};
KtildeVariant parse_ktilde_variant(const std::string& name);
std::string to_string(KtildeVariant v);

CellField ktilde_weight(const GridHierarchy& grid, const CellField& kappa, KtildeVariant variant);

/// Local spectral problems on V(K_i): the modes[i] smallest pairs of
/// (int kappa grad . grad, s_i), s_i-orthonormal. `modes` has one entry per
/// coarse element or a single entry used for all of them.
ReducedSpace build_aux_space(const GridHierarchy& grid, const CellField& kappa,
                             std::span<const int> modes, KtildeVariant variant);
ReducedSpace build_aux_space(const GridHierarchy& grid, const CellField& kappa, int modes,
                             KtildeVariant variant);

/// s-orthogonal projection onto span(aux).
Vector project_Pi(const ReducedSpace& aux, const Vector& u);
Field project_Pi(const ReducedSpace& aux, const Field& u);

/// One energy-minimizing function per auxiliary mode, supported on K_i^+.
ReducedSpace build_cem_basis(const GridHierarchy& grid, const CellField& kappa,
                             const ReducedSpace& aux, int layers, int threads = 1);

/// Local spectral problems (int kappa grad . grad, L2) on V(K_i) intersected
/// with ker(Pi), solved in an orthonormal basis of that kernel.
ReducedSpace build_aux2_space(const GridHierarchy& grid, const CellField& kappa,
                              const ReducedSpace& aux, std::span<const int> modes);
ReducedSpace build_aux2_space(const GridHierarchy& grid, const CellField& kappa,
                              const ReducedSpace& aux, int modes);

/// Energy minimizers on K_i^+ s-orthogonal to aux and L2-matching aux2.
ReducedSpace build_v2_basis(const GridHierarchy& grid, const CellField& kappa,
                            const ReducedSpace& aux, const ReducedSpace& aux2, int layers,
                            int threads = 1);

struct GammaResult {
  double gamma = 0.0;
  bool near_one = false;  // gamma >= 1 - 1e-8
};
/// Largest cosine of the L2 angle between span(z1) and span(z2). Zero when
/// either span is empty. Throws NumericalError for dependent columns.
GammaResult compute_gamma(const SparseMatrix& z1, const SparseMatrix& z2, const SparseMatrix& mass);

/// Smallest singular value of the basis after scaling every column to unit M-norm.
double normalized_min_singular_value(const SparseMatrix& z, const SparseMatrix& mass);

struct SpaceOptions {
  int aux_modes = 3;
  int slow_modes = 1;
  std::vector<int> aux_modes_per_element;   // overrides aux_modes when nonempty
  std::vector<int> slow_modes_per_element;  // overrides slow_modes when nonempty
  int layers = 2;
  KtildeVariant ktilde = KtildeVariant::scaled_kappa;
  int threads = 1;
};

struct MultiscaleSpaces {
  SpaceOptions options;
  ReducedSpace aux1;
  ReducedSpace cem;  // V_H,1
  ReducedSpace aux2;
  ReducedSpace v2;   // V_H,2
};

/// Builds all four spaces, sharing one patch factorization between the
/// cem and v2 saddle problems.
MultiscaleSpaces build_spaces(const GridHierarchy& grid, const CellField& kappa,
                              const SpaceOptions& options);

struct SpaceDiagnostics {
  double pi_idempotency = 0.0;    // ||Pi(Pi u) - Pi u||_s / ||Pi u||_s, random u
  double pi_orthogonality = 0.0;  // max |s(u - Pi u, psi)| / (||u||_s ||psi||_s)
  double pi_reproduction = 0.0;   // max ||Pi psi - psi||_s over aux columns
  double cem_constraint = 0.0;    // max |s(phi, nu) - s(psi, nu)| / (||psi||_s ||nu||_s)
  double cem_support = 0.0;       // max |phi| outside its patch
  double v2_s_orthogonality = 0.0;  // max |s(zeta, nu)| / (||zeta||_s ||nu||_s)
  double v2_l2_matching = 0.0;      // max |(zeta, nu) - (xi, nu)| / (||xi|| ||nu||)
  double v2_support = 0.0;
  double aux2_kernel = 0.0;  // max ||Pi xi||_s / ||xi||_s
  GammaResult gamma;
  double cem_min_singular = 0.0;
  double v2_min_singular = 0.0;
  std::vector<std::vector<double>> lambda;       // per element, aux eigenvalues
  std::vector<std::vector<double>> gamma_local;  // per element, aux2 eigenvalues

  double max_constraint_residual() const;
};

/// Re-assembles s and the L2 mass from kappa and re-evaluates every
/// constraint of the construction.
SpaceDiagnostics diagnose_spaces(const GridHierarchy& grid, const CellField& kappa,
                                 const MultiscaleSpaces& spaces);

}  // namespace splitcem
