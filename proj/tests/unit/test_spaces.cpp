#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "../support/oracles.hpp"
#include "splitcem/assembly.hpp"
#include "splitcem/error.hpp"
#include "splitcem/spaces.hpp"

using namespace splitcem;

namespace {

std::vector<double> to_std(const CellField& f) { return {f.values().data(), f.values().data() + f.size()}; }

Vector random_vector(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

// Column k of z restricted to idx, as a dense vector.
Vector restrict(const SparseMatrix& z, int k, const std::vector<int>& idx) {
  const Vector col = Vector(z.col(k));
  Vector out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out(i) = col(idx[i]);
  return out;
}

CellField vertical_channel(int nf, double contrast) {
  CellField k(nf, 1.0);
  for (int ey = 0; ey < 4; ++ey)
    for (int ex : {1, 2}) k[ey * nf + ex] = contrast;
  return k;
}

}  // namespace

TEST(AuxSpace, UniformKappaGroundModeMatchesOracle) {
  const int nc = 2, nf = 8;
  const auto g = build_grids(nc, nf);
  const CellField kappa(nf, 1.0);
  const ReducedSpace aux = build_aux_space(g, kappa, 3, KtildeVariant::scaled_kappa);
  ASSERT_EQ(aux.size(), 12);
  const oracle::Mat a = oracle::stiffness(nf, to_std(kappa));
  const oracle::Mat s = oracle::mass(nf, std::vector<double>(nf * nf, nc * nc));
  for (int i = 0; i < 4; ++i) {
    const int cx = i % nc, cy = i / nc;
    const auto idx = oracle::box_dofs(nc, nf, cx, cx, cy, cy);
    const oracle::Eig ref = oracle::generalized_eig(oracle::submatrix(a, idx), oracle::submatrix(s, idx));
    EXPECT_GT(aux.eigenvalues(aux.offsets[i]), 0.0);
    EXPECT_NEAR(aux.eigenvalues(aux.offsets[i]), ref.values(0), 1e-10 * ref.values(0));
    // The ground mode is simple, so the eigenvector agrees up to sign.
    const Vector v = restrict(aux.basis, aux.offsets[i], idx);
    const double cosine = std::abs(v.dot(oracle::submatrix(s, idx) * ref.vectors.col(0)));
    EXPECT_NEAR(cosine, 1.0, 1e-10);
    // Sign rule: the largest-magnitude entry is positive.
    Eigen::Index k;
    v.cwiseAbs().maxCoeff(&k);
    EXPECT_GT(v(k), 0.0);
  }
}

TEST(AuxSpace, ChannelLowersGroundEigenvalue) {
  const int nc = 2, nf = 8;
  const auto g = build_grids(nc, nf);
  double lam[2];
  int k = 0;
  for (double contrast : {1.0, 1e4}) {
    const CellField kappa = vertical_channel(nf, contrast);
    const ReducedSpace aux = build_aux_space(g, kappa, 1, KtildeVariant::scaled_kappa);
    const oracle::Mat a = oracle::stiffness(nf, to_std(kappa));
    std::vector<double> w = to_std(kappa);
    for (double& x : w) x *= nc * nc;
    const auto idx = oracle::box_dofs(nc, nf, 0, 0, 0, 0);
    const oracle::Eig ref = oracle::generalized_eig(oracle::submatrix(a, idx), oracle::submatrix(oracle::mass(nf, w), idx));
    lam[k] = aux.eigenvalues(0);
    EXPECT_NEAR(lam[k], ref.values(0), 1e-9 * ref.values(0));
    ++k;
  }
  // Oracle values on the 4 x 4-cell element: 20.7733 without and 10.3882 with
  // the channel. The s-weight scales with kappa, so the drop is a factor of
  // two rather than of the contrast.
  EXPECT_NEAR(lam[0], 20.77328401, 1e-7);
  EXPECT_NEAR(lam[1], 10.38824191, 1e-6);
  EXPECT_LT(lam[1], 0.51 * lam[0]);
}

TEST(AuxSpace, IdenticalPatternsGiveIdenticalEigenvalues) {
  const int nc = 3, nf = 12;
  const auto g = build_grids(nc, nf);
  CellField kappa(nf, 1.0);
  for (int e = 0; e < kappa.size(); ++e) {
    const int ex = e % nf, ey = e / nf;
    if ((ex % 4 == 1 || ex % 4 == 2) && ey % 4 != 0) kappa[e] = 500.0;  // same pattern in every element
  }
  const ReducedSpace aux = build_aux_space(g, kappa, 3, KtildeVariant::scaled_kappa);
  for (int i = 1; i < 9; ++i)
    for (int j = 0; j < 3; ++j)
      EXPECT_NEAR(aux.eigenvalues(aux.offsets[i] + j), aux.eigenvalues(j), 1e-10 * aux.eigenvalues(j));
}

TEST(AuxSpace, TooManyModesNamesTheElement) {
  const auto g = build_grids(2, 4);  // one interior dof per element
  std::vector<int> modes = {1, 1, 2, 1};
  try {
    build_aux_space(g, CellField(4, 1.0), modes, KtildeVariant::scaled_kappa);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("element 2"), std::string::npos) << e.what();
  }
}

TEST(AuxSpace, PartitionOfUnityWeightIsPositive) {
  const auto g = build_grids(2, 8);
  const CellField w = ktilde_weight(g, CellField(8, 1.0), KtildeVariant::partition_of_unity);
  EXPECT_GT(w.min(), 0.0);
  EXPECT_EQ(parse_ktilde_variant(to_string(KtildeVariant::partition_of_unity)), KtildeVariant::partition_of_unity);
  EXPECT_THROW(parse_ktilde_variant("nope"), ConfigError);
}

TEST(ProjectPi, IdentityIdempotencyOrthogonality) {
  const auto g = build_grids(2, 8);
  const CellField kappa = vertical_channel(8, 100.0);
  const ReducedSpace aux = build_aux_space(g, kappa, 3, KtildeVariant::scaled_kappa);
  const SparseMatrix& s = *aux.gram_weight;
  const Vector c = random_vector(aux.size(), 1);
  const Vector in_space = aux.basis * c;
  EXPECT_LT((project_Pi(aux, in_space) - in_space).norm(), 1e-10 * in_space.norm());
  const Vector u = random_vector(g.num_dofs(), 2);
  const Vector pu = project_Pi(aux, u);
  EXPECT_LT((project_Pi(aux, pu) - pu).norm(), 1e-12 * pu.norm());
  const Vector r = s * (u - pu);
  for (int j = 0; j < aux.size(); ++j) EXPECT_LT(std::abs(r.dot(Vector(aux.basis.col(j)))), 1e-12);
  // Field overload agrees.
  EXPECT_LT((project_Pi(aux, Field(g, u)).values() - pu).norm(), 1e-15);
}

TEST(CemBasis, ConstraintsOnSmallGrid) {
  const auto g = build_grids(2, 8);
  const CellField kappa(8, 1.0);
  SpaceOptions opt;
  opt.aux_modes = 1;
  opt.layers = 1;
  const MultiscaleSpaces sp = build_spaces(g, kappa, opt);
  const SpaceDiagnostics d = diagnose_spaces(g, kappa, sp);
  EXPECT_LE(d.cem_constraint, 1e-8);
  // With s-orthonormal auxiliaries the constraint reads s(phi_j, psi_l) = delta_jl.
  const SparseMatrix& s = *sp.aux1.gram_weight;
  const Matrix cross = Matrix(sp.cem.basis.transpose() * s * sp.aux1.basis);
  EXPECT_LT((cross - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(CemBasis, SupportInsidePatch) {
  const auto g = build_grids(4, 16);
  const CellField kappa(16, 1.0);
  const ReducedSpace aux = build_aux_space(g, kappa, 2, KtildeVariant::scaled_kappa);
  const ReducedSpace cem = build_cem_basis(g, kappa, aux, 1);
  for (int k = 0; k < cem.size(); ++k) {
    const Patch p = oversample(g, cem.origin[k].element, 1);
    for (SparseMatrix::InnerIterator it(cem.basis, k); it; ++it)
      EXPECT_TRUE(p.local_of_global(static_cast<int>(it.row())).has_value());
  }
}

TEST(CemBasis, SaturatesOnceThePatchIsTheDomain) {
  const auto g = build_grids(4, 16);
  CellField kappa(16, 1.0);
  for (int e = 0; e < kappa.size(); ++e)
    if (e % 16 == 5 || e % 16 == 6) kappa[e] = 1e3;
  const ReducedSpace aux = build_aux_space(g, kappa, 2, KtildeVariant::scaled_kappa);
  const ReducedSpace c3 = build_cem_basis(g, kappa, aux, 3);
  const ReducedSpace c4 = build_cem_basis(g, kappa, aux, 4);
  EXPECT_LT(Matrix(c3.basis - c4.basis).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(CemBasis, ThreadCountDoesNotChangeTheBasis) {
  const auto g = build_grids(4, 16);
  const CellField kappa(16, 1.0);
  const ReducedSpace aux = build_aux_space(g, kappa, 2, KtildeVariant::scaled_kappa);
  const ReducedSpace a = build_cem_basis(g, kappa, aux, 1, 1);
  const ReducedSpace b = build_cem_basis(g, kappa, aux, 1, 3);
  EXPECT_EQ(Matrix(a.basis - b.basis).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Aux2Space, NoAuxiliariesIsTheUnconstrainedProblem) {
  const int nc = 2, nf = 8;
  const auto g = build_grids(nc, nf);
  const CellField kappa(nf, 1.0);
  const std::vector<int> zero(4, 0);
  const ReducedSpace aux = build_aux_space(g, kappa, zero, KtildeVariant::scaled_kappa);
  EXPECT_EQ(aux.size(), 0);
  const ReducedSpace aux2 = build_aux2_space(g, kappa, aux, 2);
  const auto idx = oracle::box_dofs(nc, nf, 0, 0, 0, 0);
  const oracle::Eig ref = oracle::generalized_eig(oracle::submatrix(oracle::stiffness(nf, to_std(kappa)), idx),
                                                  oracle::submatrix(oracle::mass(nf), idx));
  EXPECT_NEAR(aux2.eigenvalues(0), ref.values(0), 1e-9 * ref.values(0));
  EXPECT_NEAR(aux2.eigenvalues(1), ref.values(1), 1e-9 * ref.values(1));
}

TEST(Aux2Space, ProjectedEigenvalueMatchesOracle) {
  const int nc = 2, nf = 8;
  const auto g = build_grids(nc, nf);
  const CellField kappa(nf, 1.0);
  const ReducedSpace aux = build_aux_space(g, kappa, 1, KtildeVariant::scaled_kappa);
  const ReducedSpace aux2 = build_aux2_space(g, kappa, aux, 1);
  const oracle::Mat a = oracle::stiffness(nf, to_std(kappa));
  const oracle::Mat m = oracle::mass(nf);
  const oracle::Mat s = oracle::mass(nf, std::vector<double>(nf * nf, nc * nc));
  for (int i = 0; i < 4; ++i) {
    const int cx = i % nc, cy = i / nc;
    const auto idx = oracle::box_dofs(nc, nf, cx, cx, cy, cy);
    const oracle::Mat sl = oracle::submatrix(s, idx);
    const Vector psi = restrict(aux.basis, aux.offsets[i], idx);
    // Constrained space {v : psi^T S v = 0} from an LU kernel.
    const oracle::Mat c = (sl * psi).transpose();
    const oracle::Mat n = Eigen::FullPivLU<oracle::Mat>(c).kernel();
    const oracle::Mat al = oracle::submatrix(a, idx), ml = oracle::submatrix(m, idx);
    const oracle::Eig ref = oracle::generalized_eig(n.transpose() * al * n, n.transpose() * ml * n);
    EXPECT_NEAR(aux2.eigenvalues(i), ref.values(0), 1e-8 * ref.values(0));
  }
  const SpaceDiagnostics d = [&] {
    SpaceOptions opt;
    opt.aux_modes = 1;
    opt.slow_modes = 1;
    opt.layers = 1;
    return diagnose_spaces(g, kappa, build_spaces(g, kappa, opt));
  }();
  EXPECT_LE(d.aux2_kernel, 1e-10);
}

TEST(Aux2Space, L2OrthonormalPerElement) {
  const auto g = build_grids(2, 8);
  const CellField kappa = vertical_channel(8, 1e3);
  const ReducedSpace aux = build_aux_space(g, kappa, 2, KtildeVariant::scaled_kappa);
  const ReducedSpace aux2 = build_aux2_space(g, kappa, aux, 2);
  const Matrix gram = Matrix(aux2.basis.transpose() * assemble_mass(g) * aux2.basis);
  EXPECT_LT((gram - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_THROW(build_aux2_space(g, kappa, aux, 8), ConfigError);  // 9 dofs minus 2 constraints
}

TEST(V2Basis, ConstraintsHold) {
  const auto g = build_grids(2, 8);
  const CellField kappa = vertical_channel(8, 1e2);
  SpaceOptions opt;
  opt.aux_modes = 2;
  opt.slow_modes = 1;
  opt.layers = 1;
  const MultiscaleSpaces sp = build_spaces(g, kappa, opt);
  const SparseMatrix& s = *sp.aux1.gram_weight;
  const SparseMatrix m = assemble_mass(g);
  // s(zeta, psi) = 0 for every auxiliary.
  EXPECT_LT(Matrix(sp.v2.basis.transpose() * s * sp.aux1.basis).cwiseAbs().maxCoeff(), 1e-10);
  // (zeta_j, xi_j) = (xi_j, xi_j) = 1 and (zeta_j, xi_l) = 0 otherwise.
  const Matrix match = Matrix(sp.v2.basis.transpose() * m * sp.aux2.basis);
  EXPECT_LT((match - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
  const SpaceDiagnostics d = diagnose_spaces(g, kappa, sp);
  EXPECT_LE(d.v2_s_orthogonality, 1e-8);
  EXPECT_LE(d.v2_l2_matching, 1e-8);
  EXPECT_LE(d.max_constraint_residual(), 1e-8);
}

TEST(Gamma, OrthogonalSelfAndKnownAngle) {
  // A 4D toy space with the identity as inner product.
  SparseMatrix m(4, 4);
  m.setIdentity();
  Matrix z1 = Matrix::Zero(4, 2);
  z1(0, 0) = 1.0;
  z1(1, 1) = 1.0;
  Matrix z2 = Matrix::Zero(4, 2);
  z2(2, 0) = 1.0;
  z2(3, 1) = 1.0;
  EXPECT_LE(compute_gamma(z1.sparseView(), z2.sparseView(), m).gamma, 1e-8);
  const GammaResult self = compute_gamma(z1.sparseView(), z1.sparseView(), m);
  EXPECT_NEAR(self.gamma, 1.0, 1e-12);
  EXPECT_TRUE(self.near_one);
  // Every principal angle between span(e1, e2) and span(e1 + e3, e2 + e4) is 45 degrees.
  Matrix z3 = Matrix::Zero(4, 2);
  z3(0, 0) = z3(2, 0) = 1.0;
  z3(1, 1) = z3(3, 1) = 1.0;
  EXPECT_NEAR(compute_gamma(z1.sparseView(), z3.sparseView(), m).gamma, std::sqrt(0.5), 1e-14);
  EXPECT_EQ(compute_gamma(z1.sparseView(), SparseMatrix(4, 0), m).gamma, 0.0);
}

TEST(Gamma, MatchesOracleOnBuiltSpaces) {
  const auto g = build_grids(2, 8);
  const CellField kappa = vertical_channel(8, 1e2);
  SpaceOptions opt;
  opt.layers = 1;
  const MultiscaleSpaces sp = build_spaces(g, kappa, opt);
  const SparseMatrix m = assemble_mass(g);
  const double ref = oracle::principal_cosine(Matrix(sp.cem.basis), Matrix(sp.v2.basis), Matrix(m));
  const GammaResult gam = compute_gamma(sp.cem.basis, sp.v2.basis, m);
  EXPECT_NEAR(gam.gamma, ref, 1e-10);
  EXPECT_LT(gam.gamma, 1.0);
}

TEST(Spaces, ReproducibleBitForBit) {
  const auto g = build_grids(2, 8);
  const CellField kappa = vertical_channel(8, 1e3);
  const MultiscaleSpaces a = build_spaces(g, kappa, {});
  const MultiscaleSpaces b = build_spaces(g, kappa, {});
  EXPECT_EQ(Matrix(a.cem.basis - b.cem.basis).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(Matrix(a.v2.basis - b.v2.basis).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Spaces, ColumnsIndependent) {
  const auto g = build_grids(2, 8);
  const CellField kappa = vertical_channel(8, 1e3);
  const MultiscaleSpaces sp = build_spaces(g, kappa, {});
  const SparseMatrix m = assemble_mass(g);
  EXPECT_GT(normalized_min_singular_value(sp.cem.basis, m), 1e-8);
  EXPECT_GT(normalized_min_singular_value(sp.v2.basis, m), 1e-8);
  EXPECT_GT(normalized_min_singular_value(concatenate(sp.cem.basis, sp.v2.basis), m), 1e-8);
}

TEST(CemBasis, EnergyErrorDecreasesWithLayers) {
  const auto g = build_grids(4, 16);
  CellField kappa(16, 1.0);
  for (int e = 0; e < kappa.size(); ++e)
    if (e % 16 == 6 || e % 16 == 9) kappa[e] = 1e3;
  const ReducedSpace aux = build_aux_space(g, kappa, 2, KtildeVariant::scaled_kappa);
  const SparseMatrix a = assemble_stiffness(g, kappa);
  const ReducedSpace global = build_cem_basis(g, kappa, aux, 4);  // patch = domain for every element
  double previous = std::numeric_limits<double>::infinity();
  for (int layers = 0; layers <= 2; ++layers) {
    const SparseMatrix d = build_cem_basis(g, kappa, aux, layers).basis - global.basis;
    const double energy = Matrix(d.transpose() * a * d).diagonal().sum();
    EXPECT_LT(energy, previous) << "layers " << layers;
    previous = energy;
  }
}
