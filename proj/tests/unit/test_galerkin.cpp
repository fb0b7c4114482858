#include <gtest/gtest.h>

#include <random>

#include "splitcem/assembly.hpp"
#include "splitcem/galerkin.hpp"
#include "splitcem/spaces.hpp"

using namespace splitcem;

TEST(GalerkinProjector, MatchesSparseTripleProduct) {
  const int nf = 16;
  const auto g = build_grids(4, nf);
  CellField kappa(nf, 1.0);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> d(0.5, 50.0);
  for (int e = 0; e < kappa.size(); ++e) kappa[e] = d(rng);
  const MultiscaleSpaces sp = build_spaces(g, kappa, {});
  const SparseMatrix z = concatenate(sp.cem.basis, sp.v2.basis);
  const Assembler a(g);
  const GalerkinProjector proj(a, z);
  ASSERT_EQ(proj.size(), z.cols());

  Vector points(4 * g.num_fine_elements());
  for (int q = 0; q < points.size(); ++q) points(q) = kappa[q / 4];
  const Matrix mass_ref = galerkin(z, assemble_mass(g, kappa));
  const Matrix stiff_ref = galerkin(z, assemble_stiffness(g, kappa));
  EXPECT_LT((proj.mass(points) - mass_ref).cwiseAbs().maxCoeff(), 1e-12 * mass_ref.cwiseAbs().maxCoeff());
  EXPECT_LT((proj.stiffness(points) - stiff_ref).cwiseAbs().maxCoeff(), 1e-12 * stiff_ref.cwiseAbs().maxCoeff());

  const Vector c = Vector::LinSpaced(z.cols(), -1.0, 1.0);
  EXPECT_EQ(proj.prolong(c), Vector(z * c));
  EXPECT_EQ(proj.restrict(proj.prolong(c)), Vector(z.transpose() * (z * c)));
}

TEST(GalerkinProjector, IdentityBasisReproducesFineMatrices) {
  const auto g = build_grids(2, 8);
  SparseMatrix id(g.num_dofs(), g.num_dofs());
  id.setIdentity();
  const Assembler a(g);
  const GalerkinProjector proj(a, id);
  const Vector ones = Vector::Ones(4 * g.num_fine_elements());
  EXPECT_LT((proj.mass(ones) - Matrix(assemble_mass(g))).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((proj.stiffness(ones) - Matrix(assemble_stiffness(g, CellField(8, 1.0)))).cwiseAbs().maxCoeff(),
            1e-13);
}
