#include "splitcem/galerkin.hpp"

#include <algorithm>

namespace splitcem {

GalerkinProjector::GalerkinProjector(const Assembler& assembler, const SparseMatrix& basis)
    : grid_(&assembler.grid()), basis_(basis), n_(static_cast<int>(basis.cols())) {
  const GridHierarchy& g = *grid_;
  const Eigen::SparseMatrix<double, Eigen::RowMajor, int> rows(basis);
  const int r = g.ratio();
  const int nc = g.coarse_cells();
  blocks_.resize(g.num_coarse_elements());
  for (int k = 0; k < g.num_coarse_elements(); ++k) {
    Block& b = blocks_[k];
    const int cx = k % nc;
    const int cy = k / nc;
    const int x0 = cx * r;
    const int y0 = cy * r;
    auto closure_index = [&](int node) {
      const int ix = node % (g.fine_cells() + 1) - x0;
      const int iy = node / (g.fine_cells() + 1) - y0;
      return iy * (r + 1) + ix;
    };
    const int nodes = (r + 1) * (r + 1);
    std::vector<int> node_dof(nodes, -1);
    for (int iy = 0; iy <= r; ++iy)
      for (int ix = 0; ix <= r; ++ix)
        node_dof[iy * (r + 1) + ix] = g.dof_of_node(g.node(x0 + ix, y0 + iy));
    for (int d : node_dof) {
      if (d < 0) continue;
      for (decltype(rows)::InnerIterator it(rows, d); it; ++it) b.columns.push_back(static_cast<int>(it.col()));
    }
    std::sort(b.columns.begin(), b.columns.end());
    b.columns.erase(std::unique(b.columns.begin(), b.columns.end()), b.columns.end());
    b.zt = Matrix::Zero(static_cast<Eigen::Index>(b.columns.size()), nodes);
    for (int l = 0; l < nodes; ++l) {
      const int d = node_dof[l];
      if (d < 0) continue;
      for (decltype(rows)::InnerIterator it(rows, d); it; ++it) {
        const auto pos = std::lower_bound(b.columns.begin(), b.columns.end(), static_cast<int>(it.col())) -
                         b.columns.begin();
        b.zt(pos, l) = it.value();
      }
    }
    const auto cells = g.fine_elements_of(k);
    b.cells.assign(cells.begin(), cells.end());
    b.corners.reserve(b.cells.size());
    for (int e : b.cells) {
      const auto en = g.element_nodes(e);
      b.corners.push_back({closure_index(en[0]), closure_index(en[1]), closure_index(en[2]),
                           closure_index(en[3])});
    }
  }
}

template <class Kernel>
Matrix GalerkinProjector::assemble(Kernel&& kernel) const {
  Matrix out = Matrix::Zero(n_, n_);
  for (const Block& b : blocks_) {
    const Eigen::Index m = static_cast<Eigen::Index>(b.columns.size());
    if (m == 0) continue;
    Matrix wt = Matrix::Zero(m, b.zt.cols());  // (B Z_k)^T
    for (std::size_t c = 0; c < b.cells.size(); ++c) {
      const q1::ElementMatrix em = kernel(b.cells[c]);
      const auto& cn = b.corners[c];
      for (int a = 0; a < 4; ++a)
        for (int bb = 0; bb < 4; ++bb) {
          const double v = em[a * 4 + bb];
          if (v != 0.0) wt.col(cn[a]).noalias() += v * b.zt.col(cn[bb]);
        }
    }
    const Matrix local = b.zt * wt.transpose();
    for (Eigen::Index j = 0; j < m; ++j)
      for (Eigen::Index i = 0; i < m; ++i) out(b.columns[i], b.columns[j]) += local(i, j);
  }
  return out;
}

Matrix GalerkinProjector::mass(const Vector& point_weight) const {
  const double h = grid_->fine_size();
  return assemble([&](int e) {
    const q1::PointValues w{point_weight[4 * e], point_weight[4 * e + 1], point_weight[4 * e + 2],
                            point_weight[4 * e + 3]};
    return q1::weighted_mass(w, h);
  });
}

Matrix GalerkinProjector::stiffness(const Vector& point_coefficient) const {
  return assemble([&](int e) {
    const q1::PointValues c{point_coefficient[4 * e], point_coefficient[4 * e + 1],
                            point_coefficient[4 * e + 2], point_coefficient[4 * e + 3]};
    return q1::weighted_stiffness(c);
  });
}

Matrix galerkin(const SparseMatrix& z, const SparseMatrix& b) {
  const SparseMatrix bz = b * z;
  return Matrix(z.transpose() * bz);
}

}  // namespace splitcem
