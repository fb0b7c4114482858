#include "splitcem/grid.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "splitcem/error.hpp"

namespace splitcem {

GridHierarchy::GridHierarchy(int coarse_cells, int fine_cells) : nc_(coarse_cells), nf_(fine_cells) {
  if (nc_ <= 0 || nf_ <= 0 || nf_ % nc_ != 0 || nf_ / nc_ < 2) {
    throw ConfigError("invalid grid pair: fine cells Nf=" + std::to_string(fine_cells) +
                      " must be a multiple of coarse cells Nc=" + std::to_string(coarse_cells) +
                      " with Nf/Nc >= 2");
  }
  node_to_dof_.assign(num_nodes(), -1);
  dof_to_node_.reserve(num_dofs());
  for (int iy = 1; iy < nf_; ++iy) {
    for (int ix = 1; ix < nf_; ++ix) {
      node_to_dof_[node(ix, iy)] = static_cast<int>(dof_to_node_.size());
      dof_to_node_.push_back(node(ix, iy));
    }
  }

  const int r = ratio();
  fine_to_coarse_.resize(num_fine_elements());
  coarse_to_fine_.resize(num_fine_elements());
  std::vector<int> fill(num_coarse_elements(), 0);
  for (int ey = 0; ey < nf_; ++ey) {
    for (int ex = 0; ex < nf_; ++ex) {
      const int e = ey * nf_ + ex;
      const int c = (ey / r) * nc_ + ex / r;
      fine_to_coarse_[e] = c;
      coarse_to_fine_[c * r * r + fill[c]++] = e;
    }
  }
}

std::array<int, 4> GridHierarchy::element_nodes(int e) const noexcept {
  const int ex = e % nf_;
  const int ey = e / nf_;
  return {node(ex, ey), node(ex + 1, ey), node(ex + 1, ey + 1), node(ex, ey + 1)};
}

std::array<int, 4> GridHierarchy::element_dofs(int e) const noexcept {
  const auto nodes = element_nodes(e);
  return {node_to_dof_[nodes[0]], node_to_dof_[nodes[1]], node_to_dof_[nodes[2]],
          node_to_dof_[nodes[3]]};
}

std::array<double, 2> GridHierarchy::element_center(int e) const noexcept {
  const double h = fine_size();
  return {(e % nf_ + 0.5) * h, (e / nf_ + 0.5) * h};
}

std::span<const int> GridHierarchy::fine_elements_of(int coarse) const noexcept {
  const int r2 = ratio() * ratio();
  return std::span<const int>(coarse_to_fine_).subspan(static_cast<std::size_t>(coarse) * r2, r2);
}

std::vector<int> GridHierarchy::nodes_of_coarse(int coarse) const {
  const int r = ratio();
  const int x0 = (coarse % nc_) * r;
  const int y0 = (coarse / nc_) * r;
  std::vector<int> out;
  out.reserve((r + 1) * (r + 1));
  for (int iy = y0; iy <= y0 + r; ++iy)
    for (int ix = x0; ix <= x0 + r; ++ix) out.push_back(node(ix, iy));
  return out;
}

GridHierarchy build_grids(int coarse_cells, int fine_cells) {
  return GridHierarchy(coarse_cells, fine_cells);
}

Patch::Patch(const GridHierarchy& grid, int center, int layers)
    : nf_(grid.fine_cells()), center_(center), layers_(layers) {
  if (center < 0 || center >= grid.num_coarse_elements()) {
    throw std::out_of_range("coarse element index " + std::to_string(center) +
                            " out of range [0, " + std::to_string(grid.num_coarse_elements()) +
                            ")");
  }
  if (layers < 0) throw ConfigError("oversampling layers must be nonnegative");

  const int nc = grid.coarse_cells();
  const int cx = center % nc;
  const int cy = center / nc;
  cx0_ = std::max(0, cx - layers);
  cx1_ = std::min(nc - 1, cx + layers);
  cy0_ = std::max(0, cy - layers);
  cy1_ = std::min(nc - 1, cy + layers);
  for (int y = cy0_; y <= cy1_; ++y)
    for (int x = cx0_; x <= cx1_; ++x) coarse_.push_back(y * nc + x);

  const int r = grid.ratio();
  nx0_ = cx0_ * r;
  nx1_ = (cx1_ + 1) * r;
  ny0_ = cy0_ * r;
  ny1_ = (cy1_ + 1) * r;
  local_to_global_.reserve(static_cast<std::size_t>(nx1_ - nx0_ - 1) * (ny1_ - ny0_ - 1));
  for (int iy = ny0_ + 1; iy < ny1_; ++iy)
    for (int ix = nx0_ + 1; ix < nx1_; ++ix)
      local_to_global_.push_back(grid.dof_of_node(grid.node(ix, iy)));
}

std::vector<int> Patch::fine_elements() const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(nx1_ - nx0_) * (ny1_ - ny0_));
  for (int ey = ny0_; ey < ny1_; ++ey)
    for (int ex = nx0_; ex < nx1_; ++ex) out.push_back(ey * nf_ + ex);
  return out;
}

bool Patch::contains_coarse(int coarse) const noexcept {
  return std::binary_search(coarse_.begin(), coarse_.end(), coarse);
}

std::optional<int> Patch::local_of_global(int global_dof) const noexcept {
  if (global_dof < 0 || global_dof >= (nf_ - 1) * (nf_ - 1)) return std::nullopt;
  const int ix = global_dof % (nf_ - 1) + 1;
  const int iy = global_dof / (nf_ - 1) + 1;
  if (ix <= nx0_ || ix >= nx1_ || iy <= ny0_ || iy >= ny1_) return std::nullopt;
  return (iy - ny0_ - 1) * (nx1_ - nx0_ - 1) + (ix - nx0_ - 1);
}

Patch oversample(const GridHierarchy& grid, int coarse_index, int layers) {
  return Patch(grid, coarse_index, layers);
}

}  // namespace splitcem
