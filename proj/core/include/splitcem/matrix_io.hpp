#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "splitcem/fields.hpp"
#include "splitcem/grid.hpp"
#include "splitcem/types.hpp"

namespace splitcem {

struct ReducedSpace;

/// Plain-text matrix: a "rows cols" line, then one line of space-separated
/// values per row. Lines starting with '#' and blank lines are skipped.
/// Errors name the offending line number.
Matrix parse_matrix(std::istream& in, const std::string& source = "<stream>");
Matrix read_matrix(const std::filesystem::path& path);

/// Values are written with 17 significant digits so reading back is exact.
void write_matrix(std::ostream& out, const Matrix& m, const std::vector<std::string>& comments = {});
void write_matrix(const std::filesystem::path& path, const Matrix& m,
                  const std::vector<std::string>& comments = {});

/// Cell data as an Nf x Nf matrix; row iy, column ix (row 0 is the bottom row).
Matrix to_matrix(const CellField& field);
CellField cell_field_from_matrix(const Matrix& m);

/// Nodal values including the zero boundary ring, (Nf+1) x (Nf+1), row iy.
Matrix nodal_matrix(const GridHierarchy& grid, const Vector& u);

/// Dense export of a basis: one column per basis function, provenance in the header.
void write_basis(const std::filesystem::path& path, const ReducedSpace& space);

}  // namespace splitcem
