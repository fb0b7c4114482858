#include "splitcem/matrix_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "splitcem/error.hpp"
#include "splitcem/spaces.hpp"

namespace splitcem {

namespace {

std::vector<double> parse_numbers(const std::string& line, const std::string& source, int line_no) {
  std::vector<double> out;
  const char* p = line.data();
  const char* end = p + line.size();
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r' || *p == ',')) ++p;
    if (p == end) break;
    if (*p == '+') ++p;
    double v = 0.0;
    const auto res = std::from_chars(p, end, v);
    if (res.ec != std::errc()) {
      std::ostringstream msg;
      msg << source << ": line " << line_no << ": not a number near '" << std::string(p, std::min<std::ptrdiff_t>(end - p, 16))
          << "'";
      throw ConfigError(msg.str());
    }
    out.push_back(v);
    p = res.ptr;
  }
  return out;
}

bool skippable(const std::string& line) {
  for (char c : line) {
    if (c == '#') return true;
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

}  // namespace

Matrix parse_matrix(std::istream& in, const std::string& source) {
  std::string line;
  int line_no = 0;
  long rows = -1, cols = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (skippable(line)) continue;
    const auto dims = parse_numbers(line, source, line_no);
    if (dims.size() != 2 || dims[0] < 0 || dims[1] < 0 || dims[0] != std::floor(dims[0]) ||
        dims[1] != std::floor(dims[1])) {
      std::ostringstream msg;
      msg << source << ": line " << line_no << ": expected header 'rows cols'";
      throw ConfigError(msg.str());
    }
    rows = static_cast<long>(dims[0]);
    cols = static_cast<long>(dims[1]);
    break;
  }
  if (rows < 0) throw ConfigError(source + ": empty matrix file");
  Matrix m(rows, cols);
  long r = 0;
  while (r < rows && std::getline(in, line)) {
    ++line_no;
    if (skippable(line)) continue;
    const auto vals = parse_numbers(line, source, line_no);
    if (static_cast<long>(vals.size()) != cols) {
      std::ostringstream msg;
      msg << source << ": line " << line_no << ": row " << r << " has " << vals.size() << " values, expected "
          << cols;
      throw ConfigError(msg.str());
    }
    for (long c = 0; c < cols; ++c) m(r, c) = vals[c];
    ++r;
  }
  if (r < rows) {
    std::ostringstream msg;
    msg << source << ": line " << line_no << ": expected " << rows << " rows, found " << r;
    throw ConfigError(msg.str());
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!skippable(line)) {
      std::ostringstream msg;
      msg << source << ": line " << line_no << ": unexpected data after " << rows << " rows";
      throw ConfigError(msg.str());
    }
  }
  return m;
}

Matrix read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open matrix file '" + path.string() + "'");
  return parse_matrix(in, path.string());
}

void write_matrix(std::ostream& out, const Matrix& m, const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << m.rows() << ' ' << m.cols() << '\n';
  char buf[32];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      if (c) out << ' ';
      out << buf;
    }
    out << '\n';
  }
}

void write_matrix(const std::filesystem::path& path, const Matrix& m,
                  const std::vector<std::string>& comments) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write matrix file '" + path.string() + "'");
  write_matrix(out, m, comments);
  if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

Matrix to_matrix(const CellField& field) {
  const int n = field.fine_cells();
  Matrix m(n, n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) m(iy, ix) = field.at(ix, iy);
  return m;
}

CellField cell_field_from_matrix(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    std::ostringstream msg;
    msg << "cell field must be a square nonempty matrix, got " << m.rows() << " x " << m.cols();
    throw ConfigError(msg.str());
  }
  const int n = static_cast<int>(m.rows());
  Vector v(n * n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) v[iy * n + ix] = m(iy, ix);
  return CellField(n, std::move(v));
}

Matrix nodal_matrix(const GridHierarchy& grid, const Vector& u) {
  const int n = grid.fine_cells() + 1;
  Matrix m = Matrix::Zero(n, n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      const int d = grid.dof_of_node(grid.node(ix, iy));
      if (d >= 0) m(iy, ix) = u[d];
    }
  return m;
}

void write_basis(const std::filesystem::path& path, const ReducedSpace& space) {
  std::vector<std::string> comments;
  comments.push_back("basis kind " + to_string(space.kind) + ", " + std::to_string(space.size()) +
                     " columns, rows are interior fine dofs");
  std::ostringstream prov;
  prov << "provenance (element:mode)";
  for (const auto& o : space.origin) prov << ' ' << o.element << ':' << o.mode;
  comments.push_back(prov.str());
  write_matrix(path, Matrix(space.basis), comments);
}

}  // namespace splitcem
