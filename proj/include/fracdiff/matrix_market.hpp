#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fracdiff/error.hpp"
#include "fracdiff/sparse.hpp"

// Matrix Market coordinate reader/writer. Supported banners:
//   %%MatrixMarket matrix coordinate {real|pattern|integer} {general|symmetric}

namespace fracdiff {

namespace detail {

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline bool blank_or_comment(const std::string& line) {
  for (char c : line) {
    if (c == '%') return true;
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

}  // namespace detail

inline SparseMatrix read_matrix_market(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty Matrix Market stream");
  ++line_no;

  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (tag != "%%MatrixMarket") {
    throw ParseError("missing %%MatrixMarket banner");
  }
  object = detail::lowercase(object);
  format = detail::lowercase(format);
  field = detail::lowercase(field);
  symmetry = detail::lowercase(symmetry);
  if (object != "matrix") throw ParseError("unsupported object '" + object + "'");
  if (format != "coordinate") {
    throw ParseError("only coordinate format is supported, got '" + format + "'");
  }
  if (field == "complex") throw ParseError("complex matrices are not supported");
  if (field != "real" && field != "pattern" && field != "integer") {
    throw ParseError("unsupported field '" + field + "'");
  }
  if (symmetry != "general" && symmetry != "symmetric") {
    throw ParseError("unsupported symmetry '" + symmetry + "'");
  }
  const bool pattern = field == "pattern";
  const bool symmetric = symmetry == "symmetric";

  do {
    if (!std::getline(in, line)) throw ParseError("missing size line");
    ++line_no;
  } while (detail::blank_or_comment(line));

  long long rows = -1, cols = -1, entries = -1;
  {
    std::istringstream ss(line);
    if (!(ss >> rows >> cols >> entries) || rows < 0 || cols < 0 || entries < 0) {
      throw ParseError("malformed size line " + std::to_string(line_no));
    }
  }

  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(symmetric ? 2 * entries : entries));
  long long seen = 0;
  while (seen < entries && std::getline(in, line)) {
    ++line_no;
    if (detail::blank_or_comment(line)) continue;
    std::istringstream ss(line);
    long long i = 0, j = 0;
    double v = 1.0;
    if (!(ss >> i >> j)) {
      throw ParseError("malformed entry on line " + std::to_string(line_no));
    }
    if (!pattern && !(ss >> v)) {
      throw ParseError("missing value on line " + std::to_string(line_no));
    }
    if (i < 1 || j < 1 || i > rows || j > cols) {
      throw ParseError("index out of declared bounds on line " +
                       std::to_string(line_no));
    }
    const auto r = static_cast<Index>(i - 1);
    const auto c = static_cast<Index>(j - 1);
    t.push_back({r, c, v});
    if (symmetric && r != c) t.push_back({c, r, v});
    ++seen;
  }
  if (seen != entries) {
    throw ParseError("expected " + std::to_string(entries) + " entries, found " +
                     std::to_string(seen));
  }
  try {
    return SparseMatrix::from_triplets(static_cast<Index>(rows),
                                       static_cast<Index>(cols), std::move(t));
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
}

inline SparseMatrix load_matrix_market(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_matrix_market(in);
}

/// Writes `general real` coordinate format with round-trip precision.
inline void write_matrix_market(std::ostream& out, const SparseMatrix& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nnz() << '\n';
  char buf[64];
  for (Index i = 0; i < a.rows(); ++i) {
    const auto cols = a.row_cols(i);
    const auto vals = a.row_values(i);
    for (std::size_t p = 0; p < cols.size(); ++p) {
      std::snprintf(buf, sizeof buf, "%.17g", vals[p]);
      out << (i + 1) << ' ' << (cols[p] + 1) << ' ' << buf << '\n';
    }
  }
}

inline void save_matrix_market(const std::filesystem::path& path,
                               const SparseMatrix& a) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  write_matrix_market(out, a);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace fracdiff
