#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tnm/errors.hpp"

namespace tnm {

// n-out-of-m sparsity pattern. n == m is legal and means "keep everything".
struct SparsityPattern {
  int n = 0;
  int m = 0;

  SparsityPattern(int n_, int m_) : n(n_), m(m_) {
    if (m < 2) throw DimensionError("pattern: m must be >= 2, got " + std::to_string(m));
    if (n < 1 || n > m)
      throw DimensionError("pattern: need 0 < n <= m, got " + std::to_string(n) + ":" +
                           std::to_string(m));
  }

  // Parses "N:M". Rejects junk, zero, and n > m.
  static SparsityPattern parse(const std::string& text);

  std::string str() const { return std::to_string(n) + ":" + std::to_string(m); }

  friend bool operator==(const SparsityPattern& a, const SparsityPattern& b) {
    return a.n == b.n && a.m == b.m;
  }
};

// Row-major dense matrix of doubles. Entries are kept finite; anything that
// would introduce a NaN/inf is rejected at construction.
struct DenseMatrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<double> values;

  DenseMatrix() = default;

  DenseMatrix(std::int64_t r, std::int64_t c, std::vector<double> v) : rows(r), cols(c), values(std::move(v)) {
    if (rows < 0 || cols < 0 || values.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
      throw ShapeError("matrix: value count does not match rows*cols");
    for (double x : values)
      if (!std::isfinite(x)) throw NumericalError("matrix: non-finite entry");
  }

  static DenseMatrix zeros(std::int64_t r, std::int64_t c) {
    return DenseMatrix(r, c, std::vector<double>(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0));
  }

  double& at(std::int64_t r, std::int64_t c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double at(std::int64_t r, std::int64_t c) const { return values[static_cast<std::size_t>(r) * cols + c]; }

  std::size_t size() const { return values.size(); }
};

}  // namespace tnm
