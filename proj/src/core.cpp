#include "tnm/core.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "tnm/errors.hpp"

namespace tnm {

SparsityPattern SparsityPattern::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 >= text.size())
    throw ParseError("pattern: expected \"N:M\", got \"" + text + "\"");
  const std::string left = text.substr(0, colon);
  const std::string right = text.substr(colon + 1);
  for (const std::string& part : {left, right}) {
    if (part.empty()) throw ParseError("pattern: expected \"N:M\", got \"" + text + "\"");
    for (char ch : part)
      if (ch < '0' || ch > '9') throw ParseError("pattern: non-numeric component in \"" + text + "\"");
    if (part.size() > 6) throw ParseError("pattern: component out of range in \"" + text + "\"");
  }
  const int n = std::atoi(left.c_str());
  const int m = std::atoi(right.c_str());
  if (m < 2 || n < 1 || n > m)
    throw ParseError("pattern: need 0 < N <= M and M >= 2, got \"" + text + "\"");
  return SparsityPattern(n, m);
}

BlockBatch partition_blocks(const DenseMatrix& matrix, const SparsityPattern& pattern) {
  const std::int64_t m = pattern.m;
  if (matrix.rows % m != 0 || matrix.cols % m != 0)
    throw DimensionError("partition: matrix " + std::to_string(matrix.rows) + "x" +
                         std::to_string(matrix.cols) + " not divisible by m=" + std::to_string(m));
  const std::int64_t brows = matrix.rows / m;
  const std::int64_t bcols = matrix.cols / m;

  BlockBatch out;
  out.b = brows * bcols;
  out.m = m;
  out.src_rows = matrix.rows;
  out.src_cols = matrix.cols;
  out.magnitudes.resize(static_cast<std::size_t>(out.b) * m * m);
  out.origins.resize(static_cast<std::size_t>(out.b));

  for (std::int64_t br = 0; br < brows; ++br) {
    for (std::int64_t bc = 0; bc < bcols; ++bc) {
      const std::int64_t bi = br * bcols + bc;
      out.origins[bi] = {br, bc};
      double* dst = out.magnitudes.data() + bi * m * m;
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < m; ++j)
          dst[i * m + j] = std::fabs(matrix.at(br * m + i, bc * m + j));
    }
  }
  return out;
}

DenseMatrix assemble_mask(const BinaryMaskBatch& batch, const std::vector<BlockOrigin>& origins,
                          std::int64_t rows, std::int64_t cols) {
  const std::int64_t m = batch.m;
  if (m <= 0 || rows % m != 0 || cols % m != 0)
    throw ShapeError("assemble: target dims not divisible by tile size");
  if (origins.size() != static_cast<std::size_t>(batch.b))
    throw ShapeError("assemble: origin count " + std::to_string(origins.size()) +
                     " != block count " + std::to_string(batch.b));

  DenseMatrix out = DenseMatrix::zeros(rows, cols);
  for (std::int64_t bi = 0; bi < batch.b; ++bi) {
    const auto [br, bc] = origins[bi];
    if (br < 0 || bc < 0 || (br + 1) * m > rows || (bc + 1) * m > cols)
      throw ShapeError("assemble: origin out of range for block " + std::to_string(bi));
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < m; ++j)
        out.at(br * m + i, bc * m + j) = batch.at(bi, i, j) ? 1.0 : 0.0;
  }
  return out;
}

MaskObjectiveReport mask_objective(const BlockBatch& batch, const BinaryMaskBatch& mask) {
  if (batch.b != mask.b || batch.m != mask.m)
    throw ShapeError("objective: batch " + std::to_string(batch.b) + "x" + std::to_string(batch.m) +
                     " vs mask " + std::to_string(mask.b) + "x" + std::to_string(mask.m));
  MaskObjectiveReport report;
  report.per_block.resize(static_cast<std::size_t>(batch.b), 0.0);
  for (std::int64_t bi = 0; bi < batch.b; ++bi) {
    const double* w = batch.magnitudes.data() + bi * batch.m * batch.m;
    const std::uint8_t* s = mask.bits.data() + bi * batch.m * batch.m;
    double acc = 0.0;
    for (std::int64_t k = 0; k < batch.m * batch.m; ++k)
      if (s[k]) acc += w[k];
    report.per_block[bi] = acc;
  }
  for (double v : report.per_block) report.objective += v;
  return report;
}

FeasibilityReport check_feasible(const BinaryMaskBatch& mask, const SparsityPattern& pattern) {
  if (mask.m != pattern.m)
    throw ShapeError("feasible: mask tile size " + std::to_string(mask.m) +
                     " != pattern m " + std::to_string(pattern.m));
  FeasibilityReport report;
  const std::int64_t m = mask.m;
  for (std::int64_t bi = 0; bi < mask.b; ++bi) {
    const std::uint8_t* s = mask.bits.data() + bi * m * m;
    for (std::int64_t i = 0; i < m; ++i) {
      std::int64_t sum = 0;
      for (std::int64_t j = 0; j < m; ++j) sum += s[i * m + j];
      if (sum != pattern.n) report.violations.push_back({bi, Axis::kRow, i, sum});
    }
    for (std::int64_t j = 0; j < m; ++j) {
      std::int64_t sum = 0;
      for (std::int64_t i = 0; i < m; ++i) sum += s[i * m + j];
      if (sum != pattern.n) report.violations.push_back({bi, Axis::kCol, j, sum});
    }
  }
  report.feasible = report.violations.empty();
  return report;
}

}  // namespace tnm
