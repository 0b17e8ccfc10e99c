#pragma once

#include <cstdint>
#include <string>

#include "tnm/types.hpp"

namespace tnm {

// Binary container: magic "TNM1", one dtype byte, three reserved zero bytes,
// rows and cols as u64 little-endian, then the row-major payload (f32/f64
// little-endian, or one byte per cell for masks).
enum class TnmDtype : std::uint8_t { kF32 = 0, kF64 = 1, kMask = 2 };

struct TnmHeader {
  TnmDtype dtype = TnmDtype::kF64;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
};

// Reads just the 24-byte header (magic + dtype + dims).
TnmHeader peek_tnm_header(const std::string& path);

// Reads an f32 or f64 file; f32 payloads are widened to double.
DenseMatrix read_matrix_tnm(const std::string& path);

// Reads a dtype-2 file; every payload byte must be 0 or 1.
DenseMatrix read_mask_tnm(const std::string& path);

void write_matrix_tnm(const std::string& path, const DenseMatrix& matrix,
                      TnmDtype dtype = TnmDtype::kF64);

// Writes dtype 2; values must be exactly 0.0 or 1.0.
void write_mask_tnm(const std::string& path, const DenseMatrix& mask);

// Numeric CSV: comma separators, no header, scientific notation accepted,
// locale independent. Ragged rows raise ParseError naming the row.
DenseMatrix read_matrix_csv(const std::string& path);

// Dispatches on the file name: ".csv" -> CSV, anything else -> TNM1.
DenseMatrix read_matrix_auto(const std::string& path);

}  // namespace tnm
