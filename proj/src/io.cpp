#include "tnm/io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

#include "tnm/errors.hpp"

namespace tnm {
namespace {

constexpr char kMagic[4] = {'T', 'N', 'M', '1'};
constexpr std::size_t kHeaderBytes = 4 + 1 + 3 + 8 + 8;

std::uint64_t load_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void store_u64_le(unsigned char* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
}

TnmHeader parse_header(const unsigned char* buf, const std::string& path) {
  if (std::memcmp(buf, kMagic, 4) != 0)
    throw FormatError(path + ": bad magic, not a TNM1 file");
  const unsigned dtype = buf[4];
  if (dtype > 2) throw FormatError(path + ": unknown dtype byte " + std::to_string(dtype));
  if (buf[5] != 0 || buf[6] != 0 || buf[7] != 0)
    throw FormatError(path + ": reserved header bytes must be zero");
  TnmHeader h;
  h.dtype = static_cast<TnmDtype>(dtype);
  h.rows = load_u64_le(buf + 8);
  h.cols = load_u64_le(buf + 16);
  return h;
}

struct OpenFile {
  std::ifstream stream;
  TnmHeader header;
};

OpenFile open_tnm(const std::string& path) {
  OpenFile f;
  f.stream.open(path, std::ios::binary);
  if (!f.stream) throw IoError(path + ": cannot open for reading");
  unsigned char buf[kHeaderBytes];
  f.stream.read(reinterpret_cast<char*>(buf), kHeaderBytes);
  if (f.stream.gcount() != static_cast<std::streamsize>(kHeaderBytes))
    throw FormatError(path + ": truncated header");
  f.header = parse_header(buf, path);
  const std::uint64_t cells = f.header.rows * f.header.cols;
  if (f.header.rows != 0 && cells / f.header.rows != f.header.cols)
    throw FormatError(path + ": dimension overflow");
  if (cells > (1ULL << 31))
    throw FormatError(path + ": refusing to read more than 2^31 cells");
  return f;
}

void read_exact(std::ifstream& stream, char* dst, std::size_t bytes, const std::string& path) {
  stream.read(dst, static_cast<std::streamsize>(bytes));
  if (stream.gcount() != static_cast<std::streamsize>(bytes))
    throw FormatError(path + ": truncated payload");
  if (stream.peek() != std::char_traits<char>::eof())
    throw FormatError(path + ": trailing bytes after the payload");
}

}  // namespace

TnmHeader peek_tnm_header(const std::string& path) { return open_tnm(path).header; }

DenseMatrix read_matrix_tnm(const std::string& path) {
  OpenFile f = open_tnm(path);
  if (f.header.dtype == TnmDtype::kMask)
    throw FormatError(path + ": expected a float matrix, found a mask file");
  const std::size_t cells = static_cast<std::size_t>(f.header.rows * f.header.cols);
  std::vector<double> values(cells);
  if (f.header.dtype == TnmDtype::kF64) {
    std::vector<unsigned char> raw(cells * 8);
    read_exact(f.stream, reinterpret_cast<char*>(raw.data()), raw.size(), path);
    for (std::size_t k = 0; k < cells; ++k) {
      std::uint64_t bits = load_u64_le(raw.data() + k * 8);
      double v;
      std::memcpy(&v, &bits, 8);
      values[k] = v;
    }
  } else {
    std::vector<unsigned char> raw(cells * 4);
    read_exact(f.stream, reinterpret_cast<char*>(raw.data()), raw.size(), path);
    for (std::size_t k = 0; k < cells; ++k) {
      std::uint32_t bits = 0;
      for (int i = 3; i >= 0; --i) bits = (bits << 8) | raw[k * 4 + i];
      float v;
      std::memcpy(&v, &bits, 4);
      values[k] = static_cast<double>(v);
    }
  }
  try {
    return DenseMatrix(static_cast<std::int64_t>(f.header.rows),
                       static_cast<std::int64_t>(f.header.cols), std::move(values));
  } catch (const NumericalError&) {
    throw FormatError(path + ": payload contains non-finite values");
  }
}

DenseMatrix read_mask_tnm(const std::string& path) {
  OpenFile f = open_tnm(path);
  if (f.header.dtype != TnmDtype::kMask)
    throw FormatError(path + ": expected a mask file (dtype 2)");
  const std::size_t cells = static_cast<std::size_t>(f.header.rows * f.header.cols);
  std::vector<unsigned char> raw(cells);
  read_exact(f.stream, reinterpret_cast<char*>(raw.data()), raw.size(), path);
  std::vector<double> values(cells);
  for (std::size_t k = 0; k < cells; ++k) {
    if (raw[k] > 1)
      throw FormatError(path + ": mask payload byte " + std::to_string(raw[k]) +
                        " at cell " + std::to_string(k));
    values[k] = raw[k];
  }
  return DenseMatrix(static_cast<std::int64_t>(f.header.rows),
                     static_cast<std::int64_t>(f.header.cols), std::move(values));
}

namespace {

void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path + ": write failed");
}

std::vector<unsigned char> header_bytes(TnmDtype dtype, std::uint64_t rows, std::uint64_t cols) {
  std::vector<unsigned char> buf(kHeaderBytes, 0);
  std::memcpy(buf.data(), kMagic, 4);
  buf[4] = static_cast<unsigned char>(dtype);
  store_u64_le(buf.data() + 8, rows);
  store_u64_le(buf.data() + 16, cols);
  return buf;
}

}  // namespace

void write_matrix_tnm(const std::string& path, const DenseMatrix& matrix, TnmDtype dtype) {
  if (dtype == TnmDtype::kMask) {
    write_mask_tnm(path, matrix);
    return;
  }
  std::vector<unsigned char> buf = header_bytes(dtype, static_cast<std::uint64_t>(matrix.rows),
                                                static_cast<std::uint64_t>(matrix.cols));
  if (dtype == TnmDtype::kF64) {
    buf.resize(kHeaderBytes + matrix.values.size() * 8);
    for (std::size_t k = 0; k < matrix.values.size(); ++k) {
      std::uint64_t bits;
      std::memcpy(&bits, &matrix.values[k], 8);
      store_u64_le(buf.data() + kHeaderBytes + k * 8, bits);
    }
  } else {
    buf.resize(kHeaderBytes + matrix.values.size() * 4);
    for (std::size_t k = 0; k < matrix.values.size(); ++k) {
      const float v = static_cast<float>(matrix.values[k]);
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      for (int i = 0; i < 4; ++i)
        buf[kHeaderBytes + k * 4 + i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    }
  }
  write_file(path, buf);
}

void write_mask_tnm(const std::string& path, const DenseMatrix& mask) {
  std::vector<unsigned char> buf = header_bytes(TnmDtype::kMask,
                                                static_cast<std::uint64_t>(mask.rows),
                                                static_cast<std::uint64_t>(mask.cols));
  buf.resize(kHeaderBytes + mask.values.size());
  for (std::size_t k = 0; k < mask.values.size(); ++k) {
    const double v = mask.values[k];
    if (v != 0.0 && v != 1.0)
      throw PreconditionError(path + ": mask values must be exactly 0 or 1");
    buf[kHeaderBytes + k] = v == 1.0 ? 1 : 0;
  }
  write_file(path, buf);
}

DenseMatrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open for reading");
  std::vector<double> values;
  std::int64_t rows = 0;
  std::int64_t cols = -1;
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      // A trailing blank line is fine; a blank line between rows is not.
      if (in.peek() != std::char_traits<char>::eof())
        throw ParseError(path + ": blank line " + std::to_string(lineno));
      continue;
    }
    std::int64_t fields = 0;
    std::size_t start = 0;
    while (true) {
      std::size_t end = line.find(',', start);
      if (end == std::string::npos) end = line.size();
      std::size_t lo = start, hi = end;
      while (lo < hi && (line[lo] == ' ' || line[lo] == '\t')) ++lo;
      while (hi > lo && (line[hi - 1] == ' ' || line[hi - 1] == '\t')) --hi;
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(line.data() + lo, line.data() + hi, v);
      if (ec != std::errc() || ptr != line.data() + hi)
        throw ParseError(path + ": row " + std::to_string(lineno) + ": bad number \"" +
                         line.substr(start, end - start) + "\"");
      values.push_back(v);
      ++fields;
      if (end == line.size()) break;
      start = end + 1;
    }
    if (cols < 0)
      cols = fields;
    else if (fields != cols)
      throw ParseError(path + ": row " + std::to_string(lineno) + ": expected " +
                       std::to_string(cols) + " columns, got " + std::to_string(fields));
    ++rows;
  }
  if (rows == 0) throw ParseError(path + ": empty CSV");
  try {
    return DenseMatrix(rows, cols, std::move(values));
  } catch (const NumericalError&) {
    throw ParseError(path + ": CSV contains non-finite values");
  }
}

DenseMatrix read_matrix_auto(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0)
    return read_matrix_csv(path);
  return read_matrix_tnm(path);
}

}  // namespace tnm
