#pragma once

#include <stdexcept>
#include <string>

namespace tnm {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define TNM_DEFINE_ERROR(NAME)                                    \
  class NAME : public Error {                                     \
   public:                                                        \
    explicit NAME(const std::string& what) : Error(what) {}       \
  }

TNM_DEFINE_ERROR(DimensionError);    // matrix dims not divisible by m, bad pattern dims
TNM_DEFINE_ERROR(ShapeError);        // mismatched batch / mask / origin shapes
TNM_DEFINE_ERROR(SizeError);         // desk-scale guards (m too large for a solver)
TNM_DEFINE_ERROR(ScaleError);        // magnitudes outside integer-scaling range
TNM_DEFINE_ERROR(NumericalError);    // NaN/overflow detected mid-computation
TNM_DEFINE_ERROR(PreconditionError); // caller violated a documented precondition
TNM_DEFINE_ERROR(DegenerateError);   // quantity undefined for degenerate input
TNM_DEFINE_ERROR(ParseError);        // text input (CSV, pattern string) malformed
TNM_DEFINE_ERROR(FormatError);       // binary file malformed
TNM_DEFINE_ERROR(IoError);           // file missing / unreadable / unwritable
// A feasibility repair failed; indicates a bug, not bad input.
TNM_DEFINE_ERROR(InfeasibleInternalError);

#undef TNM_DEFINE_ERROR

}  // namespace tnm
