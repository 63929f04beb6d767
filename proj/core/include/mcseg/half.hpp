#pragma once

#include "mcseg/tensor.hpp"

namespace mcseg {

inline constexpr double kHalfMax = 65504.0;      // (2 - 2^-10) * 2^15
inline constexpr double kHalfMinSubnormal = 5.9604644775390625e-08;  // 2^-24

// Round to the nearest value representable in 16-bit binary floating point
// (ties to even). Magnitudes beyond the half range clamp to kHalfMax.
// Subnormals round on the 2^-24 grid. NaN passes through.
double quantize_half_value(double x);

// Elementwise quantize_half_value; result is tagged Precision::EmulatedHalf.
Tensor quantize_half(const Tensor& t);

}  // namespace mcseg
