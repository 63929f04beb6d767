#include "mcseg/half.hpp"

#include <cmath>

namespace mcseg {

double quantize_half_value(double x) {
    if (std::isnan(x)) return x;
    if (x == 0.0) return x;  // keeps signed zero
    const double sign = x < 0.0 ? -1.0 : 1.0;
    double a = std::fabs(x);
    if (a > kHalfMax) return sign * kHalfMax;

    // Quantum: 2^(e-10) for normals, fixed 2^-24 in the subnormal range.
    double q;
    if (a < 0x1.0p-14) {
        q = 0x1.0p-24;
    } else {
        int e = std::ilogb(a);
        q = std::ldexp(1.0, e - 10);
    }
    // a/q <= 2048, exactly representable; nearbyint rounds ties-to-even
    // under the default FE_TONEAREST mode.
    double r = std::nearbyint(a / q) * q;
    if (r > kHalfMax) r = kHalfMax;
    return sign * r;
}

Tensor quantize_half(const Tensor& t) {
    Tensor out = t;
    for (auto& x : out.raw()) x = quantize_half_value(x);
    out.set_precision(Precision::EmulatedHalf);
    return out;
}

}  // namespace mcseg
