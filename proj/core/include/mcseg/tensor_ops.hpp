#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "mcseg/rng.hpp"
#include "mcseg/tensor.hpp"

namespace mcseg::ops {

// Plain (non-differentiating) tensor math. The tape ops in tape.hpp and
// the inference path in encoder.cpp both run on these kernels.

[[noreturn]] void throw_shape_mismatch(const char* op, const Tensor& a, const Tensor& b);

Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k]x[k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m,k]x[n,k]^T -> [m,n]
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // [k,m]^T x [k,n] -> [m,n]

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double c);
Tensor add_rowvec(const Tensor& a, const Tensor& bias);  // bias shape [1,n] or [n]

// Row-wise softmax. Columns at index >= valid_cols (when >= 0) are masked
// out with an additive -inf before normalization and come back as 0.
Tensor softmax_rows(const Tensor& a, int valid_cols = -1);

inline constexpr double kLayerNormEps = 1e-5;
Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias,
                       double eps = kLayerNormEps);

double gelu_scalar(double x);
double gelu_grad_scalar(double x);
Tensor gelu(const Tensor& a);
Tensor relu(const Tensor& a);

// Identity when !training; otherwise zeroes entries with probability p and
// rescales survivors by 1/(1-p). Mask order is row-major over `a`.
Tensor dropout(const Tensor& a, double p, Rng& rng, bool training);

Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, int c0, int c1);
Tensor gather_rows(const Tensor& table, std::span<const int> ids);
Tensor transpose(const Tensor& a);

double sum_all(const Tensor& a);

// Entries uniform in +-sqrt(6/(fan_in+fan_out)); 2-D shapes only.
Tensor xavier_uniform_init(const std::vector<int>& shape, std::uint64_t seed);
Tensor xavier_uniform_init(const std::vector<int>& shape, Rng& rng);

}  // namespace mcseg::ops
