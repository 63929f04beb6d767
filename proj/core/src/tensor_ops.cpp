#include "mcseg/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mcseg::ops {

void throw_shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                                a.shape_string() + " and " + b.shape_string());
}

static void require_2d(const char* op, const Tensor& a) {
    if (a.rank() != 2) {
        throw std::invalid_argument(std::string(op) + ": expected rank-2 tensor, got " +
                                    a.shape_string());
    }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d("matmul", a);
    require_2d("matmul", b);
    if (a.cols() != b.rows()) throw_shape_mismatch("matmul", a, b);
    const int m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            if (av == 0.0) continue;
            const double* brow = pb + p * n;
            double* orow = po + i * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_2d("matmul_nt", a);
    require_2d("matmul_nt", b);
    if (a.cols() != b.cols()) throw_shape_mismatch("matmul_nt", a, b);
    const int m = a.rows(), k = a.cols(), n = b.rows();
    Tensor out({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (int i = 0; i < m; ++i) {
        const double* arow = pa + i * k;
        for (int j = 0; j < n; ++j) {
            const double* brow = pb + j * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
            po[i * n + j] = s;
        }
    }
    return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_2d("matmul_tn", a);
    require_2d("matmul_tn", b);
    if (a.rows() != b.rows()) throw_shape_mismatch("matmul_tn", a, b);
    const int k = a.rows(), m = a.cols(), n = b.cols();
    Tensor out({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (int p = 0; p < k; ++p) {
        const double* arow = pa + p * m;
        const double* brow = pb + p * n;
        for (int i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* orow = po + i * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw_shape_mismatch("add", a, b);
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw_shape_mismatch("sub", a, b);
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw_shape_mismatch("mul", a, b);
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = a;
    for (auto& x : out.raw()) x *= c;
    return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& bias) {
    require_2d("add_rowvec", a);
    const int n = a.cols();
    if (static_cast<int>(bias.size()) != n) throw_shape_mismatch("add_rowvec", a, bias);
    Tensor out = a;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < n; ++j) out.at(i, j) += bias[j];
    return out;
}

Tensor softmax_rows(const Tensor& a, int valid_cols) {
    require_2d("softmax_rows", a);
    const int m = a.rows(), n = a.cols();
    if (m == 0) return a;
    const int v = valid_cols >= 0 ? std::min(valid_cols, n) : n;
    if (v == 0) throw std::invalid_argument("softmax_rows: no valid columns");
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < v; ++j) mx = std::max(mx, a.at(i, j));
        double z = 0.0;
        for (int j = 0; j < v; ++j) z += std::exp(a.at(i, j) - mx);
        for (int j = 0; j < v; ++j) out.at(i, j) = std::exp(a.at(i, j) - mx) / z;
    }
    return out;
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
    require_2d("layer_norm_rows", a);
    const int n = a.cols();
    if (static_cast<int>(gain.size()) != n) throw_shape_mismatch("layer_norm_rows", a, gain);
    if (static_cast<int>(bias.size()) != n) throw_shape_mismatch("layer_norm_rows", a, bias);
    Tensor out({a.rows(), n});
    for (int i = 0; i < a.rows(); ++i) {
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += a.at(i, j);
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            double d = a.at(i, j) - mean;
            var += d * d;
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < n; ++j)
            out.at(i, j) = gain[j] * ((a.at(i, j) - mean) * inv) + bias[j];
    }
    return out;
}

double gelu_scalar(double x) {
    return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865475244));
}

double gelu_grad_scalar(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * 0.7071067811865475244));
    const double pdf = 0.3989422804014326779 * std::exp(-0.5 * x * x);
    return cdf + x * pdf;
}

Tensor gelu(const Tensor& a) {
    Tensor out = a;
    for (auto& x : out.raw()) x = gelu_scalar(x);
    return out;
}

Tensor relu(const Tensor& a) {
    Tensor out = a;
    for (auto& x : out.raw()) x = x > 0.0 ? x : 0.0;
    return out;
}

Tensor dropout(const Tensor& a, double p, Rng& rng, bool training) {
    if (!training || p <= 0.0) return a;
    if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
    Tensor out = a;
    const double keep = 1.0 - p;
    for (auto& x : out.raw()) x = rng.uniform() < p ? 0.0 : x / keep;
    return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    require_2d("concat_cols", a);
    require_2d("concat_cols", b);
    if (a.rows() != b.rows()) throw_shape_mismatch("concat_cols", a, b);
    Tensor out({a.rows(), a.cols() + b.cols()});
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) out.at(i, j) = a.at(i, j);
        for (int j = 0; j < b.cols(); ++j) out.at(i, a.cols() + j) = b.at(i, j);
    }
    return out;
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
    require_2d("slice_cols", a);
    if (c0 < 0 || c1 > a.cols() || c0 >= c1)
        throw std::invalid_argument("slice_cols: bad range [" + std::to_string(c0) + ", " +
                                    std::to_string(c1) + ") for " + a.shape_string());
    Tensor out({a.rows(), c1 - c0});
    for (int i = 0; i < a.rows(); ++i)
        for (int j = c0; j < c1; ++j) out.at(i, j - c0) = a.at(i, j);
    return out;
}

Tensor gather_rows(const Tensor& table, std::span<const int> ids) {
    require_2d("gather_rows", table);
    Tensor out({static_cast<int>(ids.size()), table.cols()});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= table.rows())
            throw std::out_of_range("gather_rows: id " + std::to_string(ids[i]) +
                                    " outside table " + table.shape_string());
        for (int j = 0; j < table.cols(); ++j)
            out.at(static_cast<int>(i), j) = table.at(ids[i], j);
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    require_2d("transpose", a);
    Tensor out({a.cols(), a.rows()});
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
    return out;
}

double sum_all(const Tensor& a) {
    double s = 0.0;
    for (double x : a.raw()) s += x;
    return s;
}

Tensor xavier_uniform_init(const std::vector<int>& shape, Rng& rng) {
    if (shape.size() != 2)
        throw std::invalid_argument("xavier_uniform_init: shape must be 2-D");
    const double bound = std::sqrt(6.0 / (shape[0] + shape[1]));
    Tensor out(shape);
    for (auto& x : out.raw()) x = rng.uniform(-bound, bound);
    return out;
}

Tensor xavier_uniform_init(const std::vector<int>& shape, std::uint64_t seed) {
    Rng rng(seed);
    return xavier_uniform_init(shape, rng);
}

}  // namespace mcseg::ops
