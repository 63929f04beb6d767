#pragma once

#include <cassert>
#include <cstddef>
#include <string>
#include <vector>

namespace mcseg {

// Full: regular 64-bit arithmetic. EmulatedHalf: every stored value is
// exactly representable as a 16-bit binary float (see half.hpp).
enum class Precision { Full, EmulatedHalf };

// Dense row-major numeric array. Rank 1 or 2 is all the model needs.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape)
        : shape_(std::move(shape)), data_(checked_count(shape_), 0.0) {}

    Tensor(std::vector<int> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        assert(data_.size() == checked_count(shape_));
    }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int> shape, double v) {
        Tensor t(std::move(shape));
        for (auto& x : t.data_) x = v;
        return t;
    }

    static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }

    static Tensor row(std::vector<double> values) {
        int n = static_cast<int>(values.size());
        return Tensor({1, n}, std::move(values));
    }

    const std::vector<int>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    int rank() const { return static_cast<int>(shape_.size()); }
    int rows() const { return rank() >= 1 ? shape_[0] : 0; }
    int cols() const { return rank() >= 2 ? shape_[1] : (rank() == 1 ? 1 : 0); }

    double& at(int r, int c) {
        assert(rank() == 2 && r >= 0 && r < shape_[0] && c >= 0 && c < shape_[1]);
        return data_[static_cast<std::size_t>(r) * shape_[1] + c];
    }
    double at(int r, int c) const {
        assert(rank() == 2 && r >= 0 && r < shape_[0] && c >= 0 && c < shape_[1]);
        return data_[static_cast<std::size_t>(r) * shape_[1] + c];
    }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    Precision precision() const { return precision_; }
    void set_precision(Precision p) { precision_ = p; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_string() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ", ";
            s += std::to_string(shape_[i]);
        }
        return s + "]";
    }

private:
    static std::size_t checked_count(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int d : shape) {
            assert(d >= 0);
            n *= static_cast<std::size_t>(d);
        }
        return shape.empty() ? 0 : n;
    }

    std::vector<int> shape_;
    std::vector<double> data_;
    Precision precision_ = Precision::Full;
};

}  // namespace mcseg
