// Copyright (c) 2026 kinface contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "kinface/errors.hpp"

namespace kinface {

// Row-major dense tensor of 64-bit floats. Value type; shape is dynamic but
// every operation validates it.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(element_count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != element_count(shape_)) {
            throw DimensionError("Tensor: data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_string(shape_) +
                                 " (expected " + std::to_string(element_count(shape_)) + ")");
        }
    }

    static Tensor zeros(std::initializer_list<std::size_t> shape) {
        return Tensor(std::vector<std::size_t>(shape));
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t dim(std::size_t axis) const {
        if (axis >= shape_.size()) {
            throw DimensionError("Tensor::dim: axis " + std::to_string(axis) +
                                 " out of range for rank " + std::to_string(shape_.size()));
        }
        return shape_[axis];
    }

    // 2-D convenience accessors; rank is checked.
    std::size_t rows() const { return dim2().first; }
    std::size_t cols() const { return dim2().second; }

    double& at(std::size_t r, std::size_t c) {
        auto [nr, nc] = dim2();
        check_index(r, nr, c, nc);
        return data_[r * nc + c];
    }
    double at(std::size_t r, std::size_t c) const {
        auto [nr, nc] = dim2();
        check_index(r, nr, c, nc);
        return data_[r * nc + c];
    }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void require_shape(std::initializer_list<std::size_t> expected, const char* what) const {
        const std::vector<std::size_t> want(expected);
        if (shape_ != want) {
            throw DimensionError(std::string(what) + ": expected shape " + shape_string(want) +
                                 ", actual " + shape_string(shape_));
        }
    }

    static std::string shape_string(const std::vector<std::size_t>& shape) {
        std::ostringstream os;
        os << "(";
        for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
        os << ")";
        return os.str();
    }

private:
    static std::size_t element_count(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                               std::multiplies<std::size_t>());
    }

    std::pair<std::size_t, std::size_t> dim2() const {
        if (shape_.size() != 2) {
            throw DimensionError("Tensor: expected rank 2, actual rank " +
                                 std::to_string(shape_.size()) + " with shape " +
                                 shape_string(shape_));
        }
        return {shape_[0], shape_[1]};
    }

    static void check_index(std::size_t r, std::size_t nr, std::size_t c, std::size_t nc) {
        if (r >= nr || c >= nc) {
            throw DimensionError("Tensor: index (" + std::to_string(r) + "," + std::to_string(c) +
                                 ") out of range for shape (" + std::to_string(nr) + "," +
                                 std::to_string(nc) + ")");
        }
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Mean of squared differences over all elements.
inline double mse(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("mse: shape mismatch, expected " + Tensor::shape_string(a.shape()) +
                             ", actual " + Tensor::shape_string(b.shape()));
    }
    if (a.empty()) throw DimensionError("mse: empty tensors");
    double acc = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = pa[i] - pb[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

}  // namespace kinface
