// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dpnp {

/// Extent of a (channel, row, col) image or feature map.
struct Shape {
    int channels = 0;
    int rows = 0;
    int cols = 0;

    std::size_t size() const noexcept {
        return static_cast<std::size_t>(channels) * rows * cols;
    }
    std::size_t plane() const noexcept {
        return static_cast<std::size_t>(rows) * cols;
    }
    friend bool operator==(const Shape&, const Shape&) = default;
};

/// Validated global image extent: C, N_y, N_x all at least one.
Shape make_global_shape(int channels, int rows, int cols);

/// Dense row-major (channel, row, col) array of doubles. Zero-row tensors
/// are allowed; they show up as empty ghost buffers.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);

    const Shape& shape() const noexcept { return shape_; }
    int channels() const noexcept { return shape_.channels; }
    int rows() const noexcept { return shape_.rows; }
    int cols() const noexcept { return shape_.cols; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(int c, int i, int j) noexcept {
        return data_[index(c, i, j)];
    }
    double operator()(int c, int i, int j) const noexcept {
        return data_[index(c, i, j)];
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    std::span<double> row(int c, int i) noexcept {
        return {data_.data() + index(c, i, 0), static_cast<std::size_t>(shape_.cols)};
    }
    std::span<const double> row(int c, int i) const noexcept {
        return {data_.data() + index(c, i, 0), static_cast<std::size_t>(shape_.cols)};
    }

    std::span<double> plane(int c) noexcept {
        return {data_.data() + index(c, 0, 0), shape_.plane()};
    }
    std::span<const double> plane(int c) const noexcept {
        return {data_.data() + index(c, 0, 0), shape_.plane()};
    }

    void fill(double value);

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::size_t index(int c, int i, int j) const noexcept {
        return (static_cast<std::size_t>(c) * shape_.rows + i) * shape_.cols + j;
    }

    Shape shape_{};
    std::vector<double> data_;
};

/// Bitwise equality, treating NaN payloads and signed zeros as distinct.
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace dpnp
