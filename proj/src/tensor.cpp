// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dpnp/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "dpnp/errors.hpp"

namespace dpnp {

Shape make_global_shape(int channels, int rows, int cols) {
    if (channels < 1 || rows < 1 || cols < 1) {
        throw InvalidArgument("global shape must be positive, got " +
                              std::to_string(channels) + "x" + std::to_string(rows) +
                              "x" + std::to_string(cols));
    }
    return Shape{channels, rows, cols};
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape) {
    if (shape.channels < 0 || shape.rows < 0 || shape.cols < 0) {
        throw InvalidArgument("negative tensor extent");
    }
    data_.assign(shape.size(), fill);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    if (a.size() == 0) return true;
    return std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace dpnp
