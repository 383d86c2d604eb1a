// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dpnp/grid.hpp"

#include <algorithm>
#include <string>

#include "dpnp/errors.hpp"

namespace dpnp {

Partition::Partition(int rows, std::vector<int> bounds, int halo)
    : rows_(rows), bounds_(std::move(bounds)), halo_(halo) {
    if (rows < 1) throw InvalidArgument("partition needs at least one row");
    if (halo < 0) throw InvalidArgument("negative halo");
    if (bounds_.size() < 2 || bounds_.front() != 0 || bounds_.back() != rows) {
        throw InvalidArgument("partition bounds must start at 0 and end at N_y");
    }
    for (std::size_t b = 0; b + 1 < bounds_.size(); ++b) {
        if (bounds_[b + 1] <= bounds_[b]) {
            throw PartitionTooFine("block " + std::to_string(b) + " is empty");
        }
    }
}

RowRange Partition::range(int b) const {
    if (b < 0 || b >= workers()) throw InvalidArgument("worker index out of range");
    return {bounds_[b], bounds_[b + 1]};
}

int Partition::owner_of(int row) const {
    if (row < 0 || row >= rows_) throw InvalidArgument("row outside the image");
    auto it = std::upper_bound(bounds_.begin(), bounds_.end(), row);
    return static_cast<int>(it - bounds_.begin()) - 1;
}

int Partition::min_block() const {
    int m = rows_;
    for (int b = 0; b < workers(); ++b) m = std::min(m, range(b).size());
    return m;
}

int Partition::max_block() const {
    int m = 0;
    for (int b = 0; b < workers(); ++b) m = std::max(m, range(b).size());
    return m;
}

Partition Partition::shifted(int delta) const {
    std::vector<int> bounds = bounds_;
    for (std::size_t b = 1; b + 1 < bounds.size(); ++b) bounds[b] += delta;
    return Partition(rows_, std::move(bounds), halo_);
}

Partition Partition::coarsened(int factor) const {
    if (factor < 1 || rows_ % factor != 0) {
        throw ShapeMismatch("rows " + std::to_string(rows_) + " not divisible by " +
                            std::to_string(factor));
    }
    std::vector<int> bounds = bounds_;
    for (int& v : bounds) {
        if (v % factor != 0) {
            throw ShapeMismatch("partition boundary " + std::to_string(v) +
                                " not aligned to " + std::to_string(factor));
        }
        v /= factor;
    }
    return Partition(rows_ / factor, std::move(bounds), halo_);
}

Partition Partition::refined(int factor) const {
    std::vector<int> bounds = bounds_;
    for (int& v : bounds) v *= factor;
    return Partition(rows_ * factor, std::move(bounds), halo_);
}

Partition Partition::with_halo(int halo) const { return Partition(rows_, bounds_, halo); }

Partition make_partition(int rows, int workers, int halo) {
    if (workers < 1) throw InvalidArgument("worker count must be positive");
    if (rows < 1) throw InvalidArgument("row count must be positive");
    if (workers > rows) {
        throw InvalidArgument(std::to_string(workers) + " workers for " +
                              std::to_string(rows) + " rows");
    }
    if (halo < 0) throw InvalidArgument("negative halo");
    if (rows / workers < halo) {
        throw PartitionTooFine("floor(" + std::to_string(rows) + "/" +
                               std::to_string(workers) + ") < halo " + std::to_string(halo));
    }
    std::vector<int> bounds(workers + 1);
    for (int b = 0; b <= workers; ++b) {
        bounds[b] = static_cast<int>(static_cast<long long>(b) * rows / workers);
    }
    return Partition(rows, std::move(bounds), halo);
}

Partition make_aligned_partition(int rows, int workers, int halo, int align) {
    if (align < 1 || rows % align != 0) {
        throw ShapeMismatch("rows " + std::to_string(rows) + " not divisible by " +
                            std::to_string(align));
    }
    const int coarse_halo = (halo + align - 1) / align;
    return make_partition(rows / align, workers, coarse_halo).refined(align).with_halo(halo);
}

ExtendedPartition extend_partition(const Partition& p) {
    ExtendedPartition ext{p, {}};
    ext.ext_ranges.reserve(p.workers());
    for (int b = 0; b < p.workers(); ++b) {
        const RowRange r = p.range(b);
        ext.ext_ranges.push_back({r.begin, std::min(r.end + p.halo(), p.rows())});
    }
    return ext;
}

BlockTensor::BlockTensor(int owner, Shape global, RowRange range)
    : BlockTensor(owner, global, range, Tensor({global.channels, range.size(), global.cols})) {}

BlockTensor::BlockTensor(int owner, Shape global, RowRange range, Tensor data)
    : owner_(owner), global_(global), range_(range), data_(std::move(data)) {
    if (range.begin < 0 || range.end > global.rows || range.size() < 0) {
        throw ShapeMismatch("block rows outside the global extent");
    }
    const Shape expected{global.channels, range.size(), global.cols};
    if (data_.shape() != expected) throw ShapeMismatch("block data does not match its range");
}

void BlockTensor::invalidate_ghosts() {
    before_ = Ghost{};
    after_ = Ghost{};
}

const double* BlockTensor::row_ptr(int c, int row) const {
    if (row < 0 || row >= global_.rows) return nullptr;
    if (range_.contains(row)) return data_.row(c, row - range_.begin).data();
    if (row < range_.begin) {
        const int k = row - (range_.begin - before_.width());
        if (before_.valid && k >= 0) return before_.rows.row(c, k).data();
    } else {
        const int k = row - range_.end;
        if (after_.valid && k < after_.width()) return after_.rows.row(c, k).data();
    }
    throw InvalidGhost("worker " + std::to_string(owner_) + " read row " +
                       std::to_string(row) + " outside its owned rows and valid ghosts");
}

BlockTensor BlockTensor::like(int channels) const {
    return BlockTensor(owner_, {channels, global_.rows, global_.cols}, range_);
}

Tensor slice_rows(const Tensor& image, RowRange range) {
    Tensor out({image.channels(), range.size(), image.cols()});
    for (int c = 0; c < image.channels(); ++c) {
        for (int i = range.begin; i < range.end; ++i) {
            std::copy_n(image.row(c, i).begin(), image.cols(), out.row(c, i - range.begin).begin());
        }
    }
    return out;
}

std::vector<BlockTensor> scatter_global(const Tensor& image, const Partition& p) {
    if (image.rows() != p.rows()) {
        throw ShapeMismatch("image has " + std::to_string(image.rows()) +
                            " rows, partition expects " + std::to_string(p.rows()));
    }
    std::vector<BlockTensor> blocks;
    blocks.reserve(p.workers());
    for (int b = 0; b < p.workers(); ++b) {
        blocks.emplace_back(b, image.shape(), p.range(b), slice_rows(image, p.range(b)));
    }
    return blocks;
}

Tensor gather_global(const std::vector<BlockTensor>& blocks) {
    if (blocks.empty()) throw ShapeMismatch("no blocks to gather");
    const Shape global = blocks.front().global_shape();
    Tensor out(global);
    int next = 0;
    for (const BlockTensor& blk : blocks) {
        if (blk.global_shape() != global) throw ShapeMismatch("blocks disagree on global shape");
        if (blk.range().begin != next) throw ShapeMismatch("blocks do not tile the rows");
        for (int c = 0; c < global.channels; ++c) {
            for (int i = 0; i < blk.owned_rows(); ++i) {
                std::copy_n(blk.data().row(c, i).begin(), global.cols,
                            out.row(c, blk.range().begin + i).begin());
            }
        }
        next = blk.range().end;
    }
    if (next != global.rows) throw ShapeMismatch("blocks do not cover every row");
    return out;
}

}  // namespace dpnp
