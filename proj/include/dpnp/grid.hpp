// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

/**
 * @file grid.hpp
 * @brief Row decomposition of (C, N_y, N_x) images across workers.
 *
 * Only the N_y axis is split. A Partition stores B + 1 ascending row
 * boundaries; worker b owns rows [bound_b, bound_{b+1}). Operators that need
 * rows owned by a neighbour read them from ghost buffers attached to the
 * worker's BlockTensor.
 *
 * Layer outputs of one-sided halo convolutions live on *shifted* partitions
 * (interior boundaries moved by a few rows), so a Partition is not required
 * to be balanced; only make_partition produces the balanced split.
 */

#pragma once

#include <vector>

#include "dpnp/tensor.hpp"

namespace dpnp {

/// Half-open interval of global rows.
struct RowRange {
    int begin = 0;
    int end = 0;

    int size() const noexcept { return end - begin; }
    bool contains(int row) const noexcept { return row >= begin && row < end; }
    friend bool operator==(const RowRange&, const RowRange&) = default;
};

class Partition {
public:
    Partition() = default;
    /// Arbitrary ordered boundaries; validates coverage of [0, rows) and
    /// non-empty blocks.
    Partition(int rows, std::vector<int> bounds, int halo);

    int rows() const noexcept { return rows_; }
    int workers() const noexcept { return static_cast<int>(bounds_.size()) - 1; }
    int halo() const noexcept { return halo_; }
    const std::vector<int>& bounds() const noexcept { return bounds_; }

    /// Rows owned by worker b (0-based).
    RowRange range(int b) const;
    int owner_of(int row) const;
    int min_block() const;
    int max_block() const;

    /// Interior boundaries moved by delta rows; outer boundaries stay at 0
    /// and rows(). This is the output partition of a one-sided halo stencil.
    Partition shifted(int delta) const;
    /// Partition of a 1/factor downsampled grid. Requires every boundary
    /// (and the row count) to be divisible by factor.
    Partition coarsened(int factor) const;
    /// Inverse of coarsened().
    Partition refined(int factor) const;
    Partition with_halo(int halo) const;

    friend bool operator==(const Partition&, const Partition&) = default;

private:
    int rows_ = 0;
    std::vector<int> bounds_;
    int halo_ = 0;
};

/// Balanced split: worker b owns [floor(b N_y / B), floor((b+1) N_y / B)).
/// Throws InvalidArgument if B < 1 or B > N_y, PartitionTooFine if
/// floor(N_y / B) < halo.
Partition make_partition(int rows, int workers, int halo);

/// Balanced split whose boundaries are multiples of `align` (needed by
/// resampling layers). rows must be divisible by align.
Partition make_aligned_partition(int rows, int workers, int halo, int align);

struct ExtendedPartition {
    Partition base;
    /// ext_b = [start_b, min(end_b + halo, rows))
    std::vector<RowRange> ext_ranges;
};

ExtendedPartition extend_partition(const Partition& p);

/// Rows received from a neighbour. Ghost rows that fall outside the image
/// are stored as zeros but are never read by the stencils.
struct Ghost {
    Tensor rows;
    bool valid = false;

    int width() const noexcept { return rows.rows(); }
};

/// One worker's slab of a global (C, N_y, N_x) tensor plus ghost rows.
class BlockTensor {
public:
    BlockTensor() = default;
    BlockTensor(int owner, Shape global, RowRange range);
    BlockTensor(int owner, Shape global, RowRange range, Tensor data);

    int owner() const noexcept { return owner_; }
    const Shape& global_shape() const noexcept { return global_; }
    int channels() const noexcept { return global_.channels; }
    int cols() const noexcept { return global_.cols; }
    RowRange range() const noexcept { return range_; }
    int owned_rows() const noexcept { return range_.size(); }

    Tensor& data() noexcept { return data_; }
    const Tensor& data() const noexcept { return data_; }

    Ghost& ghost_before() noexcept { return before_; }
    const Ghost& ghost_before() const noexcept { return before_; }
    Ghost& ghost_after() noexcept { return after_; }
    const Ghost& ghost_after() const noexcept { return after_; }
    void invalidate_ghosts();

    /// Global row of channel c from owned data or a valid ghost; nullptr
    /// for rows outside [0, N_y). Throws InvalidGhost for any other row.
    const double* row_ptr(int c, int row) const;

    /// Same geometry, zero data, no ghosts.
    BlockTensor like(int channels) const;

private:
    int owner_ = 0;
    Shape global_{};
    RowRange range_{};
    Tensor data_;
    Ghost before_;
    Ghost after_;
};

std::vector<BlockTensor> scatter_global(const Tensor& image, const Partition& p);
Tensor gather_global(const std::vector<BlockTensor>& blocks);

/// Copy of the rows of a global tensor that fall into `range`.
Tensor slice_rows(const Tensor& image, RowRange range);

}  // namespace dpnp
