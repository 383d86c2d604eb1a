// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

/**
 * @file linops.hpp
 * @brief Localized linear operators on BlockTensors and the proximal toolbox.
 *
 * All convolutions are zero-padded correlations:
 *
 *   out[o, i, j] = sum_c sum_a sum_b w[o, c, a, b] x[c, i + a - ay, j + b - ax] (+ bias[o])
 *
 * with anchor (ay, ax) = ((Ly - 1) / 2, (Lx - 1) / 2) unless set otherwise,
 * so even kernels put their extra tap toward the end of the axis. Per output
 * pixel the terms are accumulated in (c, a, b) order and taps that fall
 * outside the image are skipped, never multiplied by zero. Every worker
 * evaluates each pixel with the same sequence of roundings, which is what
 * makes distributed results bit-identical to serial ones.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "dpnp/comm.hpp"
#include "dpnp/grid.hpp"

namespace dpnp {

struct ConvKernel {
    int out = 0;
    int in = 0;
    int ly = 0;
    int lx = 0;
    int anchor_y = 0;
    int anchor_x = 0;
    std::vector<double> taps;  // (out, in, ly, lx)
    std::vector<double> bias;  // empty or `out` entries

    ConvKernel() = default;
    ConvKernel(int out, int in, int ly, int lx);

    double& at(int o, int c, int a, int b) { return taps[index(o, c, a, b)]; }
    double at(int o, int c, int a, int b) const { return taps[index(o, c, a, b)]; }
    const double* plane(int o, int c) const { return taps.data() + index(o, c, 0, 0); }

    /// Taps before / after the anchor along rows.
    int rows_before() const noexcept { return anchor_y; }
    int rows_after() const noexcept { return ly - 1 - anchor_y; }
    bool has_bias() const noexcept { return !bias.empty(); }
    std::size_t parameter_count() const noexcept { return taps.size() + bias.size(); }

    /// Transpose of the (bias-free) correlation: channels swapped, taps
    /// flipped, anchor mirrored.
    ConvKernel adjoint() const;
    void validate() const;

private:
    std::size_t index(int o, int c, int a, int b) const {
        return ((static_cast<std::size_t>(o) * in + c) * ly + a) * lx + b;
    }
};

/// Single-channel 2-D kernel with unit output/input features.
ConvKernel make_kernel2d(int ly, int lx, std::vector<double> taps);
ConvKernel delta_kernel(int channels, int ly, int lx);

/// Ghost geometry of a convolution. Down: all L_y - 1 extra rows come from
/// the next worker and the output block moves down by rows_before(); Up is
/// the mirror; Both splits the halo around the anchor and keeps the block.
enum class ConvMode { Down, Up, Both };

HaloWidths conv_halo(const ConvKernel& k, ConvMode mode);
int conv_shift(const ConvKernel& k, ConvMode mode);
/// Output rows of a worker owning `in` when the image has `rows` rows.
RowRange conv_output_range(RowRange in, int rows, const ConvKernel& k, ConvMode mode);
ConvMode opposite(ConvMode mode);

/// Output rows `out` of the correlation; x must carry valid ghosts covering
/// every in-image row the stencil touches. Adds bias when present.
BlockTensor conv_apply(const BlockTensor& x, const ConvKernel& k, RowRange out);
/// Same stencil applied to every channel independently (k has in = out = 1).
BlockTensor conv_apply_depthwise(const BlockTensor& x, const ConvKernel& k, RowRange out);

/// Halo exchange followed by conv_apply; output lives on the shifted rows.
BlockTensor conv_forward_local(WorkerCtx& ctx, BlockTensor& x, const ConvKernel& k,
                               ConvMode mode);
/// Adjoint of conv_forward_local (bias ignored): the adjoint kernel applied
/// with the opposite halo direction, which maps the output rows back onto
/// the input rows.
BlockTensor conv_adjoint_local(WorkerCtx& ctx, BlockTensor& u, const ConvKernel& k,
                               ConvMode mode);

enum class Padding { Half, Full };
/// Serial reference path on a whole tensor. Full padding yields
/// (out, N_y + L_y - 1, N_x + L_x - 1).
Tensor conv_serial(const Tensor& x, const ConvKernel& k, Padding pad = Padding::Half);

/// Elementwise product with a (1 or C, rows, cols) mask slice; a single mask
/// channel is shared by all image channels.
BlockTensor mask_apply(const BlockTensor& x, const Tensor& mask_rows);

/// Forward differences stacked as 2C channels: [0, C) vertical
/// x[i+1, j] - x[i, j], [C, 2C) horizontal x[i, j+1] - x[i, j]; zero on the
/// last row / column. Needs one ghost row after the block.
BlockTensor grad2d_apply(const BlockTensor& x);
BlockTensor grad2d_forward(WorkerCtx& ctx, BlockTensor& x);
/// Exact transpose of grad2d_forward. The vertical term that belongs to the
/// first row of the next worker is reduced with overlap_add_reduce.
BlockTensor grad2d_adjoint(WorkerCtx& ctx, const BlockTensor& g);

/// A linear operator with a halo requirement that keeps the row partition
/// (forward and adjoint both map block b to block b).
class LocalizedOp {
public:
    enum class Kind { Identity, Mask, Conv, Grad2D };

    static LocalizedOp identity();
    /// mask: (1 or C, N_y, N_x) global 0/1 tensor.
    static LocalizedOp mask(Tensor mask);
    /// Per-channel blur with a single-channel kernel.
    static LocalizedOp blur(ConvKernel kernel);
    static LocalizedOp grad2d();

    /// Same operator multiplied by s.
    LocalizedOp scaled(double s) const;

    Kind kind() const noexcept { return kind_; }
    double scale() const noexcept { return scale_; }
    const ConvKernel& kernel() const { return *kernel_; }
    const Tensor& mask_tensor() const { return *mask_; }

    int out_channels(int in_channels) const;
    /// Ghost rows the forward stencil reads.
    HaloWidths forward_halo() const;
    HaloWidths adjoint_halo() const;

    /// Forward on a block whose ghosts already cover forward_halo().
    BlockTensor apply(const BlockTensor& x) const;
    BlockTensor forward(WorkerCtx& ctx, BlockTensor& x) const;
    BlockTensor adjoint(WorkerCtx& ctx, BlockTensor& u) const;

    /// Serial reference on whole tensors (used by tests and initialization).
    Tensor forward_serial(const Tensor& x) const;

private:
    Kind kind_ = Kind::Identity;
    double scale_ = 1.0;
    std::shared_ptr<const ConvKernel> kernel_;
    std::shared_ptr<const Tensor> mask_;
};

// --- reductions over distributed tensors (B-invariant) ---

/// Per owned row: sum over channels and columns of f(a) or f(a, b).
double ordered_sum_squares(WorkerCtx& ctx, const BlockTensor& x);
double ordered_dot(WorkerCtx& ctx, const BlockTensor& a, const BlockTensor& b);

/// Largest eigenvalue of A*A by power iteration from a seeded start,
/// i.e. ||A||_2^2. `shape` is the input shape, `partition` the row split of
/// the calling worker.
double power_iteration_norm_sq(WorkerCtx& ctx, const Partition& partition, Shape shape,
                               const std::function<BlockTensor(BlockTensor&)>& normal_op,
                               std::uint64_t seed, int max_iter = 50, double tol = 1e-6);
double op_norm_sq(WorkerCtx& ctx, const Partition& partition, Shape shape,
                  const LocalizedOp& op, std::uint64_t seed);
/// Serial convenience wrapper (one worker).
double op_norm_sq(const LocalizedOp& op, Shape shape, std::uint64_t seed);

// --- gradient of the Gaussian data term ---

/// H*(Hx - y) / sigma2, where Hx is evaluated from the ghosts already in x.
BlockTensor grad_gaussian_likelihood(WorkerCtx& ctx, const BlockTensor& x,
                                     const BlockTensor& y, const LocalizedOp& op,
                                     double sigma2);
/// f1(Hx) = ||y - Hx||^2 / (2 sigma2), summed in row order.
double gaussian_data_term(WorkerCtx& ctx, const BlockTensor& x, const BlockTensor& y,
                          const LocalizedOp& op, double sigma2);

// --- proximal operators (elementwise, in place) ---

void prox_box(std::span<double> x, double lo = 0.0, double hi = 1.0);
void prox_nonneg(std::span<double> x);
/// Per channel c and pixel, g = (z[c], z[C + c]) <- g max(0, 1 - tau / |g|).
void prox_group_l21(Tensor& z, double tau);
/// argmin_u kappa (u - y log u) + (u - v)^2 / 2, u >= 0.
double prox_kl_poisson(double v, double y, double kappa);
void prox_kl_poisson(std::span<double> v, std::span<const double> y, double kappa);
/// argmin_u kappa (u - mu)^2 / (2 s2) + (u - v)^2 / 2.
double prox_quadratic(double v, double mu, double s2, double kappa);

}  // namespace dpnp
