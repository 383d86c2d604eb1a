// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dpnp/linops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dpnp/errors.hpp"
#include "dpnp/noise.hpp"

namespace dpnp {

ConvKernel::ConvKernel(int out_, int in_, int ly_, int lx_)
    : out(out_), in(in_), ly(ly_), lx(lx_), anchor_y((ly_ - 1) / 2), anchor_x((lx_ - 1) / 2) {
    if (out < 1 || in < 1 || ly < 1 || lx < 1) {
        throw InvalidArgument("kernel extents must be positive");
    }
    taps.assign(static_cast<std::size_t>(out) * in * ly * lx, 0.0);
}

ConvKernel ConvKernel::adjoint() const {
    ConvKernel k(in, out, ly, lx);
    k.anchor_y = ly - 1 - anchor_y;
    k.anchor_x = lx - 1 - anchor_x;
    for (int o = 0; o < out; ++o) {
        for (int c = 0; c < in; ++c) {
            for (int a = 0; a < ly; ++a) {
                for (int b = 0; b < lx; ++b) k.at(c, o, ly - 1 - a, lx - 1 - b) = at(o, c, a, b);
            }
        }
    }
    return k;
}

void ConvKernel::validate() const {
    if (out < 1 || in < 1 || ly < 1 || lx < 1) throw InvalidArgument("empty kernel");
    if (taps.size() != static_cast<std::size_t>(out) * in * ly * lx) {
        throw ShapeMismatch("kernel holds " + std::to_string(taps.size()) + " taps");
    }
    if (!bias.empty() && bias.size() != static_cast<std::size_t>(out)) {
        throw ShapeMismatch("bias length does not match output features");
    }
    if (anchor_y < 0 || anchor_y >= ly || anchor_x < 0 || anchor_x >= lx) {
        throw InvalidArgument("kernel anchor outside the kernel");
    }
    for (double v : taps) {
        if (!std::isfinite(v)) throw InvalidArgument("non-finite kernel tap");
    }
    for (double v : bias) {
        if (!std::isfinite(v)) throw InvalidArgument("non-finite bias");
    }
}

ConvKernel make_kernel2d(int ly, int lx, std::vector<double> taps) {
    ConvKernel k(1, 1, ly, lx);
    if (taps.size() != k.taps.size()) throw ShapeMismatch("kernel tap count");
    k.taps = std::move(taps);
    return k;
}

ConvKernel delta_kernel(int channels, int ly, int lx) {
    ConvKernel k(channels, channels, ly, lx);
    for (int c = 0; c < channels; ++c) k.at(c, c, k.anchor_y, k.anchor_x) = 1.0;
    return k;
}

HaloWidths conv_halo(const ConvKernel& k, ConvMode mode) {
    switch (mode) {
        case ConvMode::Down: return {0, k.ly - 1};
        case ConvMode::Up: return {k.ly - 1, 0};
        case ConvMode::Both: return {k.rows_before(), k.rows_after()};
    }
    return {};
}

int conv_shift(const ConvKernel& k, ConvMode mode) {
    switch (mode) {
        case ConvMode::Down: return k.rows_before();
        case ConvMode::Up: return -k.rows_after();
        case ConvMode::Both: return 0;
    }
    return 0;
}

RowRange conv_output_range(RowRange in, int rows, const ConvKernel& k, ConvMode mode) {
    const int s = conv_shift(k, mode);
    return {in.begin == 0 ? 0 : in.begin + s, in.end == rows ? rows : in.end + s};
}

ConvMode opposite(ConvMode mode) {
    switch (mode) {
        case ConvMode::Down: return ConvMode::Up;
        case ConvMode::Up: return ConvMode::Down;
        case ConvMode::Both: return ConvMode::Both;
    }
    return mode;
}

namespace {

// dst holds rows [out.begin, out.end) of one output plane.
void accumulate_plane(double* dst, const BlockTensor& x, int c, const double* w, int ly, int lx,
                      int ay, int ax, RowRange out) {
    const int W = x.cols();
    for (int a = 0; a < ly; ++a) {
        for (int b = 0; b < lx; ++b) {
            const double wv = w[a * lx + b];
            const int dx = b - ax;
            const int jlo = std::max(0, -dx);
            const int jhi = std::min(W, W - dx);
            for (int i = out.begin; i < out.end; ++i) {
                const double* src = x.row_ptr(c, i + a - ay);
                if (!src) continue;
                double* d = dst + static_cast<std::size_t>(i - out.begin) * W;
                for (int j = jlo; j < jhi; ++j) d[j] += wv * src[j + dx];
            }
        }
    }
}

void check_out_range(const BlockTensor& x, RowRange out) {
    if (out.begin < 0 || out.end > x.global_shape().rows || out.size() < 0) {
        throw ShapeMismatch("output rows outside the image");
    }
}

void scale_in_place(Tensor& t, double s) {
    if (s == 1.0) return;
    for (double& v : t.values()) v *= s;
}

}  // namespace

BlockTensor conv_apply(const BlockTensor& x, const ConvKernel& k, RowRange out) {
    if (x.channels() != k.in) {
        throw ChannelMismatch("kernel expects " + std::to_string(k.in) + " channels, got " +
                              std::to_string(x.channels()));
    }
    check_out_range(x, out);
    const Shape g{k.out, x.global_shape().rows, x.cols()};
    BlockTensor y(x.owner(), g, out);
    Tensor& data = y.data();
    for (int o = 0; o < k.out; ++o) {
        double* dst = data.plane(o).data();
        for (int c = 0; c < k.in; ++c) {
            accumulate_plane(dst, x, c, k.plane(o, c), k.ly, k.lx, k.anchor_y, k.anchor_x, out);
        }
        if (k.has_bias()) {
            for (double& v : data.plane(o)) v += k.bias[o];
        }
    }
    return y;
}

BlockTensor conv_apply_depthwise(const BlockTensor& x, const ConvKernel& k, RowRange out) {
    if (k.in != 1 || k.out != 1) throw ChannelMismatch("depthwise stencil must be 1x1 features");
    check_out_range(x, out);
    BlockTensor y(x.owner(), x.global_shape(), out);
    for (int c = 0; c < x.channels(); ++c) {
        double* dst = y.data().plane(c).data();
        accumulate_plane(dst, x, c, k.plane(0, 0), k.ly, k.lx, k.anchor_y, k.anchor_x, out);
        if (k.has_bias()) {
            for (double& v : y.data().plane(c)) v += k.bias[0];
        }
    }
    return y;
}

BlockTensor conv_forward_local(WorkerCtx& ctx, BlockTensor& x, const ConvKernel& k,
                               ConvMode mode) {
    halo_exchange(ctx, x, conv_halo(k, mode));
    return conv_apply(x, k, conv_output_range(x.range(), x.global_shape().rows, k, mode));
}

BlockTensor conv_adjoint_local(WorkerCtx& ctx, BlockTensor& u, const ConvKernel& k,
                               ConvMode mode) {
    ConvKernel adj = k.adjoint();
    return conv_forward_local(ctx, u, adj, opposite(mode));
}

Tensor conv_serial(const Tensor& x, const ConvKernel& k, Padding pad) {
    if (x.channels() != k.in) throw ChannelMismatch("kernel/input channel count");
    if (pad == Padding::Half) {
        BlockTensor blk(0, x.shape(), {0, x.rows()}, x);
        const HaloWidths hw = conv_halo(k, ConvMode::Both);
        blk.ghost_before() = Ghost{Tensor({x.channels(), hw.before, x.cols()}), true};
        blk.ghost_after() = Ghost{Tensor({x.channels(), hw.after, x.cols()}), true};
        return conv_apply(blk, k, {0, x.rows()}).data();
    }
    // Full: every output pixel touched by at least one tap.
    const int H = x.rows() + k.ly - 1;
    const int W = x.cols() + k.lx - 1;
    Tensor y({k.out, H, W});
    for (int o = 0; o < k.out; ++o) {
        for (int i = 0; i < H; ++i) {
            for (int j = 0; j < W; ++j) {
                double acc = 0.0;
                for (int c = 0; c < k.in; ++c) {
                    for (int a = 0; a < k.ly; ++a) {
                        const int si = i + a - (k.ly - 1);
                        if (si < 0 || si >= x.rows()) continue;
                        for (int b = 0; b < k.lx; ++b) {
                            const int sj = j + b - (k.lx - 1);
                            if (sj < 0 || sj >= x.cols()) continue;
                            acc += k.at(o, c, a, b) * x(c, si, sj);
                        }
                    }
                }
                if (k.has_bias()) acc += k.bias[o];
                y(o, i, j) = acc;
            }
        }
    }
    return y;
}

BlockTensor mask_apply(const BlockTensor& x, const Tensor& mask_rows) {
    if (mask_rows.rows() != x.owned_rows() || mask_rows.cols() != x.cols() ||
        (mask_rows.channels() != 1 && mask_rows.channels() != x.channels())) {
        throw ShapeMismatch("mask does not match the block");
    }
    BlockTensor y = x.like(x.channels());
    for (int c = 0; c < x.channels(); ++c) {
        auto src = x.data().plane(c);
        auto m = mask_rows.plane(mask_rows.channels() == 1 ? 0 : c);
        auto dst = y.data().plane(c);
        for (std::size_t p = 0; p < dst.size(); ++p) dst[p] = src[p] * m[p];
    }
    return y;
}

BlockTensor grad2d_apply(const BlockTensor& x) {
    const int C = x.channels();
    const int W = x.cols();
    const int H = x.global_shape().rows;
    const RowRange r = x.range();
    BlockTensor g(x.owner(), {2 * C, H, W}, r);
    for (int c = 0; c < C; ++c) {
        for (int i = r.begin; i < r.end; ++i) {
            const double* cur = x.row_ptr(c, i);
            auto v = g.data().row(c, i - r.begin);
            auto h = g.data().row(C + c, i - r.begin);
            if (i + 1 < H) {
                const double* next = x.row_ptr(c, i + 1);
                for (int j = 0; j < W; ++j) v[j] = next[j] - cur[j];
            }
            for (int j = 0; j + 1 < W; ++j) h[j] = cur[j + 1] - cur[j];
        }
    }
    return g;
}

BlockTensor grad2d_forward(WorkerCtx& ctx, BlockTensor& x) {
    halo_exchange(ctx, x, HaloWidths{0, 1});
    return grad2d_apply(x);
}

BlockTensor grad2d_adjoint(WorkerCtx& ctx, const BlockTensor& g) {
    if (g.channels() % 2 != 0) throw ChannelMismatch("gradient field needs 2C channels");
    const int C = g.channels() / 2;
    const int W = g.cols();
    const int H = g.global_shape().rows;
    const RowRange r = g.range();
    BlockTensor out(g.owner(), {C, H, W}, r);
    Ghost spill{Tensor({C, 1, W}), true};
    for (int c = 0; c < C; ++c) {
        for (int i = r.begin; i < r.end; ++i) {
            auto gv = g.data().row(c, i - r.begin);
            auto gh = g.data().row(C + c, i - r.begin);
            auto dst = out.data().row(c, i - r.begin);
            for (int j = 0; j < W; ++j) {
                double t = 0.0;
                if (j >= 1) t = gh[j - 1];
                if (j + 1 < W) t = t - gh[j];
                if (i + 1 < H) t = t - gv[j];
                dst[j] = t;
            }
            // The +g_v[i] term of row i + 1 comes last in every row's sum.
            if (i >= r.begin + 1) {
                auto prev = g.data().row(c, i - 1 - r.begin);
                for (int j = 0; j < W; ++j) dst[j] += prev[j];
            }
        }
        if (r.end < H && r.size() > 0) {
            auto last = g.data().row(c, r.size() - 1);
            std::copy(last.begin(), last.end(), spill.rows.row(c, 0).begin());
        }
    }
    out.ghost_after() = std::move(spill);
    overlap_add_reduce(ctx, out);
    return out;
}

LocalizedOp LocalizedOp::identity() { return LocalizedOp{}; }

LocalizedOp LocalizedOp::mask(Tensor mask) {
    for (double v : mask.values()) {
        if (v != 0.0 && v != 1.0) throw InvalidArgument("mask entries must be 0 or 1");
    }
    LocalizedOp op;
    op.kind_ = Kind::Mask;
    op.mask_ = std::make_shared<const Tensor>(std::move(mask));
    return op;
}

LocalizedOp LocalizedOp::blur(ConvKernel kernel) {
    kernel.validate();
    if (kernel.in != 1 || kernel.out != 1) throw ChannelMismatch("blur kernel must be 2-D");
    LocalizedOp op;
    op.kind_ = Kind::Conv;
    op.kernel_ = std::make_shared<const ConvKernel>(std::move(kernel));
    return op;
}

LocalizedOp LocalizedOp::grad2d() {
    LocalizedOp op;
    op.kind_ = Kind::Grad2D;
    return op;
}

LocalizedOp LocalizedOp::scaled(double s) const {
    LocalizedOp op = *this;
    op.scale_ *= s;
    return op;
}

int LocalizedOp::out_channels(int in_channels) const {
    return kind_ == Kind::Grad2D ? 2 * in_channels : in_channels;
}

HaloWidths LocalizedOp::forward_halo() const {
    switch (kind_) {
        case Kind::Identity:
        case Kind::Mask: return {0, 0};
        case Kind::Conv: return conv_halo(*kernel_, ConvMode::Both);
        case Kind::Grad2D: return {0, 1};
    }
    return {};
}

HaloWidths LocalizedOp::adjoint_halo() const {
    switch (kind_) {
        case Kind::Identity:
        case Kind::Mask: return {0, 0};
        case Kind::Conv: return conv_halo(kernel_->adjoint(), ConvMode::Both);
        case Kind::Grad2D: return {0, 1};
    }
    return {};
}

BlockTensor LocalizedOp::apply(const BlockTensor& x) const {
    BlockTensor y;
    switch (kind_) {
        case Kind::Identity: y = BlockTensor(x.owner(), x.global_shape(), x.range(), x.data()); break;
        case Kind::Mask: y = mask_apply(x, slice_rows(*mask_, x.range())); break;
        case Kind::Conv: y = conv_apply_depthwise(x, *kernel_, x.range()); break;
        case Kind::Grad2D: y = grad2d_apply(x); break;
    }
    scale_in_place(y.data(), scale_);
    return y;
}

BlockTensor LocalizedOp::forward(WorkerCtx& ctx, BlockTensor& x) const {
    const HaloWidths hw = forward_halo();
    if (hw.before > 0 || hw.after > 0) halo_exchange(ctx, x, hw);
    return apply(x);
}

BlockTensor LocalizedOp::adjoint(WorkerCtx& ctx, BlockTensor& u) const {
    BlockTensor y;
    switch (kind_) {
        case Kind::Identity:
        case Kind::Mask: y = apply(u); return y;  // self-adjoint, scale applied
        case Kind::Conv: {
            const ConvKernel adj = kernel_->adjoint();
            halo_exchange(ctx, u, conv_halo(adj, ConvMode::Both));
            y = conv_apply_depthwise(u, adj, u.range());
            break;
        }
        case Kind::Grad2D: y = grad2d_adjoint(ctx, u); break;
    }
    scale_in_place(y.data(), scale_);
    return y;
}

Tensor LocalizedOp::forward_serial(const Tensor& x) const {
    BlockTensor blk(0, x.shape(), {0, x.rows()}, x);
    const HaloWidths hw = forward_halo();
    blk.ghost_before() = Ghost{Tensor({x.channels(), hw.before, x.cols()}), true};
    blk.ghost_after() = Ghost{Tensor({x.channels(), hw.after, x.cols()}), true};
    return apply(blk).data();
}

double ordered_sum_squares(WorkerCtx& ctx, const BlockTensor& x) {
    return ordered_dot(ctx, x, x);
}

double ordered_dot(WorkerCtx& ctx, const BlockTensor& a, const BlockTensor& b) {
    if (a.data().shape() != b.data().shape() || a.range() != b.range()) {
        throw ShapeMismatch("dot product of differently shaped blocks");
    }
    std::vector<double> rows(a.owned_rows(), 0.0);
    for (int i = 0; i < a.owned_rows(); ++i) {
        double acc = 0.0;
        for (int c = 0; c < a.channels(); ++c) {
            auto ra = a.data().row(c, i);
            auto rb = b.data().row(c, i);
            for (std::size_t j = 0; j < ra.size(); ++j) acc += ra[j] * rb[j];
        }
        rows[i] = acc;
    }
    return ordered_row_sum(ctx, rows);
}

double power_iteration_norm_sq(WorkerCtx& ctx, const Partition& partition, Shape shape,
                               const std::function<BlockTensor(BlockTensor&)>& normal_op,
                               std::uint64_t seed, int max_iter, double tol) {
    const RowRange r = partition.range(ctx.rank());
    BlockTensor v(ctx.rank(), shape, r);
    const NoiseStream init(seed, NoiseTag::PowerInit);
    for (int c = 0; c < shape.channels; ++c) {
        for (int i = r.begin; i < r.end; ++i) {
            for (int j = 0; j < shape.cols; ++j) {
                const std::uint64_t n =
                    (static_cast<std::uint64_t>(c) * shape.rows + i) * shape.cols + j;
                v.data()(c, i - r.begin, j) = init.normal(0, n);
            }
        }
    }
    double nrm = std::sqrt(ordered_sum_squares(ctx, v));
    for (double& e : v.data().values()) e /= nrm;

    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        BlockTensor w = normal_op(v);
        const double next = ordered_dot(ctx, v, w);
        nrm = std::sqrt(ordered_sum_squares(ctx, w));
        if (nrm == 0.0) return 0.0;
        for (double& e : w.data().values()) e /= nrm;
        v = BlockTensor(ctx.rank(), shape, r, std::move(w.data()));
        const bool done = it > 0 && std::abs(next - lambda) <= tol * std::abs(next);
        lambda = next;
        if (done) break;
    }
    return lambda;
}

double op_norm_sq(WorkerCtx& ctx, const Partition& partition, Shape shape,
                  const LocalizedOp& op, std::uint64_t seed) {
    return power_iteration_norm_sq(
        ctx, partition, shape,
        [&](BlockTensor& v) {
            BlockTensor hv = op.forward(ctx, v);
            return op.adjoint(ctx, hv);
        },
        seed);
}

double op_norm_sq(const LocalizedOp& op, Shape shape, std::uint64_t seed) {
    double out = 0.0;
    run_spmd(1, [&](WorkerCtx& ctx) {
        out = op_norm_sq(ctx, make_partition(shape.rows, 1, 0), shape, op, seed);
    });
    return out;
}

BlockTensor grad_gaussian_likelihood(WorkerCtx& ctx, const BlockTensor& x,
                                     const BlockTensor& y, const LocalizedOp& op,
                                     double sigma2) {
    if (!(sigma2 > 0.0)) throw InvalidArgument("noise variance must be positive");
    BlockTensor r = op.apply(x);
    if (r.data().shape() != y.data().shape()) throw ShapeMismatch("observation block shape");
    auto rv = r.data().values();
    auto yv = y.data().values();
    for (std::size_t p = 0; p < rv.size(); ++p) rv[p] = rv[p] - yv[p];
    BlockTensor g = op.adjoint(ctx, r);
    for (double& v : g.data().values()) v /= sigma2;
    return g;
}

double gaussian_data_term(WorkerCtx& ctx, const BlockTensor& x, const BlockTensor& y,
                          const LocalizedOp& op, double sigma2) {
    BlockTensor r = op.apply(x);
    auto rv = r.data().values();
    auto yv = y.data().values();
    for (std::size_t p = 0; p < rv.size(); ++p) rv[p] = yv[p] - rv[p];
    return ordered_sum_squares(ctx, r) / (2.0 * sigma2);
}

void prox_box(std::span<double> x, double lo, double hi) {
    for (double& v : x) v = std::clamp(v, lo, hi);
}

void prox_nonneg(std::span<double> x) {
    for (double& v : x) v = std::max(v, 0.0);
}

void prox_group_l21(Tensor& z, double tau) {
    if (z.channels() % 2 != 0) throw ChannelMismatch("l21 prox needs 2C channels");
    if (tau < 0.0) throw InvalidArgument("negative threshold");
    const int C = z.channels() / 2;
    for (int c = 0; c < C; ++c) {
        auto gv = z.plane(c);
        auto gh = z.plane(C + c);
        for (std::size_t p = 0; p < gv.size(); ++p) {
            const double n = std::sqrt(gv[p] * gv[p] + gh[p] * gh[p]);
            if (n <= tau) {
                gv[p] = 0.0;
                gh[p] = 0.0;
            } else {
                const double s = 1.0 - tau / n;
                gv[p] *= s;
                gh[p] *= s;
            }
        }
    }
}

double prox_kl_poisson(double v, double y, double kappa) {
    if (!(kappa > 0.0)) throw InvalidArgument("KL prox step must be positive");
    if (y < 0.0) throw InvalidArgument("negative count");
    const double d = v - kappa;
    const double root = std::sqrt(d * d + 4.0 * kappa * y);
    // Avoid cancellation when d is large and negative.
    if (d >= 0.0) return 0.5 * (d + root);
    if (y == 0.0) return 0.0;
    return 2.0 * kappa * y / (root - d);
}

void prox_kl_poisson(std::span<double> v, std::span<const double> y, double kappa) {
    if (v.size() != y.size()) throw ShapeMismatch("KL prox operands");
    for (std::size_t p = 0; p < v.size(); ++p) v[p] = prox_kl_poisson(v[p], y[p], kappa);
}

double prox_quadratic(double v, double mu, double s2, double kappa) {
    return (v * s2 + kappa * mu) / (s2 + kappa);
}

}  // namespace dpnp
