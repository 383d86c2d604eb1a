// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dpnp/denoiser.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dpnp/errors.hpp"
#include "dpnp/metrics_io.hpp"
#include "dpnp/noise.hpp"

namespace dpnp {

std::string family_name(Family f) {
    switch (f) {
        case Family::DnCNN: return "dncnn";
        case Family::DDFB: return "ddfb";
        case Family::DRUNet: return "drunet";
    }
    return "unknown";
}

Family parse_family(const std::string& name) {
    std::string s = name;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "dncnn") return Family::DnCNN;
    if (s == "ddfb") return Family::DDFB;
    if (s == "drunet") return Family::DRUNet;
    throw InvalidArgument("unknown denoiser family '" + name + "'");
}

double default_lipschitz_bound(Family f) {
    switch (f) {
        case Family::DDFB: return 2.0;
        case Family::DnCNN: return 3.0;
        case Family::DRUNet: return 7.0;
    }
    return 1.0;
}

std::size_t DenoiserGraph::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.kernel.parameter_count();
    return n;
}

int DenoiserGraph::row_alignment() const {
    return family == Family::DRUNet ? (1 << hyper.I) : 1;
}

int DenoiserGraph::halo() const {
    int h = 0;
    for (const auto& l : layers) {
        if (l.type == LayerType::Conv) h = std::max(h, l.kernel.ly - 1);
    }
    return h;
}

int DenoiserGraph::min_block_rows() const {
    return std::max(1, halo()) * row_alignment();
}

int DenoiserGraph::comm_phases() const {
    int n = 0;
    for (const auto& in : program) {
        if (in.op == Instr::Op::Conv && layers[in.layer].kernel.ly > 1) ++n;
    }
    return n;
}

// --- layouts ---

namespace {

WeightLayer make_layer(LayerType type, int out, int in, int l, bool bias) {
    WeightLayer w{type, ConvKernel(out, in, l, l)};
    if (type != LayerType::Conv) {
        w.kernel.anchor_y = 0;
        w.kernel.anchor_x = 0;
    }
    if (bias) w.kernel.bias.assign(out, 0.0);
    return w;
}

void require_positive(std::initializer_list<int> values, const char* what) {
    for (int v : values) {
        if (v < 1) throw InvalidArgument(std::string(what) + " hyperparameters must be positive");
    }
}

}  // namespace

std::vector<WeightLayer> dncnn_layout(int K, int P, int C) {
    require_positive({K, P, C}, "DnCNN");
    if (K < 2) throw InvalidArgument("DnCNN needs at least two layers");
    std::vector<WeightLayer> layers;
    for (int k = 0; k < K; ++k) {
        const int in = k == 0 ? C : P;
        const int out = k == K - 1 ? C : P;
        layers.push_back(make_layer(LayerType::Conv, out, in, 3, true));
    }
    return layers;
}

std::vector<WeightLayer> ddfb_layout(int K, int P, int C) {
    require_positive({K, P, C}, "DDFB");
    std::vector<WeightLayer> layers;
    for (int k = 0; k < K; ++k) layers.push_back(make_layer(LayerType::Conv, P, C, 3, false));
    return layers;
}

std::vector<WeightLayer> drunet_layout(int I, int J, int P, int C) {
    require_positive({I, J, P, C}, "DRUNet");
    std::vector<WeightLayer> layers;
    auto res = [&](int ch) {
        for (int j = 0; j < 2 * J; ++j) layers.push_back(make_layer(LayerType::Conv, ch, ch, 3, false));
    };
    layers.push_back(make_layer(LayerType::Conv, P, C + 1, 3, false));
    for (int l = 0; l < I; ++l) {
        res(P << l);
        layers.push_back(make_layer(LayerType::Down, P << (l + 1), P << l, 2, false));
    }
    res(P << I);
    for (int l = I - 1; l >= 0; --l) {
        layers.push_back(make_layer(LayerType::Up, P << l, P << (l + 1), 2, false));
        res(P << l);
    }
    layers.push_back(make_layer(LayerType::Conv, C, P, 3, false));
    return layers;
}

void randomize_weights(std::vector<WeightLayer>& layers, std::uint64_t seed, bool biases) {
    const NoiseStream stream(seed, NoiseTag::Weights);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        ConvKernel& k = layers[l].kernel;
        const double a = 1.0 / std::sqrt(static_cast<double>(k.in) * k.ly * k.lx);
        auto draw = [&](std::uint64_t n) {
            const double u = 2.0 * stream.uniform(l, n) - 1.0;
            return static_cast<double>(static_cast<float>(a * u));
        };
        for (std::size_t n = 0; n < k.taps.size(); ++n) k.taps[n] = draw(n);
        if (biases && k.has_bias()) {
            for (std::size_t n = 0; n < k.bias.size(); ++n) k.bias[n] = draw(k.taps.size() + n);
        } else {
            std::fill(k.bias.begin(), k.bias.end(), 0.0);
        }
    }
}

std::vector<double> ddfb_safe_steps(const std::vector<WeightLayer>& layers) {
    std::vector<double> gammas;
    for (const auto& l : layers) {
        const ConvKernel& k = l.kernel;
        double bound = 0.0;
        for (int a = 0; a < k.ly; ++a) {
            for (int b = 0; b < k.lx; ++b) {
                double fro = 0.0;
                for (int o = 0; o < k.out; ++o) {
                    for (int c = 0; c < k.in; ++c) fro += k.at(o, c, a, b) * k.at(o, c, a, b);
                }
                bound += std::sqrt(fro);
            }
        }
        gammas.push_back(bound > 0.0 ? static_cast<double>(static_cast<float>(1.0 / (bound * bound)))
                                     : 1.0);
    }
    return gammas;
}

// --- program construction ---

namespace {

void check_layers(const std::vector<WeightLayer>& got, const std::vector<WeightLayer>& want) {
    if (got.size() != want.size()) {
        throw ArchitectureMismatch("expected " + std::to_string(want.size()) + " layers, got " +
                                   std::to_string(got.size()) + " (layer " +
                                   std::to_string(std::min(got.size(), want.size())) + ")");
    }
    for (std::size_t i = 0; i < got.size(); ++i) {
        const ConvKernel& g = got[i].kernel;
        const ConvKernel& w = want[i].kernel;
        auto dims = [](const ConvKernel& k) {
            return "(" + std::to_string(k.out) + "," + std::to_string(k.in) + "," +
                   std::to_string(k.ly) + "," + std::to_string(k.lx) + ")";
        };
        if (got[i].type != want[i].type || g.out != w.out || g.in != w.in || g.ly != w.ly ||
            g.lx != w.lx) {
            throw ArchitectureMismatch("layer " + std::to_string(i) + ": expected " + dims(w) +
                                       ", got " + dims(g));
        }
        if (g.taps.size() != w.taps.size()) {
            throw ArchitectureMismatch("layer " + std::to_string(i) + ": tap count");
        }
        if (g.has_bias() != w.has_bias()) {
            throw ArchitectureMismatch("layer " + std::to_string(i) +
                                       (w.has_bias() ? ": bias missing" : ": unexpected bias"));
        }
        if (g.anchor_y != w.anchor_y || g.anchor_x != w.anchor_x) {
            throw ArchitectureMismatch("layer " + std::to_string(i) + ": kernel anchor");
        }
        try {
            g.validate();
        } catch (const Error& e) {
            throw ArchitectureMismatch("layer " + std::to_string(i) + ": " + e.what());
        }
    }
}

class ProgramBuilder {
public:
    explicit ProgramBuilder(DenoiserGraph& g) : g_(g), live_{true} {
        g_.adjoints.assign(g_.layers.size(), ConvKernel{});
    }

    int fresh() {
        for (std::size_t r = 0; r < live_.size(); ++r) {
            if (!live_[r]) {
                live_[r] = true;
                return static_cast<int>(r);
            }
        }
        live_.push_back(true);
        return static_cast<int>(live_.size()) - 1;
    }

    void release(int r) {
        live_[r] = false;
        Instr in;
        in.op = Instr::Op::Release;
        in.a = r;
        g_.program.push_back(in);
    }

    // Alternating direction unless `both`.
    int conv(int src, int layer, bool adjoint = false, bool both = false) {
        Instr in;
        in.op = Instr::Op::Conv;
        in.a = src;
        in.layer = layer;
        in.adjoint = adjoint;
        if (both) {
            in.mode = ConvMode::Both;
        } else {
            in.mode = (turn_++ % 2 == 0) ? ConvMode::Down : ConvMode::Up;
        }
        if (adjoint) g_.adjoints[layer] = g_.layers[layer].kernel.adjoint();
        in.dst = fresh();
        g_.program.push_back(in);
        return in.dst;
    }

    int resample(Instr::Op op, int src, int layer) {
        Instr in;
        in.op = op;
        in.a = src;
        in.layer = layer;
        in.dst = fresh();
        g_.program.push_back(in);
        return in.dst;
    }

    void unary(Instr::Op op, int reg, double s = 0.0) {
        Instr in;
        in.op = op;
        in.dst = reg;
        in.a = reg;
        in.s = s;
        g_.program.push_back(in);
    }

    // dst = a + s b
    int axpy(int a, int b, double s) {
        Instr in;
        in.op = Instr::Op::Axpy;
        in.a = a;
        in.b = b;
        in.s = s;
        in.dst = fresh();
        g_.program.push_back(in);
        return in.dst;
    }

    int concat(int src, double value) {
        Instr in;
        in.op = Instr::Op::Concat;
        in.a = src;
        in.s = value;
        in.dst = fresh();
        g_.program.push_back(in);
        return in.dst;
    }

    void finish(int out) {
        g_.output = out;
        g_.registers = static_cast<int>(live_.size());
    }

private:
    DenoiserGraph& g_;
    std::vector<bool> live_;
    int turn_ = 0;
};

}  // namespace

DenoiserGraph build_dncnn(int K, int P, int C, std::vector<WeightLayer> weights) {
    check_layers(weights, dncnn_layout(K, P, C));
    DenoiserGraph g;
    g.family = Family::DnCNN;
    g.hyper = {K, 0, 0, P, C};
    g.lipschitz_bound = default_lipschitz_bound(g.family);
    g.layers = std::move(weights);
    ProgramBuilder b(g);
    int h = 0;
    for (int k = 0; k < K; ++k) {
        // An odd number of alternating layers would leave the output on
        // shifted rows; the last layer then reads both neighbours instead.
        const bool both = (K % 2 == 1) && k == K - 1;
        const int next = b.conv(h, k, false, both);
        if (h != 0) b.release(h);
        h = next;
        if (k < K - 1) b.unary(Instr::Op::ReLU, h);
    }
    const int out = b.axpy(0, h, -1.0);
    b.release(h);
    b.finish(out);
    return g;
}

DenoiserGraph build_ddfb(int K, int P, int C, std::vector<WeightLayer> weights,
                         std::vector<double> gammas, double eps) {
    check_layers(weights, ddfb_layout(K, P, C));
    if (gammas.size() != static_cast<std::size_t>(K)) {
        throw ArchitectureMismatch("DDFB needs " + std::to_string(K) + " step sizes, got " +
                                   std::to_string(gammas.size()));
    }
    for (std::size_t k = 0; k < gammas.size(); ++k) {
        if (!(gammas[k] > 0.0) || !std::isfinite(gammas[k])) {
            throw ArchitectureMismatch("layer " + std::to_string(k) + ": step size must be positive");
        }
    }
    if (!(eps > 0.0)) throw InvalidArgument("DDFB hard-tanh bound must be positive");
    DenoiserGraph g;
    g.family = Family::DDFB;
    g.hyper = {K, 0, 0, P, C};
    g.eps = eps;
    g.gammas = std::move(gammas);
    g.lipschitz_bound = default_lipschitz_bound(g.family);
    g.layers = std::move(weights);
    ProgramBuilder b(g);
    // u = W_K v
    int u = b.conv(0, K - 1);
    for (int k = 0; k < K - 1; ++k) {
        // r = proj(v - W_k* u);  u = HT(u + gamma_k W_k r)
        const int t = b.conv(u, k, true);
        const int r = b.axpy(0, t, -1.0);
        b.release(t);
        b.unary(Instr::Op::BoxProj, r);
        const int wr = b.conv(r, k);
        b.release(r);
        const int nu = b.axpy(u, wr, g.gammas[k]);
        b.release(wr);
        b.release(u);
        b.unary(Instr::Op::HardTanh, nu, eps);
        u = nu;
    }
    const int t = b.conv(u, K - 1, true);
    b.release(u);
    const int out = b.axpy(0, t, -g.gammas[K - 1]);
    b.release(t);
    b.unary(Instr::Op::BoxProj, out);
    b.finish(out);
    return g;
}

DenoiserGraph build_drunet(int I, int J, int P, int C, std::vector<WeightLayer> weights,
                           double eps) {
    check_layers(weights, drunet_layout(I, J, P, C));
    if (eps < 0.0) throw InvalidArgument("DRUNet noise level must be nonnegative");
    DenoiserGraph g;
    g.family = Family::DRUNet;
    g.hyper = {0, I, J, P, C};
    g.eps = eps;
    g.lipschitz_bound = default_lipschitz_bound(g.family);
    g.layers = std::move(weights);
    ProgramBuilder b(g);
    int layer = 0;

    // J residual blocks h <- h + W2 ReLU(W1 h); the input register survives.
    auto residual = [&](int h, bool consume) {
        int cur = h;
        for (int j = 0; j < J; ++j) {
            const int t = b.conv(cur, layer++);
            b.unary(Instr::Op::ReLU, t);
            const int t2 = b.conv(t, layer++);
            b.release(t);
            const int next = b.axpy(t2, cur, 1.0);
            b.release(t2);
            if (cur != h || consume) b.release(cur);
            cur = next;
        }
        return cur;
    };

    const int head_in = b.concat(0, eps);
    const int v2 = b.conv(head_in, layer++, false, true);
    b.release(head_in);
    std::vector<int> skips{v2};
    int cur = v2;
    for (int l = 0; l < I; ++l) {
        const int r = residual(cur, false);
        const int d = b.resample(Instr::Op::Down, r, layer++);
        b.release(r);
        skips.push_back(d);
        cur = d;
    }
    int m = residual(cur, false);
    for (int l = I; l >= 1; --l) {
        const int s = b.axpy(m, skips[l], 1.0);
        b.release(m);
        b.release(skips[l]);
        const int u = b.resample(Instr::Op::Up, s, layer++);
        b.release(s);
        m = residual(u, true);
    }
    const int s = b.axpy(m, skips[0], 1.0);
    b.release(m);
    b.release(skips[0]);
    const int out = b.conv(s, layer++, false, true);
    b.release(s);
    b.finish(out);
    return g;
}

DenoiserGraph random_dncnn(int K, int P, int C, std::uint64_t seed) {
    auto layers = dncnn_layout(K, P, C);
    randomize_weights(layers, seed, true);
    return build_dncnn(K, P, C, std::move(layers));
}

DenoiserGraph random_ddfb(int K, int P, int C, double eps, std::uint64_t seed) {
    auto layers = ddfb_layout(K, P, C);
    randomize_weights(layers, seed, false);
    auto gammas = ddfb_safe_steps(layers);
    for (double& g : gammas) g = static_cast<float>(g);
    return build_ddfb(K, P, C, std::move(layers), std::move(gammas), static_cast<float>(eps));
}

DenoiserGraph random_drunet(int I, int J, int P, int C, double eps, std::uint64_t seed) {
    auto layers = drunet_layout(I, J, P, C);
    randomize_weights(layers, seed, false);
    return build_drunet(I, J, P, C, std::move(layers), static_cast<float>(eps));
}

Partition denoiser_partition(const DenoiserGraph& g, int rows, int workers, int extra_halo) {
    const int align = g.row_alignment();
    const int halo = std::max(g.min_block_rows(), extra_halo);
    return make_aligned_partition(rows, workers, halo, align);
}

// --- evaluation ---

namespace {

BlockTensor downsample(const BlockTensor& x, const ConvKernel& k) {
    const Shape gs = x.global_shape();
    const RowRange r = x.range();
    if (gs.rows % 2 || gs.cols % 2 || r.begin % 2 || r.end % 2) {
        throw ShapeMismatch("downsampling needs even image sides and block boundaries, got rows [" +
                            std::to_string(r.begin) + "," + std::to_string(r.end) + ") of " +
                            std::to_string(gs.rows) + "x" + std::to_string(gs.cols));
    }
    if (x.channels() != k.in) throw ChannelMismatch("downsampling input channels");
    const RowRange out{r.begin / 2, r.end / 2};
    const int Wo = gs.cols / 2;
    BlockTensor y(x.owner(), {k.out, gs.rows / 2, Wo}, out);
    for (int o = 0; o < k.out; ++o) {
        for (int c = 0; c < k.in; ++c) {
            for (int a = 0; a < 2; ++a) {
                for (int bb = 0; bb < 2; ++bb) {
                    const double w = k.at(o, c, a, bb);
                    for (int i = 0; i < out.size(); ++i) {
                        auto src = x.data().row(c, 2 * i + a);
                        auto dst = y.data().row(o, i);
                        for (int j = 0; j < Wo; ++j) dst[j] += w * src[2 * j + bb];
                    }
                }
            }
        }
    }
    return y;
}

BlockTensor upsample(const BlockTensor& u, const ConvKernel& k) {
    const Shape gs = u.global_shape();
    const RowRange r = u.range();
    if (u.channels() != k.in) throw ChannelMismatch("upsampling input channels");
    const RowRange out{2 * r.begin, 2 * r.end};
    BlockTensor y(u.owner(), {k.out, 2 * gs.rows, 2 * gs.cols}, out);
    for (int o = 0; o < k.out; ++o) {
        for (int c = 0; c < k.in; ++c) {
            for (int a = 0; a < 2; ++a) {
                for (int bb = 0; bb < 2; ++bb) {
                    const double w = k.at(o, c, a, bb);
                    for (int i = 0; i < r.size(); ++i) {
                        auto src = u.data().row(c, i);
                        auto dst = y.data().row(o, 2 * i + a);
                        for (int j = 0; j < gs.cols; ++j) dst[2 * j + bb] += w * src[j];
                    }
                }
            }
        }
    }
    return y;
}

BlockTensor axpy(const BlockTensor& a, const BlockTensor& b, double s) {
    if (a.range() != b.range() || a.data().shape() != b.data().shape()) {
        throw ShapeMismatch("operands of a skip connection live on different rows");
    }
    BlockTensor y = a.like(a.channels());
    auto av = a.data().values();
    auto bv = b.data().values();
    auto yv = y.data().values();
    for (std::size_t p = 0; p < yv.size(); ++p) yv[p] = av[p] + s * bv[p];
    return y;
}

}  // namespace

namespace {

void check_input(const DenoiserGraph& g, const Shape& s) {
    if (s.channels != g.channels()) {
        throw ChannelMismatch("denoiser expects " + std::to_string(g.channels()) +
                              " channels, got " + std::to_string(s.channels));
    }
    const int align = g.row_alignment();
    if (s.rows % align || s.cols % align) {
        throw ShapeMismatch("image sides must be divisible by " + std::to_string(align));
    }
}

}  // namespace

BlockTensor apply_denoiser(WorkerCtx& ctx, const DenoiserGraph& g, const BlockTensor& x) {
    check_input(g, x.global_shape());
    std::vector<BlockTensor> r(g.registers);
    r[0] = BlockTensor(x.owner(), x.global_shape(), x.range(), x.data());
    for (const Instr& in : g.program) {
        switch (in.op) {
            case Instr::Op::Conv: {
                const ConvKernel& k = in.adjoint ? g.adjoints[in.layer] : g.layers[in.layer].kernel;
                BlockTensor y = conv_forward_local(ctx, r[in.a], k, in.mode);
                r[in.dst] = std::move(y);
                break;
            }
            case Instr::Op::Down: r[in.dst] = downsample(r[in.a], g.layers[in.layer].kernel); break;
            case Instr::Op::Up: r[in.dst] = upsample(r[in.a], g.layers[in.layer].kernel); break;
            case Instr::Op::ReLU:
                for (double& v : r[in.dst].data().values()) v = v > 0.0 ? v : 0.0;
                break;
            case Instr::Op::HardTanh:
                for (double& v : r[in.dst].data().values()) v = std::clamp(v, -in.s, in.s);
                break;
            case Instr::Op::BoxProj: prox_box(r[in.dst].data().values()); break;
            case Instr::Op::Axpy: r[in.dst] = axpy(r[in.a], r[in.b], in.s); break;
            case Instr::Op::Concat: {
                const BlockTensor& src = r[in.a];
                const int C = src.channels();
                BlockTensor y = src.like(C + 1);
                for (int c = 0; c < C; ++c) {
                    std::copy(src.data().plane(c).begin(), src.data().plane(c).end(),
                              y.data().plane(c).begin());
                }
                std::fill(y.data().plane(C).begin(), y.data().plane(C).end(), in.s);
                r[in.dst] = std::move(y);
                break;
            }
            case Instr::Op::Release: r[in.a] = BlockTensor{}; break;
        }
    }
    BlockTensor out = std::move(r[g.output]);
    out.invalidate_ghosts();
    if (out.range() != x.range()) throw ShapeMismatch("denoiser output rows differ from input rows");
    return out;
}

Tensor apply_denoiser_distributed(const DenoiserGraph& g, const Tensor& x, int workers,
                                  SpmdStats* stats) {
    check_input(g, x.shape());
    const Partition p = denoiser_partition(g, x.rows(), workers);
    auto blocks = scatter_global(x, p);
    std::vector<BlockTensor> out(workers);
    run_spmd(
        workers,
        [&](WorkerCtx& ctx) { out[ctx.rank()] = apply_denoiser(ctx, g, blocks[ctx.rank()]); },
        stats);
    return gather_global(out);
}

Tensor apply_denoiser_serial(const DenoiserGraph& g, const Tensor& x) {
    return apply_denoiser_distributed(g, x, 1);
}

void validate_ddfb_steps(const DenoiserGraph& g) {
    if (g.family != Family::DDFB) return;
    const Shape shape{g.hyper.C, 16, 16};
    for (std::size_t k = 0; k < g.layers.size(); ++k) {
        const ConvKernel& w = g.layers[k].kernel;
        double norm_sq = 0.0;
        run_spmd(1, [&](WorkerCtx& ctx) {
            const Partition p = make_partition(shape.rows, 1, 0);
            norm_sq = power_iteration_norm_sq(
                ctx, p, shape,
                [&](BlockTensor& v) {
                    BlockTensor wv = conv_forward_local(ctx, v, w, ConvMode::Both);
                    return conv_adjoint_local(ctx, wv, w, ConvMode::Both);
                },
                k + 1, 200, 1e-10);
        });
        const double gamma = g.gammas[k];
        if (!(gamma > 0.0) || gamma * norm_sq >= 2.0) {
            std::ostringstream msg;
            msg << "layer " << k << ": step " << gamma << " outside (0, 2/||W||^2 = "
                << 2.0 / norm_sq << ")";
            throw ArchitectureMismatch(msg.str());
        }
    }
}

// --- Lipschitz estimation ---

namespace {

double norm2(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

}  // namespace

double estimate_lipschitz(const std::function<Tensor(const Tensor&)>& denoise, Shape shape,
                          int trials, std::uint64_t seed, int refine_iters) {
    if (trials < 1) throw InvalidArgument("at least one trial is needed");
    const NoiseStream stream(seed, NoiseTag::Lipschitz);
    const double h = 1e-3 * std::sqrt(static_cast<double>(shape.size()));
    auto residual = [&](const Tensor& x) {
        Tensor d = denoise(x);
        Tensor r(x.shape());
        for (std::size_t p = 0; p < r.size(); ++p) r.values()[p] = x.values()[p] - d.values()[p];
        return r;
    };
    double best = 0.0;
    for (int t = 0; t < trials; ++t) {
        Tensor x(shape);
        Tensor delta(shape);
        for (std::size_t n = 0; n < x.size(); ++n) {
            x.values()[n] = stream.uniform(2 * t, n);
            delta.values()[n] = stream.normal(2 * t + 1, n);
        }
        const Tensor fx = residual(x);
        for (int it = 0; it <= refine_iters; ++it) {
            const double dn = norm2(delta.values());
            if (dn == 0.0) break;
            for (double& v : delta.values()) v *= h / dn;
            Tensor xp = x;
            for (std::size_t n = 0; n < xp.size(); ++n) xp.values()[n] += delta.values()[n];
            const Tensor fxp = residual(xp);
            Tensor diff(shape);
            for (std::size_t n = 0; n < diff.size(); ++n) {
                diff.values()[n] = fxp.values()[n] - fx.values()[n];
            }
            best = std::max(best, norm2(diff.values()) / norm2(delta.values()));
            delta = std::move(diff);
        }
    }
    return best;
}

double estimate_lipschitz(const DenoiserGraph& g, Shape shape, int trials, std::uint64_t seed) {
    return estimate_lipschitz([&](const Tensor& x) { return apply_denoiser_serial(g, x); }, shape,
                              trials, seed);
}

double estimate_lipschitz(const DenoiserGraph& g, int trials, std::uint64_t seed) {
    const int side = std::max(16, 2 * g.row_alignment());
    return estimate_lipschitz(g, Shape{g.channels(), side, side}, trials, seed);
}

// --- cost model ---

CostReport cost_model(const DenoiserGraph& g, Shape shape, int workers) {
    if (shape.channels != g.channels()) throw ChannelMismatch("cost model shape channels");
    const Partition p = denoiser_partition(g, shape.rows, workers);
    struct RegInfo {
        int channels = 0;
        int level = 0;
    };
    std::vector<RegInfo> regs(g.registers);
    regs[0] = {shape.channels, 0};
    const double rows0 = p.max_block();
    auto pixels = [&](int level) {
        return (rows0 / (1 << level)) * static_cast<double>(shape.cols >> level);
    };
    CostReport rep;
    rep.prior = family_name(g.family);
    double msg_total = 0.0;
    for (const Instr& in : g.program) {
        switch (in.op) {
            case Instr::Op::Conv: {
                const ConvKernel& k = in.adjoint ? g.adjoints[in.layer] : g.layers[in.layer].kernel;
                const RegInfo src = regs[in.a];
                rep.flops_per_worker += 2.0 * k.out * k.in * k.ly * k.lx * pixels(src.level);
                if (k.has_bias()) rep.flops_per_worker += k.out * pixels(src.level);
                if (workers > 1 && k.ly > 1) {
                    rep.comm_phases += 1;
                    msg_total += static_cast<double>(k.ly - 1) * k.in * (shape.cols >> src.level);
                }
                regs[in.dst] = {k.out, src.level};
                break;
            }
            case Instr::Op::Down:
            case Instr::Op::Up: {
                const ConvKernel& k = g.layers[in.layer].kernel;
                const RegInfo src = regs[in.a];
                const int level = in.op == Instr::Op::Down ? src.level + 1 : src.level - 1;
                const double in_pixels = in.op == Instr::Op::Down ? pixels(level) : pixels(src.level);
                rep.flops_per_worker += 2.0 * k.out * k.in * 4 * in_pixels;
                regs[in.dst] = {k.out, level};
                break;
            }
            case Instr::Op::ReLU:
            case Instr::Op::HardTanh:
            case Instr::Op::BoxProj:
                rep.flops_per_worker += regs[in.dst].channels * pixels(regs[in.dst].level);
                break;
            case Instr::Op::Axpy: {
                const RegInfo src = regs[in.a];
                rep.flops_per_worker += (in.s == 1.0 ? 1.0 : 2.0) * src.channels * pixels(src.level);
                regs[in.dst] = src;
                break;
            }
            case Instr::Op::Concat:
                regs[in.dst] = {regs[in.a].channels + 1, regs[in.a].level};
                break;
            case Instr::Op::Release: break;
        }
    }
    rep.message_elems = rep.comm_phases > 0 ? msg_total / rep.comm_phases : 0.0;
    return rep;
}

CostReport cost_model_tv(Shape shape, int workers) {
    const Partition p = make_partition(shape.rows, workers, 1);
    CostReport rep;
    rep.prior = "tv";
    // One subtraction per direction, channel and pixel.
    rep.flops_per_worker = 2.0 * shape.channels * p.max_block() * static_cast<double>(shape.cols);
    if (workers > 1) {
        rep.comm_phases = 1;
        rep.message_elems = static_cast<double>(shape.channels) * shape.cols;
    }
    return rep;
}

// --- PNPW weight files ---

namespace {

constexpr char kMagic[4] = {'P', 'N', 'P', 'W'};
constexpr std::uint32_t kVersion = 1;

class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int s = 0; s < 32; s += 8) bytes_.push_back(static_cast<std::uint8_t>(v >> s));
    }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::size_t offset() const noexcept { return pos_; }
    bool done() const noexcept { return pos_ == bytes_.size(); }

    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) {
            throw FormatError("truncated " + std::string(what) + " at byte " +
                              std::to_string(pos_));
        }
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return bytes_[pos_++];
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int s = 0; s < 4; ++s) v |= static_cast<std::uint32_t>(bytes_[pos_ + s]) << (8 * s);
        pos_ += 4;
        return v;
    }
    double f32(const char* what) {
        return static_cast<double>(std::bit_cast<float>(u32(what)));
    }
    [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
        throw FormatError(msg + " at byte " + std::to_string(at));
    }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

int checked_dim(ByteReader& r, const char* what, std::uint32_t limit = 1u << 20) {
    const std::size_t at = r.offset();
    const std::uint32_t v = r.u32(what);
    if (v == 0 || v > limit) r.fail(std::string("invalid ") + what + " " + std::to_string(v), at);
    return static_cast<int>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_weights(const DenoiserGraph& g) {
    ByteWriter w;
    w.raw(kMagic, 4);
    w.u32(kVersion);
    w.u8(static_cast<std::uint8_t>(g.family));
    if (g.family == Family::DRUNet) {
        w.u32(g.hyper.I);
        w.u32(g.hyper.J);
        w.u32(g.hyper.P);
        w.u32(g.hyper.C);
        w.f32(g.eps);
    } else {
        w.u32(g.hyper.K);
        w.u32(g.hyper.P);
        w.u32(g.hyper.C);
        w.f32(g.eps);
        if (g.family == Family::DDFB) {
            for (double gamma : g.gammas) w.f32(gamma);
        }
    }
    w.u32(static_cast<std::uint32_t>(g.layers.size()));
    for (const auto& l : g.layers) {
        const ConvKernel& k = l.kernel;
        w.u8(static_cast<std::uint8_t>(l.type));
        w.u32(4);
        w.u32(k.out);
        w.u32(k.in);
        w.u32(k.ly);
        w.u32(k.lx);
        for (double v : k.taps) w.f32(v);
        w.u8(k.has_bias() ? 1 : 0);
        for (double v : k.bias) w.f32(v);
    }
    return w.take();
}

DenoiserGraph decode_weights(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) r.fail("bad magic", 0);
    for (int i = 0; i < 4; ++i) r.u8("magic");
    const std::size_t version_at = r.offset();
    const std::uint32_t version = r.u32("version");
    if (version != kVersion) r.fail("unsupported version " + std::to_string(version), version_at);
    const std::size_t family_at = r.offset();
    const std::uint8_t fam = r.u8("family");
    if (fam > 2) r.fail("unknown family " + std::to_string(fam), family_at);
    const Family family = static_cast<Family>(fam);

    Hyper h;
    double eps = 0.0;
    std::vector<double> gammas;
    if (family == Family::DRUNet) {
        h.I = checked_dim(r, "scale count", 16);
        h.J = checked_dim(r, "block count", 1024);
        h.P = checked_dim(r, "feature count");
        h.C = checked_dim(r, "channel count");
        eps = r.f32("noise level");
    } else {
        h.K = checked_dim(r, "depth", 1u << 16);
        h.P = checked_dim(r, "feature count");
        h.C = checked_dim(r, "channel count");
        eps = r.f32("noise level");
        if (family == Family::DDFB) {
            r.need(4ull * h.K, "step sizes");
            for (int k = 0; k < h.K; ++k) gammas.push_back(r.f32("step sizes"));
        }
    }

    const std::size_t count_at = r.offset();
    const std::uint32_t count = r.u32("layer count");
    if (count > (1u << 20)) r.fail("implausible layer count " + std::to_string(count), count_at);
    std::vector<WeightLayer> layers;
    layers.reserve(count);
    for (std::uint32_t l = 0; l < count; ++l) {
        const std::size_t type_at = r.offset();
        const std::uint8_t type = r.u8("layer type");
        if (type > 2) r.fail("unknown layer type " + std::to_string(type), type_at);
        const std::size_t ndims_at = r.offset();
        const std::uint32_t ndims = r.u32("layer rank");
        if (ndims != 4) r.fail("layer rank must be 4, got " + std::to_string(ndims), ndims_at);
        const int out = checked_dim(r, "output features");
        const int in = checked_dim(r, "input features");
        const int ly = checked_dim(r, "kernel height", 64);
        const int lx = checked_dim(r, "kernel width", 64);
        WeightLayer wl{static_cast<LayerType>(type), ConvKernel(out, in, ly, lx)};
        if (wl.type != LayerType::Conv) {
            wl.kernel.anchor_y = 0;
            wl.kernel.anchor_x = 0;
        }
        r.need(4 * wl.kernel.taps.size(), "weights");
        for (double& v : wl.kernel.taps) v = r.f32("weights");
        const std::size_t bias_at = r.offset();
        const std::uint8_t has_bias = r.u8("bias flag");
        if (has_bias > 1) r.fail("bad bias flag", bias_at);
        if (has_bias) {
            wl.kernel.bias.resize(out);
            for (double& v : wl.kernel.bias) v = r.f32("biases");
        }
        layers.push_back(std::move(wl));
    }
    if (!r.done()) r.fail("trailing data", r.offset());

    switch (family) {
        case Family::DnCNN: return build_dncnn(h.K, h.P, h.C, std::move(layers));
        case Family::DDFB:
            return build_ddfb(h.K, h.P, h.C, std::move(layers), std::move(gammas), eps);
        case Family::DRUNet: return build_drunet(h.I, h.J, h.P, h.C, std::move(layers), eps);
    }
    throw FormatError("unknown family");
}

void write_weights(const std::filesystem::path& path, const DenoiserGraph& g) {
    const auto bytes = encode_weights(g);
    write_file_bytes(path, bytes);
    std::ofstream m(path.string() + ".manifest");
    if (!m) throw IoError("cannot write " + path.string() + ".manifest");
    m << "format = PNPW\n";
    m << "version = " << kVersion << "\n";
    m << "family = " << family_name(g.family) << "\n";
    if (g.family == Family::DRUNet) {
        m << "scales = " << g.hyper.I << "\n" << "blocks = " << g.hyper.J << "\n";
    } else {
        m << "depth = " << g.hyper.K << "\n";
    }
    m << "features = " << g.hyper.P << "\n";
    m << "channels = " << g.hyper.C << "\n";
    m.precision(9);
    m << "noise_level = " << g.eps << "\n";
    m << "parameters = " << g.parameter_count() << "\n";
    m.precision(17);
    m << "lipschitz_bound = " << g.lipschitz_bound << "\n";
    m << "sha256 = " << sha256_hex(bytes) << "\n";
    if (!m) throw IoError("cannot write " + path.string() + ".manifest");
}

DenoiserGraph read_weights(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    DenoiserGraph g = decode_weights(bytes);
    const std::filesystem::path manifest = path.string() + ".manifest";
    if (std::filesystem::exists(manifest)) {
        std::ifstream in(manifest);
        std::string line;
        while (std::getline(in, line)) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                const auto e = s.find_last_not_of(" \t\r");
                return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
            };
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key == "sha256" && value != sha256_hex(bytes)) {
                throw FormatError("checksum mismatch between " + path.string() + " and its manifest");
            }
            if (key == "lipschitz_bound") {
                try {
                    g.lipschitz_bound = std::stod(value);
                } catch (const std::exception&) {
                    throw FormatError("bad lipschitz_bound in manifest: " + value);
                }
            }
        }
    }
    return g;
}

}  // namespace dpnp
