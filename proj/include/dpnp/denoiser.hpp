// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

/**
 * @file denoiser.hpp
 * @brief CNN denoisers (DnCNN, DDFB, DRUNet) evaluated over BlockTensors.
 *
 * A DenoiserGraph is a list of weight layers plus a small register program.
 * Every 3x3 convolution performs one halo exchange; the exchange direction
 * alternates Down, Up, Down, ... so that consecutive layers talk to opposite
 * neighbours and the row ownership shift of one layer is undone by the next.
 * Layers that must not shift ownership (the head/tail of DRUNet, the last
 * layer of an odd-depth DnCNN) exchange in both directions instead.
 * Strided 2x2 resampling needs no communication as long as block
 * boundaries are even at that level.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dpnp/comm.hpp"
#include "dpnp/grid.hpp"
#include "dpnp/linops.hpp"

namespace dpnp {

enum class Family : std::uint8_t { DnCNN = 0, DDFB = 1, DRUNet = 2 };

std::string family_name(Family f);
Family parse_family(const std::string& name);

enum class LayerType : std::uint8_t { Conv = 0, Down = 1, Up = 2 };

/// Down: out[o, i, j] = sum_c sum_{a,b in {0,1}} w[o, c, a, b] x[c, 2i + a, 2j + b]
/// Up:   out[o, 2i + a, 2j + b] = sum_c w[o, c, a, b] u[c, i, j]
struct WeightLayer {
    LayerType type = LayerType::Conv;
    ConvKernel kernel;
};

struct Instr {
    enum class Op { Conv, Down, Up, ReLU, HardTanh, BoxProj, Axpy, Concat, Release };
    Op op = Op::Conv;
    int dst = 0;
    int a = 0;
    int b = -1;
    int layer = -1;
    ConvMode mode = ConvMode::Both;
    bool adjoint = false;
    double s = 0.0;  // Axpy scale, HardTanh bound, Concat constant
};

struct Hyper {
    int K = 0;  // DnCNN / DDFB depth
    int I = 0;  // DRUNet scales
    int J = 0;  // DRUNet residual blocks per scale
    int P = 0;
    int C = 0;
};

struct DenoiserGraph {
    Family family = Family::DnCNN;
    Hyper hyper;
    double eps = 0.0;
    std::vector<double> gammas;  // DDFB only
    double lipschitz_bound = 1.0;
    std::vector<WeightLayer> layers;
    std::vector<ConvKernel> adjoints;  // adjoint kernels, filled where the program needs them
    std::vector<Instr> program;
    int registers = 1;
    int output = 0;

    int channels() const noexcept { return hyper.C; }
    std::size_t parameter_count() const;
    /// Block boundaries and image sides must be multiples of this.
    int row_alignment() const;
    /// Widest ghost any layer reads.
    int halo() const;
    /// Smallest block (full-resolution rows) every layer can be served with.
    int min_block_rows() const;
    /// Halo-exchange phases of one application with B >= 2 workers.
    int comm_phases() const;
};

/// Default I - D Lipschitz bounds per family, used when no value is given.
double default_lipschitz_bound(Family f);

/// Zero weights with the shapes an architecture expects.
std::vector<WeightLayer> dncnn_layout(int K, int P, int C);
std::vector<WeightLayer> ddfb_layout(int K, int P, int C);
std::vector<WeightLayer> drunet_layout(int I, int J, int P, int C);

/// Uniform in [-a, a], a = 1 / sqrt(C_in L_y L_x), drawn from the counter
/// stream and rounded to single precision so files round-trip exactly.
void randomize_weights(std::vector<WeightLayer>& layers, std::uint64_t seed, bool biases);

/// Steps 1 / b_k^2 with b_k the sum over taps of the Frobenius norms of the
/// per-tap channel matrices, an upper bound of ||W_k||_2.
std::vector<double> ddfb_safe_steps(const std::vector<WeightLayer>& layers);

DenoiserGraph build_dncnn(int K, int P, int C, std::vector<WeightLayer> weights);
DenoiserGraph build_ddfb(int K, int P, int C, std::vector<WeightLayer> weights,
                         std::vector<double> gammas, double eps);
DenoiserGraph build_drunet(int I, int J, int P, int C, std::vector<WeightLayer> weights,
                           double eps);

/// Randomized networks; eps and DDFB steps are rounded to single precision
/// like the weights.
DenoiserGraph random_dncnn(int K, int P, int C, std::uint64_t seed);
DenoiserGraph random_ddfb(int K, int P, int C, double eps, std::uint64_t seed);
DenoiserGraph random_drunet(int I, int J, int P, int C, double eps, std::uint64_t seed);

/// Partition suitable for a graph on `rows` rows and `workers` workers,
/// also serving stencils of halo `extra_halo`.
Partition denoiser_partition(const DenoiserGraph& g, int rows, int workers, int extra_halo = 0);

BlockTensor apply_denoiser(WorkerCtx& ctx, const DenoiserGraph& g, const BlockTensor& x);
Tensor apply_denoiser_serial(const DenoiserGraph& g, const Tensor& x);
/// Runs the graph on B workers and gathers the result.
Tensor apply_denoiser_distributed(const DenoiserGraph& g, const Tensor& x, int workers,
                                  SpmdStats* stats = nullptr);

/// DDFB step check: every gamma_k in (0, 2 / ||W_k||^2), the norm taken by
/// power iteration on a (C, 16, 16) grid. Throws ArchitectureMismatch.
void validate_ddfb_steps(const DenoiserGraph& g);

/// Lower bound on the Lipschitz constant of I - D: the largest
/// finite-difference ratio over `trials` random pairs, each refined by power
/// iteration on the finite-difference Jacobian. Trial t only depends on
/// (seed, t), so the estimate is nondecreasing in trials.
double estimate_lipschitz(const std::function<Tensor(const Tensor&)>& denoise, Shape shape,
                          int trials, std::uint64_t seed, int refine_iters = 20);
double estimate_lipschitz(const DenoiserGraph& g, int trials, std::uint64_t seed);
double estimate_lipschitz(const DenoiserGraph& g, Shape shape, int trials, std::uint64_t seed);

struct CostReport {
    std::string prior;
    double flops_per_worker = 0.0;
    double message_elems = 0.0;  // average elements sent per worker and phase
    int comm_phases = 0;
};

/// Cost of one prior application on a (C, rows, cols) image and B workers.
/// FLOPs: 2 per multiply-add plus one per elementwise operation, counted
/// for the largest block. Messages: ghost rows times channels times the
/// row length of the layer's grid. B = 1 reports no communication.
CostReport cost_model(const DenoiserGraph& g, Shape shape, int workers);
CostReport cost_model_tv(Shape shape, int workers);

// --- PNPW weight files ---

void write_weights(const std::filesystem::path& path, const DenoiserGraph& g);
/// Reads and validates a weight file; when a manifest (path + ".manifest")
/// exists its checksum must match.
DenoiserGraph read_weights(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_weights(const DenoiserGraph& g);
DenoiserGraph decode_weights(const std::vector<std::uint8_t>& bytes);

}  // namespace dpnp
