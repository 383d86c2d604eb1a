// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

/**
 * @file models.hpp
 * @brief Inverse problems: observation synthesis, likelihood and prior
 *        wiring, initialization and assumption checks.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dpnp/denoiser.hpp"
#include "dpnp/linops.hpp"
#include "dpnp/sampler.hpp"
#include "dpnp/tensor.hpp"

namespace dpnp {

struct ProblemSpec {
    Task task = Task::InpaintGauss;
    double observed_fraction = 0.3;
    /// Input SNR in dB; unset means 15 (inpainting) or 25 (deconvolution).
    std::optional<double> input_snr_db;
    /// Explicit noise variance; overrides the SNR target when set.
    std::optional<double> sigma2;
    double eta = 250.0;
    std::optional<ConvKernel> kernel;  // default: motion_blur_kernel(default_blur_length(rows))
    std::optional<Tensor> mask;        // (1, N_y, N_x); default: random_mask
    std::uint64_t seed = 0;
};

struct InverseProblem {
    Task task = Task::InpaintGauss;
    Shape shape;
    LocalizedOp forward;
    Tensor y;
    Tensor mask;  // inpainting only
    double sigma2 = 0.0;
    double eta = 0.0;
};

/// Gaussian tasks: y = H x + n with sigma2 = ||H x||^2 / (N 10^(snr / 10))
/// unless given. Poisson: y ~ P(eta H x). Deterministic in the seed.
InverseProblem synthesize_observations(const Tensor& truth, const ProblemSpec& spec);

/// Normalized diagonal line of the given odd length.
ConvKernel motion_blur_kernel(int length);
/// Odd kernel side growing with the image: 2 round(rows / 64) + 1, at least 3.
int default_blur_length(int rows);
/// "Ly Lx" then Ly rows of Lx reals; normalized to unit mass.
ConvKernel parse_kernel(const std::string& text);
ConvKernel read_kernel(const std::filesystem::path& path);

/// Exactly round(fraction N_y N_x) observed pixels, shared by all channels.
Tensor random_mask(int rows, int cols, double fraction, std::uint64_t seed);
/// Run-length text: "N_y N_x" then alternating run lengths, starting with
/// a run of zeros, in row-major order.
Tensor parse_mask_rle(const std::string& text);
std::string encode_mask_rle(const Tensor& mask);
/// PNG (nonzero first channel means observed) or run-length text.
Tensor read_mask(const std::filesystem::path& path);

/// Deterministic piecewise-smooth test image with values in [0.05, 0.95].
Tensor synthetic_image(int size, int channels = 3);

/// Normalized convolution of the observed pixels with a separable cubic
/// B-spline; the spline scale grows until every pixel is covered.
Tensor spline_fill(const Tensor& y, const Tensor& mask);
/// Inpainting: spline_fill(y, mask). Deconvolution: zeros.
Tensor initial_state(const InverseProblem& problem);

struct Prior {
    PriorKind kind = PriorKind::TV;
    std::shared_ptr<const DenoiserGraph> denoiser;
    double beta = 0.0;  // TV weight
};

/// Likelihood and prior terms of the chain for a problem and prior.
/// Throws UnsupportedCombination (PnP without denoiser) or ChannelMismatch.
Posterior potential_terms(const InverseProblem& problem, const Prior& prior);

/// sigma2, eta, ||H||^2 (power iteration), ||D||^2 = 8 and L_D.
ProblemConstants problem_constants(const InverseProblem& problem, const Prior& prior);

struct AssumptionItem {
    std::string name;
    bool ok = true;
    std::string detail;
};

struct AssumptionReport {
    std::vector<AssumptionItem> items;
    bool ok() const;
    const AssumptionItem* find(const std::string& name) const;
};

/// Numerical checks of the locality and separability assumptions for a
/// run on `workers` workers.
AssumptionReport check_assumptions(const InverseProblem& problem, const Prior& prior, int workers,
                                   std::uint64_t seed = 1);

}  // namespace dpnp
