// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

/**
 * @file commands.hpp
 * @brief Subcommands of the dpnp tool. Each returns the process exit code:
 *        0 on success, 2 on a configuration or input error, 3 on a runtime
 *        error. Errors are reported on stderr.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dpnp::cli {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct RunArgs {
    std::filesystem::path config;
    std::filesystem::path out;
    int workers = 1;
    std::optional<std::uint64_t> seed;  // overrides [sampler] seed
    std::optional<int> thin;
    bool dump_samples = false;
};

/// Writes mmse.png, variance.raw, diagnostics.tsv and manifest.txt (plus
/// samples/ when dumping) into the output directory.
int cmd_run(const RunArgs& a);

struct CostArgs {
    std::vector<std::string> arch;
    std::vector<int> shape{3, 256, 256};
    int workers = 4;
};

/// TSV with columns prior, flops_per_worker, message_elems, comm_phases.
/// The phase count of every row is checked against a dry run.
int cmd_estimate_costs(const CostArgs& a);

struct DenoiseArgs {
    std::filesystem::path weights;
    std::string image;  // PNG path or "synthetic:<size>"
    std::filesystem::path out;
    double eps = 0.0;
    int workers = 1;
    std::uint64_t seed = 0;
};

/// Adds Gaussian noise of standard deviation eps, denoises and writes a
/// 16-bit PNG; prints psnr_noisy and psnr_denoised as TSV.
int cmd_denoise(const DenoiseArgs& a);

/// TSV with columns channel, snr, psnr, ssim; the last row covers all
/// channels. Inputs are PNG or raw arrays (".raw").
int cmd_metrics(const std::filesystem::path& ref, const std::filesystem::path& est, double peak);

struct MakeWeightsArgs {
    std::string arch;
    int channels = 3;
    double eps = 0.05;
    std::uint64_t seed = 1;
    std::filesystem::path out;
    std::optional<double> lipschitz_bound;
    std::optional<std::filesystem::path> dump;
    int dump_count = 3;
    int dump_size = 32;
};

/// Writes a randomly initialized network and, optionally, a reference dump
/// of its outputs.
int cmd_make_weights(const MakeWeightsArgs& a);

/// Replays a reference dump; exit 3 when the error exceeds the tolerance.
int cmd_check_dump(const std::filesystem::path& weights, const std::filesystem::path& dump,
                   int workers, double tol);

}  // namespace dpnp::cli
