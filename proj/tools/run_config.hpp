// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

/**
 * @file run_config.hpp
 * @brief Run configuration of the command line tool: INI-style
 *        "key = value" text with sections, and architecture specs.
 *
 * Comments start with ';' or '#' at the beginning of a line or after
 * whitespace. Sections and keys (paths are relative to the config file):
 *
 *   [problem]  task, image, channels, observed_fraction, snr_db, sigma2,
 *              eta, kernel, mask, seed
 *   [prior]    kind, weights, beta, lipschitz_bound
 *   [sampler]  iterations, burn_in, seed, gamma, lambda, alpha, eps, rho,
 *              kappa
 *   [output]   thin, dump_samples
 *
 * Sections written by the tool into run manifests (run, checksums,
 * variance, metrics, assumptions) are accepted and ignored, so a manifest
 * is itself a valid config.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpnp::cli {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ProblemSection {
    std::string task = "inpaint-gauss";
    std::string image;  // "synthetic:<size>" or a PNG path
    int channels = 3;   // synthetic images only
    std::optional<double> observed_fraction;
    std::optional<double> snr_db;
    std::optional<double> sigma2;
    std::optional<double> eta;
    std::string kernel;  // "motion:<length>" or a kernel file; empty means default
    std::string mask;    // mask file; empty means random
    std::uint64_t seed = 0;
};

struct PriorSection {
    std::string kind = "tv";
    std::string weights;
    std::optional<double> beta;
    std::optional<double> lipschitz_bound;
};

struct SamplerSection {
    int iterations = 0;
    std::optional<int> burn_in;  // default: iterations / 2
    std::uint64_t seed = 0;
    std::optional<double> gamma;
    std::optional<double> lambda;
    std::optional<double> alpha;
    std::optional<double> eps;
    std::optional<std::vector<double>> rho;
    std::optional<std::vector<double>> kappa;
};

struct OutputSection {
    int thin = 10;
    bool dump_samples = false;
};

struct RunConfig {
    ProblemSection problem;
    PriorSection prior;
    SamplerSection sampler;
    OutputSection output;
};

/// Parses config text; relative paths are resolved against `base_dir`.
/// Throws ConfigError on unknown sections or keys and malformed values.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
/// Writes every set field; reals use the shortest round-trip form.
std::string format_run_config(const RunConfig& cfg);

/// Prior architecture: "tv", "dncnn[:K=20][:P=64]", "ddfb[:K=4][:P=64]",
/// "drunet[:I=4][:J=4][:P=64]".
struct ArchSpec {
    std::string family;
    int K = 0;
    int I = 0;
    int J = 0;
    int P = 64;
};

ArchSpec parse_arch(const std::string& text);
std::string format_arch(const ArchSpec& a);

double parse_real(const std::string& text, const std::string& what);
long long parse_integer(const std::string& text, const std::string& what);
std::string format_real(double v);

}  // namespace dpnp::cli
