// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

// dpnp: distributed plug-and-play split Gibbs sampling from the command line.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <string>

#include "commands.hpp"

namespace {

/// Logs go to stderr; DPNP_LOG selects the level (default warn).
void setup_logging() {
    auto logger = spdlog::stderr_logger_mt("dpnp");
    logger->set_pattern("dpnp [%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("DPNP_LOG")) {
        const auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to off.
        if (level == spdlog::level::off && std::string(env) != "off") {
            spdlog::warn("unknown DPNP_LOG level '{}', using warn", env);
        } else {
            spdlog::set_level(level);
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    using namespace dpnp::cli;
    setup_logging();

    CLI::App app{"Distributed plug-and-play split Gibbs sampler"};
    app.require_subcommand(1);

    RunArgs run;
    std::uint64_t run_seed = 0;
    int run_thin = 0;
    auto* c_run = app.add_subcommand("run", "Run a sampler from a config file or a run manifest");
    c_run->add_option("config", run.config, "Config file")->required();
    c_run->add_option("--workers", run.workers, "Number of workers")->capture_default_str();
    c_run->add_option("--out", run.out, "Output directory")->required();
    auto* o_seed = c_run->add_option("--seed", run_seed, "Override the sampler seed");
    auto* o_thin = c_run->add_option("--thin", run_thin, "Keep every n-th post-burn-in sample");
    c_run->add_flag("--dump-samples", run.dump_samples, "Write thinned samples to samples/");

    CostArgs cost;
    auto* c_cost = app.add_subcommand("estimate-costs", "Per-worker cost of one prior application");
    c_cost->add_option("--arch", cost.arch, "tv, dncnn:K=..:P=.., ddfb:K=..:P=.., drunet:I=..:J=..:P=..")
        ->required();
    c_cost->add_option("--shape", cost.shape, "C,rows,cols")->delimiter(',')->capture_default_str();
    c_cost->add_option("--workers", cost.workers, "Number of workers")->capture_default_str();

    DenoiseArgs den;
    auto* c_den = app.add_subcommand("denoise", "Add Gaussian noise to an image and denoise it");
    c_den->add_option("weights", den.weights, "Weight file")->required();
    c_den->add_option("image", den.image, "PNG file or synthetic:<size>")->required();
    c_den->add_option("--eps", den.eps, "Noise standard deviation")->capture_default_str();
    c_den->add_option("--workers", den.workers, "Number of workers")->capture_default_str();
    c_den->add_option("--seed", den.seed, "Noise seed")->capture_default_str();
    c_den->add_option("--out", den.out, "Output PNG")->required();

    std::string ref, est;
    double peak = 1.0;
    auto* c_met = app.add_subcommand("metrics", "SNR, PSNR and SSIM of an estimate");
    c_met->add_option("ref", ref, "Reference image (PNG or .raw)")->required();
    c_met->add_option("est", est, "Estimate (PNG or .raw)")->required();
    c_met->add_option("--peak", peak, "Peak value for PSNR and SSIM")->capture_default_str();

    MakeWeightsArgs mw;
    std::string mw_dump;
    double mw_lip = 0.0;
    auto* c_mw = app.add_subcommand("make-weights", "Write a randomly initialized network");
    c_mw->add_option("--arch", mw.arch, "dncnn:K=..:P=.., ddfb:K=..:P=.., drunet:I=..:J=..:P=..")
        ->required();
    c_mw->add_option("--channels", mw.channels, "Image channels")->capture_default_str();
    c_mw->add_option("--eps", mw.eps, "Noise level stored with the network")->capture_default_str();
    c_mw->add_option("--seed", mw.seed, "Weight seed")->capture_default_str();
    c_mw->add_option("--out", mw.out, "Weight file")->required();
    auto* o_lip = c_mw->add_option("--lipschitz-bound", mw_lip, "Lipschitz bound of I - D");
    auto* o_dump = c_mw->add_option("--dump", mw_dump, "Also write a reference dump index");
    c_mw->add_option("--dump-count", mw.dump_count, "Pairs in the dump")->capture_default_str();
    c_mw->add_option("--dump-size", mw.dump_size, "Image side of the dump")->capture_default_str();

    std::string cd_weights, cd_dump;
    int cd_workers = 1;
    double cd_tol = 1e-5;
    auto* c_cd = app.add_subcommand("check-dump", "Compare a network against a reference dump");
    c_cd->add_option("weights", cd_weights, "Weight file")->required();
    c_cd->add_option("dump", cd_dump, "Reference dump index")->required();
    c_cd->add_option("--workers", cd_workers, "Number of workers")->capture_default_str();
    c_cd->add_option("--tol", cd_tol, "Maximum absolute deviation")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    if (c_run->parsed()) {
        if (o_seed->count()) run.seed = run_seed;
        if (o_thin->count()) run.thin = run_thin;
        return cmd_run(run);
    }
    if (c_cost->parsed()) return cmd_estimate_costs(cost);
    if (c_den->parsed()) return cmd_denoise(den);
    if (c_met->parsed()) return cmd_metrics(ref, est, peak);
    if (c_mw->parsed()) {
        if (o_lip->count()) mw.lipschitz_bound = mw_lip;
        if (o_dump->count()) mw.dump = mw_dump;
        return cmd_make_weights(mw);
    }
    return cmd_check_dump(cd_weights, cd_dump, cd_workers, cd_tol);
}
