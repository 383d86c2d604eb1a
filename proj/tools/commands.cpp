// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <memory>

#include "dpnp/denoiser.hpp"
#include "dpnp/errors.hpp"
#include "dpnp/metrics_io.hpp"
#include "dpnp/models.hpp"
#include "dpnp/noise.hpp"
#include "dpnp/reference_dump.hpp"
#include "dpnp/sampler.hpp"
#include "run_config.hpp"

#ifndef DPNP_GIT_DESCRIBE
#define DPNP_GIT_DESCRIBE "unknown"
#endif

namespace dpnp::cli {
namespace {

int fail(int code, const std::string& what) {
    std::cerr << "dpnp: " << (code == kExitConfig ? "configuration error: " : "runtime error: ") << what
              << "\n";
    return code;
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

Tensor load_image(const std::string& spec, int channels) {
    if (spec.rfind("synthetic:", 0) == 0) {
        const long long n = parse_integer(spec.substr(10), "synthetic image size");
        if (n <= 0) throw ConfigError("synthetic image size must be positive");
        return synthetic_image(static_cast<int>(n), channels);
    }
    return read_image(spec);
}

Tensor load_tensor(const std::filesystem::path& path) {
    return path.extension() == ".raw" ? read_array(path) : read_image(path);
}

DenoiserGraph load_weights(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("weight file not found: " + path.string());
    return read_weights(path);
}

std::string shape_text(Shape s) { return fmt::format("{} {} {}", s.channels, s.rows, s.cols); }

// --- run ---

struct RunSetup {
    RunConfig cfg;
    Tensor truth;
    InverseProblem problem;
    Prior prior;
    Posterior post;
    SamplerConfig sampler;
    Tensor init;
    AssumptionReport assumptions;
};

RunSetup prepare_run(const RunArgs& a) {
    if (a.workers < 1) throw ConfigError("--workers must be at least 1");
    RunSetup s;
    s.cfg = load_run_config(a.config);
    RunConfig& cfg = s.cfg;
    if (a.seed) cfg.sampler.seed = *a.seed;
    if (a.thin) cfg.output.thin = *a.thin;
    if (a.dump_samples) cfg.output.dump_samples = true;
    if (cfg.output.thin <= 0) throw ConfigError("--thin must be positive");

    s.truth = load_image(cfg.problem.image, cfg.problem.channels);
    cfg.problem.channels = s.truth.channels();

    ProblemSpec spec;
    spec.task = parse_task(cfg.problem.task);
    if (cfg.problem.observed_fraction) spec.observed_fraction = *cfg.problem.observed_fraction;
    spec.input_snr_db = cfg.problem.snr_db;
    spec.sigma2 = cfg.problem.sigma2;
    if (cfg.problem.eta) spec.eta = *cfg.problem.eta;
    const std::string& kernel = cfg.problem.kernel;
    if (kernel.rfind("motion:", 0) == 0) {
        spec.kernel = motion_blur_kernel(static_cast<int>(parse_integer(kernel.substr(7), "motion blur length")));
    } else if (!kernel.empty()) {
        spec.kernel = read_kernel(kernel);
    }
    if (!cfg.problem.mask.empty()) spec.mask = read_mask(cfg.problem.mask);
    spec.seed = cfg.problem.seed;
    s.problem = synthesize_observations(s.truth, spec);

    s.prior.kind = parse_prior(cfg.prior.kind);
    s.prior.beta = 1.0;
    std::shared_ptr<DenoiserGraph> graph;
    if (s.prior.kind == PriorKind::PnP) {
        graph = std::make_shared<DenoiserGraph>(load_weights(cfg.prior.weights));
        if (cfg.prior.lipschitz_bound) graph->lipschitz_bound = *cfg.prior.lipschitz_bound;
        cfg.prior.lipschitz_bound = graph->lipschitz_bound;
        s.prior.denoiser = graph;
    } else if (!cfg.prior.weights.empty()) {
        throw ConfigError("[prior] weights given for the tv prior");
    }

    SamplerConfig& c = s.sampler;
    c = default_config(s.problem.task, s.prior.kind, problem_constants(s.problem, s.prior));
    const auto& o = cfg.sampler;
    if (o.gamma) c.gamma = *o.gamma;
    if (o.lambda) c.lambda = *o.lambda;
    if (o.alpha) c.alpha = *o.alpha;
    if (o.eps) c.eps = *o.eps;
    if (o.rho) c.rho = *o.rho;
    if (o.kappa) c.kappa = *o.kappa;
    c.iterations = o.iterations;
    c.burn_in = o.burn_in.value_or(o.iterations / 2);
    c.seed = o.seed;
    if (c.iterations - c.burn_in < 2) {
        throw ConfigError("at least two iterations after burn_in are needed for the variance");
    }
    if (s.prior.kind == PriorKind::TV) {
        c.beta = cfg.prior.beta.value_or(c.beta);
        cfg.prior.beta = c.beta;
    } else if (cfg.prior.beta) {
        throw ConfigError("[prior] beta only applies to the tv prior");
    }
    s.prior.beta = c.beta;
    // The noise-level map of DRUNet follows the chain's eps.
    if (graph && graph->family == Family::DRUNet) graph->eps = c.eps;

    s.post = potential_terms(s.problem, s.prior);
    check_config(s.post, c);
    chain_partition(s.post, a.workers);

    cfg.sampler.gamma = c.gamma;
    cfg.sampler.lambda = c.lambda;
    cfg.sampler.alpha = c.alpha;
    cfg.sampler.eps = c.eps;
    cfg.sampler.rho = c.rho;
    cfg.sampler.kappa = c.kappa;
    cfg.sampler.burn_in = c.burn_in;

    s.init = initial_state(s.problem);
    s.assumptions = check_assumptions(s.problem, s.prior, a.workers);
    for (const auto& item : s.assumptions.items) {
        if (!item.ok) spdlog::warn("assumption {} does not hold: {}", item.name, item.detail);
    }
    return s;
}

std::string diagnostics_tsv(const std::vector<DiagnosticsRow>& rows, bool wall) {
    std::string out = "iteration\tgradient_norm\tprior_norm\tbox_norm\tnoise_norm\thalo_phases";
    out += wall ? "\twall_seconds\n" : "\n";
    for (const auto& r : rows) {
        out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}", r.iteration, r.gradient_norm, r.prior_norm,
                           r.box_norm, r.noise_norm, r.halo_phases);
        out += wall ? fmt::format("\t{}\n", r.wall_seconds) : "\n";
    }
    return out;
}

std::string run_manifest(const RunArgs& a, const RunSetup& s, const ChainResult& r,
                         const std::vector<std::pair<std::string, std::string>>& checksums,
                         const std::string& variance, const std::string& metrics) {
    std::string m = "# dpnp run manifest; rerun with: dpnp run manifest.txt --workers B --out DIR\n";
    m += "[run]\n";
    m += "git_describe = " + std::string(DPNP_GIT_DESCRIBE) + "\n";
    m += fmt::format("workers = {}\n", a.workers);
    m += fmt::format("seed = {}\n", s.sampler.seed);
    m += fmt::format("complete = {}\n", r.complete ? "true" : "false");
    m += fmt::format("completed_iterations = {}\n", r.completed_iterations);
    m += fmt::format("samples_in_statistics = {}\n", r.stats.count());
    if (!r.error.empty()) m += "error = " + one_line(r.error) + "\n";
    m += "\n" + format_run_config(s.cfg);
    m += "\n# diagnostics.tsv is checksummed without its wall_seconds column\n[checksums]\n";
    for (const auto& [name, sum] : checksums) m += name + " = " + sum + "\n";
    if (!variance.empty()) m += "\n[variance]\n" + variance;
    if (!metrics.empty()) m += "\n[metrics]\n" + metrics;
    m += "\n[assumptions]\n";
    for (const auto& item : s.assumptions.items) {
        m += item.name + " = " + (item.ok ? "ok" : "violated") +
             (item.detail.empty() ? "" : ": " + one_line(item.detail)) + "\n";
    }
    return m;
}

int write_run_outputs(const RunArgs& a, const RunSetup& s, const ChainResult& r) {
    std::filesystem::create_directories(a.out);
    std::vector<std::pair<std::string, std::string>> sums;
    std::string variance, metrics;
    if (r.stats.count() >= 1) {
        const Tensor& mean = r.stats.mean();
        write_image(a.out / "mmse.png", mean, 16);
        sums.emplace_back("mmse.png", sha256_file(a.out / "mmse.png"));
        metrics += fmt::format("init_psnr = {}\n", psnr(s.truth, s.init));
        metrics += fmt::format("mmse_psnr = {}\n", psnr(s.truth, mean));
        metrics += fmt::format("mmse_snr = {}\n", snr(s.truth, mean));
        metrics += fmt::format("mmse_ssim = {}\n", ssim(s.truth, mean));
    }
    if (r.stats.count() >= 2) {
        const Tensor var = r.stats.variance();
        write_array(a.out / "variance.raw", var);
        const ArraySummary v = summarize_array(var);
        sums.emplace_back("variance.raw", sha256_file(a.out / "variance.raw"));
        variance = "shape = " + shape_text(v.shape) + "\n" + fmt::format("min = {}\n", v.min) +
                   fmt::format("max = {}\n", v.max) + fmt::format("mean = {}\n", v.mean) +
                   "sha256 = " + v.sha256 + "\n";
    }
    write_text(a.out / "diagnostics.tsv", diagnostics_tsv(r.diagnostics, true));
    const std::string diag = diagnostics_tsv(r.diagnostics, false);
    sums.emplace_back("diagnostics.tsv", sha256_hex({diag.begin(), diag.end()}));
    if (!r.samples.empty()) {
        std::filesystem::create_directories(a.out / "samples");
        for (std::size_t k = 0; k < r.samples.size(); ++k) {
            const std::string name = fmt::format("samples/sample_{:06d}.raw", k);
            write_array(a.out / name, r.samples[k]);
            sums.emplace_back(name, sha256_file(a.out / name));
        }
    }
    write_text(a.out / "manifest.txt", run_manifest(a, s, r, sums, variance, metrics));
    if (!r.complete) {
        return fail(kExitRuntime, "chain stopped after " + std::to_string(r.completed_iterations) +
                                      " iterations: " + one_line(r.error));
    }
    return kExitOk;
}

// --- estimate-costs ---

DenoiserGraph zero_network(const ArchSpec& a, int C) {
    if (a.family == "dncnn") return build_dncnn(a.K, a.P, C, dncnn_layout(a.K, a.P, C));
    if (a.family == "ddfb") {
        return build_ddfb(a.K, a.P, C, ddfb_layout(a.K, a.P, C), std::vector<double>(a.K, 1.0), 0.05);
    }
    return build_drunet(a.I, a.J, a.P, C, drunet_layout(a.I, a.J, a.P, C), 0.05);
}

long long dry_run_phases(const ArchSpec& a, const DenoiserGraph* g, int C, int workers) {
    SpmdStats st;
    if (!g) {
        const int rows = 4 * workers;
        auto blocks = scatter_global(Tensor({C, rows, 8}), make_partition(rows, workers, 1));
        run_spmd(workers, [&](WorkerCtx& ctx) { LocalizedOp::grad2d().forward(ctx, blocks[ctx.rank()]); }, &st);
    } else {
        const int align = g->row_alignment();
        const int cols = align * std::max(1, 8 / align);
        apply_denoiser_distributed(*g, Tensor({C, workers * g->min_block_rows(), cols}), workers, &st);
    }
    spdlog::info("dry run of {} on {} workers: {} halo phases", format_arch(a), workers,
                 st.per_rank[0].halo_phases);
    return st.per_rank[0].halo_phases;
}

}  // namespace

int cmd_run(const RunArgs& a) {
    RunSetup s;
    try {
        s = prepare_run(a);
    } catch (const std::exception& e) {
        return fail(kExitConfig, e.what());
    }
    spdlog::info("{} / {} on {} workers: {} iterations, burn-in {}", s.cfg.problem.task, s.cfg.prior.kind,
                 a.workers, s.sampler.iterations, s.sampler.burn_in);
    try {
        RunOptions opts;
        opts.thin = s.cfg.output.thin;
        opts.dump_samples = s.cfg.output.dump_samples;
        const long long every = std::max(1, s.sampler.iterations / 10);
        const long long total = s.sampler.iterations;
        opts.before_iteration = [every, total](int rank, long long t) {
            if (rank == 0 && t > 0 && t % every == 0) spdlog::info("iteration {} / {}", t, total);
        };
        const ChainResult r = run_chain(s.post, s.sampler, s.init, a.workers, opts);
        return write_run_outputs(a, s, r);
    } catch (const std::exception& e) {
        return fail(kExitRuntime, e.what());
    }
}

int cmd_estimate_costs(const CostArgs& a) {
    std::vector<ArchSpec> archs;
    Shape shape;
    try {
        if (a.workers < 1) throw ConfigError("--workers must be at least 1");
        if (a.shape.size() != 3) throw ConfigError("--shape takes C,rows,cols");
        if (a.arch.empty()) throw ConfigError("no --arch given");
        shape = {a.shape[0], a.shape[1], a.shape[2]};
        for (const auto& s : a.arch) archs.push_back(parse_arch(s));
    } catch (const std::exception& e) {
        return fail(kExitConfig, e.what());
    }
    std::string out = "prior\tflops_per_worker\tmessage_elems\tcomm_phases\n";
    for (const auto& arch : archs) {
        std::unique_ptr<DenoiserGraph> g;
        CostReport rep;
        try {
            if (arch.family == "tv") {
                rep = cost_model_tv(shape, a.workers);
            } else {
                g = std::make_unique<DenoiserGraph>(zero_network(arch, shape.channels));
                rep = cost_model(*g, shape, a.workers);
            }
        } catch (const std::exception& e) {
            return fail(kExitConfig, format_arch(arch) + ": " + e.what());
        }
        try {
            const long long live = dry_run_phases(arch, g.get(), shape.channels, a.workers);
            if (live != rep.comm_phases) {
                return fail(kExitRuntime, fmt::format("{}: cost model gives {} phases, dry run counted {}",
                                                      format_arch(arch), rep.comm_phases, live));
            }
        } catch (const std::exception& e) {
            return fail(kExitRuntime, format_arch(arch) + ": " + e.what());
        }
        out += fmt::format("{}\t{}\t{}\t{}\n", format_arch(arch), rep.flops_per_worker, rep.message_elems,
                           rep.comm_phases);
    }
    std::cout << out << std::flush;
    return kExitOk;
}

int cmd_denoise(const DenoiseArgs& a) {
    DenoiserGraph g;
    Tensor clean;
    try {
        if (a.workers < 1) throw ConfigError("--workers must be at least 1");
        if (!(a.eps >= 0.0)) throw ConfigError("--eps must be non-negative");
        g = load_weights(a.weights);
        clean = load_image(a.image, g.channels());
        if (clean.channels() != g.channels()) {
            throw ChannelMismatch(fmt::format("image has {} channels, network expects {}", clean.channels(),
                                              g.channels()));
        }
        const int align = g.row_alignment();
        if (clean.rows() % align != 0 || clean.cols() % align != 0) {
            throw ShapeMismatch(fmt::format("image sides must be multiples of {}", align));
        }
        denoiser_partition(g, clean.rows(), a.workers);
        if (g.family == Family::DRUNet) g.eps = a.eps;
    } catch (const std::exception& e) {
        return fail(kExitConfig, e.what());
    }
    try {
        Tensor noisy = clean;
        const NoiseStream noise(a.seed, NoiseTag::Observation);
        for (std::size_t n = 0; n < noisy.size(); ++n) noisy.values()[n] += a.eps * noise.normal(0, n);
        const Tensor out = apply_denoiser_distributed(g, noisy, a.workers);
        write_image(a.out, out, 16);
        std::cout << "psnr_noisy\tpsnr_denoised\n"
                  << fmt::format("{}\t{}\n", psnr(clean, noisy), psnr(clean, out)) << std::flush;
    } catch (const std::exception& e) {
        return fail(kExitRuntime, e.what());
    }
    return kExitOk;
}

int cmd_metrics(const std::filesystem::path& ref, const std::filesystem::path& est, double peak) {
    MetricReport rep;
    try {
        if (!(peak > 0.0)) throw ConfigError("--peak must be positive");
        const Tensor r = load_tensor(ref);
        const Tensor e = load_tensor(est);
        if (r.shape() != e.shape()) {
            throw ShapeMismatch("shapes differ: " + shape_text(r.shape()) + " vs " + shape_text(e.shape()));
        }
        rep = compute_metrics(r, e, peak);
    } catch (const std::exception& e) {
        return fail(kExitConfig, e.what());
    }
    std::string out = "channel\tsnr\tpsnr\tssim\n";
    for (std::size_t c = 0; c < rep.channel_psnr.size(); ++c) {
        out += fmt::format("{}\t{}\t{}\t{}\n", c, rep.channel_snr[c], rep.channel_psnr[c], rep.channel_ssim[c]);
    }
    out += fmt::format("all\t{}\t{}\t{}\n", rep.snr, rep.psnr, rep.ssim);
    std::cout << out << std::flush;
    return kExitOk;
}

int cmd_make_weights(const MakeWeightsArgs& a) {
    DenoiserGraph g;
    try {
        const ArchSpec arch = parse_arch(a.arch);
        if (arch.family == "tv") throw ConfigError("tv has no weights");
        if (a.channels != 1 && a.channels != 3) throw ConfigError("--channels must be 1 or 3");
        if (!(a.eps > 0.0)) throw ConfigError("--eps must be positive");
        if (a.dump && (a.dump_count <= 0 || a.dump_size <= 0)) {
            throw ConfigError("--dump-count and --dump-size must be positive");
        }
        if (arch.family == "dncnn") {
            g = random_dncnn(arch.K, arch.P, a.channels, a.seed);
            g.eps = static_cast<float>(a.eps);
        } else if (arch.family == "ddfb") {
            g = random_ddfb(arch.K, arch.P, a.channels, a.eps, a.seed);
        } else {
            g = random_drunet(arch.I, arch.J, arch.P, a.channels, a.eps, a.seed);
        }
        if (a.lipschitz_bound) g.lipschitz_bound = *a.lipschitz_bound;
        if (a.dump && a.dump_size % g.row_alignment() != 0) {
            throw ConfigError(fmt::format("--dump-size must be a multiple of {}", g.row_alignment()));
        }
    } catch (const std::exception& e) {
        return fail(kExitConfig, e.what());
    }
    try {
        write_weights(a.out, g);
        if (a.dump) {
            std::vector<ReferencePair> pairs;
            const Tensor base = synthetic_image(a.dump_size, a.channels);
            const NoiseStream noise(a.seed, NoiseTag::Observation);
            for (int k = 0; k < a.dump_count; ++k) {
                Tensor in = base;
                for (std::size_t n = 0; n < in.size(); ++n) {
                    in.values()[n] = static_cast<float>(in.values()[n] + a.eps * noise.normal(k, n));
                }
                pairs.push_back({in, apply_denoiser_serial(g, in)});
            }
            write_reference_dump(*a.dump, pairs);
        }
    } catch (const std::exception& e) {
        return fail(kExitRuntime, e.what());
    }
    return kExitOk;
}

int cmd_check_dump(const std::filesystem::path& weights, const std::filesystem::path& dump, int workers,
                   double tol) {
    DenoiserGraph g;
    std::vector<ReferencePair> pairs;
    try {
        if (workers < 1) throw ConfigError("--workers must be at least 1");
        g = load_weights(weights);
        pairs = read_reference_dump(dump);
    } catch (const std::exception& e) {
        return fail(kExitConfig, e.what());
    }
    try {
        const double err = reference_max_abs_error(g, pairs, workers);
        std::cout << "pairs\tmax_abs_error\n" << fmt::format("{}\t{}\n", pairs.size(), err) << std::flush;
        if (!(err <= tol)) {
            return fail(kExitRuntime, fmt::format("maximum deviation {} exceeds tolerance {}", err, tol));
        }
    } catch (const std::exception& e) {
        return fail(kExitRuntime, e.what());
    }
    return kExitOk;
}

}  // namespace dpnp::cli
