// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "commands.hpp"
#include "dpnp/denoiser.hpp"
#include "dpnp/metrics_io.hpp"
#include "run_config.hpp"
#include "test_util.hpp"

using namespace dpnp;
using namespace dpnp::cli;

namespace {

namespace fs = std::filesystem;

struct Outcome {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

Outcome dpnp_cli(const fs::path& dir, const std::string& args, const std::string& env = "") {
    const auto out = dir / "stdout.txt";
    const auto err = dir / "stderr.txt";
    const std::string cmd = "cd '" + dir.string() + "' && " + env + " '" DPNP_CLI_PATH "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Outcome o;
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.out = slurp(out);
    o.err = slurp(err);
    return o;
}

/// "key = value" lines of one section of a manifest.
std::map<std::string, std::string> section(const std::string& text, const std::string& name) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    bool inside = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] == '[') {
            inside = line == "[" + name + "]";
            continue;
        }
        const auto eq = line.find(" = ");
        if (inside && eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return out;
}

/// Rows of a TSV table keyed by the first column.
std::map<std::string, std::vector<std::string>> tsv(const std::string& text) {
    std::map<std::string, std::vector<std::string>> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream row(line);
        std::string cell;
        while (std::getline(row, cell, '\t')) cells.push_back(cell);
        if (!cells.empty()) out[cells[0]] = cells;
    }
    return out;
}

const char* kTvConfig =
    "; TV inpainting\n"
    "[problem]\n"
    "task = inpaint-gauss\n"
    "image = synthetic:32\n"
    "seed = 3\n"
    "\n"
    "[sampler]\n"
    "iterations = 120\n"
    "seed = 5\n";

}  // namespace

// --- config parsing ---

TEST(RunConfig, ParsesAndResolvesPaths) {
    const RunConfig c = parse_run_config(
        "[problem]\ntask = deconv-gauss\nimage = img/x.png\nkernel = k.txt\nsnr_db = 20\n"
        "[prior]\nkind = pnp\nweights = ../net.pnpw\n"
        "[sampler]\niterations = 50\nburn_in = 10\nlambda = inf\nrho = 1e-5, 2\n"
        "[output]\nthin = 2\ndump_samples = yes\n",
        "/base/dir");
    EXPECT_EQ(c.problem.task, "deconv-gauss");
    EXPECT_EQ(c.problem.image, "/base/dir/img/x.png");
    EXPECT_EQ(c.problem.kernel, "/base/dir/k.txt");
    EXPECT_EQ(c.prior.weights, "/base/net.pnpw");
    EXPECT_EQ(c.problem.snr_db, 20.0);
    EXPECT_EQ(c.sampler.burn_in, 10);
    EXPECT_TRUE(std::isinf(*c.sampler.lambda));
    EXPECT_EQ(*c.sampler.rho, (std::vector<double>{1e-5, 2.0}));
    EXPECT_EQ(c.output.thin, 2);
    EXPECT_TRUE(c.output.dump_samples);
    const RunConfig s = parse_run_config("[problem]\nimage = synthetic:16\nkernel = motion:5\n[sampler]\niterations = 4\n", "/x");
    EXPECT_EQ(s.problem.image, "synthetic:16");
    EXPECT_EQ(s.problem.kernel, "motion:5");
    EXPECT_FALSE(s.sampler.burn_in);
}

TEST(RunConfig, TrailingComments) {
    const RunConfig c = parse_run_config(
        "# header\n[problem]\ntask = deconv-poisson   ; tasks\nimage = synthetic:16 # size\n"
        "mask = a;b.png\n[sampler]\niterations = 8\t; short\n",
        "/x");
    EXPECT_EQ(c.problem.task, "deconv-poisson");
    EXPECT_EQ(c.problem.image, "synthetic:16");
    EXPECT_EQ(c.problem.mask, "/x/a;b.png");
    EXPECT_EQ(c.sampler.iterations, 8);
}

TEST(RunConfig, FormatRoundTrips) {
    RunConfig c = parse_run_config(kTvConfig, "/x");
    c.sampler.gamma = 0.1 + 0.2;
    c.sampler.lambda = std::numeric_limits<double>::infinity();
    c.sampler.rho = std::vector<double>{1.0 / 3.0};
    c.sampler.kappa = std::vector<double>{};
    c.prior.beta = 40.0;
    const std::string text = format_run_config(c);
    const RunConfig back = parse_run_config(text, "/x");
    EXPECT_EQ(format_run_config(back), text);
    EXPECT_EQ(*back.sampler.gamma, 0.1 + 0.2);
    EXPECT_EQ((*back.sampler.rho)[0], 1.0 / 3.0);
    // Report sections of a manifest are ignored.
    EXPECT_NO_THROW(parse_run_config(text + "[checksums]\nmmse.png = abc\n[run]\nworkers = 4\n", "/x"));
}

TEST(RunConfig, Rejects) {
    const std::string sampler = "[sampler]\niterations = 10\n";
    const auto bad = [&](const std::string& text) {
        EXPECT_THROW(parse_run_config(text, "/x"), ConfigError) << text;
    };
    bad("[problem]\nimage = synthetic:8\nimgae = x\n" + sampler);
    bad("[problem]\nimage = synthetic:8\n[extra]\na = 1\n" + sampler);
    bad("[problem]\nimage = synthetic:8\n[sampler]\niterations = ten\n");
    bad("[problem]\nimage = synthetic:8\n[sampler]\niterations = 10\nburn_in = 10\n");
    bad("[problem]\nimage = synthetic:8\n[sampler]\niterations = 10\ngamma = 1e-3x\n");
    bad("[problem]\nimage = synthetic:8\n[sampler]\niterations = 10\nseed = -1\n");
    bad("[problem]\nimage = synthetic:8\n[output]\ndump_samples = maybe\n" + sampler);
    bad("[problem]\nchannels = 3\n" + sampler);
    bad("[problem]\nimage = synthetic:8\nchannels = 2\n" + sampler);
    bad("[problem]\nimage = synthetic:8\n[prior]\nkind = pnp\n" + sampler);
    bad("[problem]\nimage = synthetic:8\n[sampler]\niterations = 10\nrho = \n");
    bad("top = 1\n[problem]\nimage = synthetic:8\n" + sampler);
    bad("[problem]\nimage = synthetic:8\n[problem]\ntask = x\n" + sampler);
}

TEST(ArchSpec, DefaultsAndErrors) {
    EXPECT_EQ(format_arch(parse_arch("dncnn")), "dncnn:K=20:P=64");
    EXPECT_EQ(format_arch(parse_arch("ddfb")), "ddfb:K=4:P=64");
    EXPECT_EQ(format_arch(parse_arch("drunet:J=2:P=16")), "drunet:I=4:J=2:P=16");
    EXPECT_EQ(format_arch(parse_arch("tv")), "tv");
    EXPECT_THROW(parse_arch("unet"), ConfigError);
    EXPECT_THROW(parse_arch("tv:P=3"), ConfigError);
    EXPECT_THROW(parse_arch("dncnn:I=3"), ConfigError);
    EXPECT_THROW(parse_arch("ddfb:K=0"), ConfigError);
    EXPECT_THROW(parse_arch("ddfb:K"), ConfigError);
}

// --- end to end through the binary ---

TEST(Cli, RunIsDeterministicAndWorkerInvariant) {
    const auto dir = testutil::temp_dir("cli_run");
    spit(dir / "tv.ini", kTvConfig);
    const Outcome a = dpnp_cli(dir, "run tv.ini --workers 1 --out a");
    ASSERT_EQ(a.code, 0) << a.err;
    for (const char* f : {"mmse.png", "variance.raw", "diagnostics.tsv", "manifest.txt"}) {
        EXPECT_TRUE(fs::exists(dir / "a" / f)) << f;
    }
    int manifests = 0;
    for (const auto& e : fs::directory_iterator(dir / "a")) {
        manifests += e.path().filename().string().find("manifest") != std::string::npos;
    }
    EXPECT_EQ(manifests, 1);

    ASSERT_EQ(dpnp_cli(dir, "run tv.ini --workers 1 --out b").code, 0);
    ASSERT_EQ(dpnp_cli(dir, "run tv.ini --workers 4 --out c").code, 0);
    const std::string ma = slurp(dir / "a" / "manifest.txt");
    const auto sa = section(ma, "checksums");
    const auto sb = section(slurp(dir / "b" / "manifest.txt"), "checksums");
    const auto sc = section(slurp(dir / "c" / "manifest.txt"), "checksums");
    EXPECT_EQ(sa, sb);
    ASSERT_TRUE(sa.count("mmse.png"));
    EXPECT_EQ(sa.at("mmse.png"), sha256_file(dir / "a" / "mmse.png"));
    EXPECT_EQ(sa.at("variance.raw"), sha256_file(dir / "a" / "variance.raw"));
    EXPECT_EQ(sc.at("mmse.png"), sa.at("mmse.png"));
    EXPECT_EQ(sc.at("variance.raw"), sa.at("variance.raw"));
    EXPECT_EQ(section(ma, "run").at("workers"), "1");
    EXPECT_EQ(section(ma, "run").at("seed"), "5");
    EXPECT_EQ(section(ma, "sampler").at("burn_in"), "60");
    EXPECT_FALSE(section(ma, "run").at("git_describe").empty());

    // The variance summary matches the array.
    const Tensor var = read_array(dir / "a" / "variance.raw");
    const auto v = section(ma, "variance");
    EXPECT_EQ(v.at("shape"), "3 32 32");
    EXPECT_EQ(parse_real(v.at("max"), "max"), *std::max_element(var.values().begin(), var.values().end()));

    // Diagnostics: one row per iteration plus a header.
    const std::string diag = slurp(dir / "a" / "diagnostics.tsv");
    EXPECT_EQ(std::count(diag.begin(), diag.end(), '\n'), 121);
    EXPECT_EQ(diag.substr(0, diag.find('\n')),
              "iteration\tgradient_norm\tprior_norm\tbox_norm\tnoise_norm\thalo_phases\twall_seconds");

    // A manifest reproduces its run.
    const Outcome r = dpnp_cli(dir, "run a/manifest.txt --workers 2 --out d");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(section(slurp(dir / "d" / "manifest.txt"), "checksums").at("mmse.png"), sa.at("mmse.png"));

    // Overrides change the chain and are recorded.
    ASSERT_EQ(dpnp_cli(dir, "run tv.ini --seed 6 --thin 20 --dump-samples --out e").code, 0);
    const std::string me = slurp(dir / "e" / "manifest.txt");
    EXPECT_NE(section(me, "checksums").at("mmse.png"), sa.at("mmse.png"));
    EXPECT_EQ(section(me, "sampler").at("seed"), "6");
    EXPECT_EQ(section(me, "output").at("thin"), "20");
    EXPECT_TRUE(fs::exists(dir / "e" / "samples" / "sample_000002.raw"));
    EXPECT_FALSE(fs::exists(dir / "e" / "samples" / "sample_000003.raw"));
}

TEST(Cli, PnpRunMatchesAcrossWorkers) {
    const auto dir = testutil::temp_dir("cli_pnp");
    ASSERT_EQ(dpnp_cli(dir, "make-weights --arch dncnn:K=3:P=4 --seed 2 --out net.pnpw").code, 0);
    spit(dir / "pnp.ini",
         "[problem]\ntask = deconv-gauss\nimage = synthetic:32\nkernel = motion:3\n"
         "[prior]\nkind = pnp\nweights = net.pnpw\n[sampler]\niterations = 30\n");
    const Outcome a = dpnp_cli(dir, "run pnp.ini --workers 1 --out a");
    ASSERT_EQ(a.code, 0) << a.err;
    const Outcome b = dpnp_cli(dir, "run pnp.ini --workers 4 --out b");
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(section(slurp(dir / "a" / "manifest.txt"), "checksums").at("mmse.png"),
              section(slurp(dir / "b" / "manifest.txt"), "checksums").at("mmse.png"));
}

TEST(Cli, ExitCodes) {
    const auto dir = testutil::temp_dir("cli_exit");
    spit(dir / "pnp.ini",
         "[problem]\nimage = synthetic:16\n[prior]\nkind = pnp\nweights = missing/net.pnpw\n"
         "[sampler]\niterations = 10\n");
    const Outcome miss = dpnp_cli(dir, "run pnp.ini --out o");
    EXPECT_EQ(miss.code, 2);
    EXPECT_NE(miss.err.find((fs::weakly_canonical(dir) / "missing" / "net.pnpw").string()), std::string::npos)
        << miss.err;
    EXPECT_FALSE(fs::exists(dir / "o"));

    spit(dir / "typo.ini", std::string(kTvConfig) + "gama = 1\n");
    const Outcome typo = dpnp_cli(dir, "run typo.ini --out o");
    EXPECT_EQ(typo.code, 2);
    EXPECT_NE(typo.err.find("gama"), std::string::npos);

    EXPECT_EQ(dpnp_cli(dir, "run nothere.ini --out o").code, 2);
    spit(dir / "tv.ini", kTvConfig);
    EXPECT_EQ(dpnp_cli(dir, "run tv.ini --workers 0 --out o").code, 2);
    // Too many workers for the image.
    EXPECT_EQ(dpnp_cli(dir, "run tv.ini --workers 64 --out o").code, 2);
    // An infeasible step size is rejected before any step runs.
    spit(dir / "steps.ini", std::string(kTvConfig) + "gamma = 1\n");
    EXPECT_EQ(dpnp_cli(dir, "run steps.ini --out o").code, 2);
    EXPECT_EQ(dpnp_cli(dir, "").code, 2);
    EXPECT_EQ(dpnp_cli(dir, "run").code, 2);
    EXPECT_EQ(dpnp_cli(dir, "--help").code, 0);

    // Output directory below a regular file.
    spit(dir / "file", "x");
    const Outcome io = dpnp_cli(dir, "run tv.ini --out file/o");
    EXPECT_EQ(io.code, 3);
    EXPECT_NE(io.err.find("runtime error"), std::string::npos);
}

TEST(Cli, LogLevelFromEnvironment) {
    const auto dir = testutil::temp_dir("cli_log");
    spit(dir / "tv.ini", kTvConfig);
    const Outcome quiet = dpnp_cli(dir, "run tv.ini --out a");
    ASSERT_EQ(quiet.code, 0);
    EXPECT_EQ(quiet.err, "");
    const Outcome info = dpnp_cli(dir, "run tv.ini --out b", "DPNP_LOG=info");
    ASSERT_EQ(info.code, 0);
    EXPECT_NE(info.err.find("iteration 60 / 120"), std::string::npos) << info.err;
}

TEST(Cli, EstimateCosts) {
    const auto dir = testutil::temp_dir("cli_cost");
    const Outcome o = dpnp_cli(dir, "estimate-costs --arch tv --arch ddfb:K=4 --arch dncnn:K=20 "
                                    "--arch drunet:I=3:J=4:P=8 --shape 3,256,256 --workers 4");
    ASSERT_EQ(o.code, 0) << o.err;
    const auto t = tsv(o.out);
    ASSERT_TRUE(t.count("prior"));
    EXPECT_EQ(t.at("prior"), (std::vector<std::string>{"prior", "flops_per_worker", "message_elems", "comm_phases"}));
    EXPECT_EQ(t.at("tv").at(3), "1");
    EXPECT_EQ(t.at("ddfb:K=4:P=64").at(3), "8");
    EXPECT_EQ(t.at("dncnn:K=20:P=64").at(3), "20");
    EXPECT_EQ(t.at("drunet:I=3:J=4:P=8").at(3), "58");
    // Same numbers as the cost model.
    const CostReport tv = cost_model_tv({3, 256, 256}, 4);
    EXPECT_EQ(parse_real(t.at("tv").at(1), "flops"), tv.flops_per_worker);
    EXPECT_EQ(parse_real(t.at("tv").at(2), "elems"), tv.message_elems);

    const Outcome one = dpnp_cli(dir, "estimate-costs --arch ddfb --workers 1");
    ASSERT_EQ(one.code, 0) << one.err;
    EXPECT_EQ(tsv(one.out).at("ddfb:K=4:P=64").at(3), "0");
    EXPECT_EQ(dpnp_cli(dir, "estimate-costs --arch ddfb:Q=3").code, 2);
    EXPECT_EQ(dpnp_cli(dir, "estimate-costs --arch tv --shape 3,256").code, 2);
}

TEST(Cli, DenoiseAndMetrics) {
    const auto dir = testutil::temp_dir("cli_denoise");
    // Zero weights make DnCNN the identity.
    write_weights(dir / "id.pnpw", build_dncnn(3, 4, 3, dncnn_layout(3, 4, 3)));
    const Outcome pass = dpnp_cli(dir, "denoise id.pnpw synthetic:32 --eps 0 --out pass.png");
    ASSERT_EQ(pass.code, 0) << pass.err;
    const auto pt = tsv(pass.out);
    EXPECT_EQ(pt.at("psnr_noisy").at(1), "psnr_denoised");
    EXPECT_GT(parse_real(tsv(pass.out).begin()->second.at(1), "psnr"), 60.0);

    ASSERT_EQ(dpnp_cli(dir, "make-weights --arch dncnn:K=4:P=8 --seed 3 --out net.pnpw").code, 0);
    ASSERT_EQ(dpnp_cli(dir, "denoise net.pnpw synthetic:32 --eps 0.1 --seed 2 --workers 1 --out d1.png").code, 0);
    ASSERT_EQ(dpnp_cli(dir, "denoise net.pnpw synthetic:32 --eps 0.1 --seed 2 --workers 2 --out d2.png").code, 0);
    EXPECT_EQ(sha256_file(dir / "d1.png"), sha256_file(dir / "d2.png"));
    EXPECT_EQ(dpnp_cli(dir, "denoise missing.pnpw synthetic:32 --out x.png").code, 2);

    const Outcome same = dpnp_cli(dir, "metrics d1.png d1.png");
    ASSERT_EQ(same.code, 0) << same.err;
    const auto m = tsv(same.out);
    EXPECT_EQ(m.at("channel"), (std::vector<std::string>{"channel", "snr", "psnr", "ssim"}));
    EXPECT_EQ(m.at("all").at(1), "inf");
    EXPECT_EQ(m.at("all").at(3), "1");
    ASSERT_TRUE(m.count("2"));

    const Outcome diff = dpnp_cli(dir, "metrics d1.png pass.png");
    ASSERT_EQ(diff.code, 0);
    const Tensor a = read_image(dir / "d1.png");
    const Tensor b = read_image(dir / "pass.png");
    EXPECT_EQ(parse_real(tsv(diff.out).at("all").at(2), "psnr"), psnr(a, b));
    EXPECT_EQ(parse_real(tsv(diff.out).at("all").at(3), "ssim"), ssim(a, b));

    write_image(dir / "small.png", Tensor({3, 8, 8}, 0.5));
    EXPECT_EQ(dpnp_cli(dir, "metrics d1.png small.png").code, 2);
    EXPECT_EQ(dpnp_cli(dir, "metrics d1.png none.png").code, 2);
}

TEST(Cli, WeightsAndReferenceDump) {
    const auto dir = testutil::temp_dir("cli_dump");
    const Outcome mk = dpnp_cli(dir, "make-weights --arch drunet:I=2:J=1:P=4 --channels 1 --eps 0.1 --seed 4 "
                                     "--lipschitz-bound 0.5 --out net.pnpw --dump ref.jsonl --dump-count 2 "
                                     "--dump-size 16");
    ASSERT_EQ(mk.code, 0) << mk.err;
    const DenoiserGraph g = read_weights(dir / "net.pnpw");
    EXPECT_EQ(g.family, Family::DRUNet);
    EXPECT_EQ(g.lipschitz_bound, 0.5);
    EXPECT_TRUE(fs::exists(dir / "ref.1.out.raw"));
    const Outcome ok = dpnp_cli(dir, "check-dump net.pnpw ref.jsonl --workers 2");
    EXPECT_EQ(ok.code, 0) << ok.err;
    EXPECT_EQ(tsv(ok.out).at("pairs").at(1), "max_abs_error");

    ASSERT_EQ(dpnp_cli(dir, "make-weights --arch drunet:I=2:J=1:P=4 --channels 1 --seed 5 --out other.pnpw").code, 0);
    EXPECT_EQ(dpnp_cli(dir, "check-dump other.pnpw ref.jsonl").code, 3);
    EXPECT_EQ(dpnp_cli(dir, "check-dump net.pnpw absent.jsonl").code, 2);
    EXPECT_EQ(dpnp_cli(dir, "make-weights --arch tv --out x.pnpw").code, 2);
    EXPECT_EQ(dpnp_cli(dir, "make-weights --arch drunet:I=2 --dump d.jsonl --dump-size 6 --out x.pnpw").code, 2);
}
