// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "dpnp/errors.hpp"
#include "dpnp/metrics_io.hpp"
#include "dpnp/models.hpp"
#include "test_util.hpp"

using namespace dpnp;

namespace {

double sum(const Tensor& t) {
    double s = 0.0;
    for (double v : t.values()) s += v;
    return s;
}

}  // namespace

TEST(Observations, GaussianSnrTarget) {
    const Tensor truth = synthetic_image(128, 3);
    for (Task task : {Task::InpaintGauss, Task::DeconvGauss}) {
        for (double target : {15.0, 25.0, 40.0}) {
            ProblemSpec spec;
            spec.task = task;
            spec.input_snr_db = target;
            spec.seed = 3;
            const InverseProblem p = synthesize_observations(truth, spec);
            const Tensor hx = p.forward.forward_serial(truth);
            EXPECT_NEAR(snr(hx, p.y), target, 0.1) << task_name(task);
            double energy = 0.0;
            for (double v : hx.values()) energy += v * v;
            EXPECT_DOUBLE_EQ(p.sigma2, energy / (hx.size() * std::pow(10.0, target / 10.0)));
        }
    }
}

TEST(Observations, DefaultSnrPerTask) {
    const Tensor truth = synthetic_image(64, 3);
    ProblemSpec spec;
    spec.seed = 1;
    const InverseProblem a = synthesize_observations(truth, spec);
    EXPECT_NEAR(snr(a.forward.forward_serial(truth), a.y), 15.0, 0.2);
    spec.task = Task::DeconvGauss;
    const InverseProblem b = synthesize_observations(truth, spec);
    EXPECT_NEAR(snr(b.forward.forward_serial(truth), b.y), 25.0, 0.2);
}

TEST(Observations, NoiselessIsExact) {
    const Tensor truth = synthetic_image(32, 3);
    ProblemSpec spec;
    spec.task = Task::DeconvGauss;
    spec.sigma2 = 0.0;
    const InverseProblem p = synthesize_observations(truth, spec);
    EXPECT_TRUE(bitwise_equal(p.y, p.forward.forward_serial(truth)));
}

TEST(Observations, PoissonScale) {
    const Tensor truth = synthetic_image(64, 1);
    ProblemSpec spec;
    spec.task = Task::DeconvPoisson;
    spec.eta = 1e6;
    spec.seed = 4;
    const InverseProblem p = synthesize_observations(truth, spec);
    const Tensor hx = p.forward.forward_serial(truth);
    double err = 0.0;
    for (std::size_t n = 0; n < hx.size(); ++n) {
        EXPECT_EQ(p.y.values()[n], std::floor(p.y.values()[n]));
        err += std::abs(p.y.values()[n] / spec.eta - hx.values()[n]);
    }
    EXPECT_LT(err / sum(hx), 0.01);
    spec.eta = 0.5;
    EXPECT_THROW(synthesize_observations(truth, spec), InvalidArgument);
}

TEST(Observations, DeterministicInSeed) {
    const Tensor truth = synthetic_image(32, 3);
    ProblemSpec spec;
    spec.seed = 8;
    const auto a = synthesize_observations(truth, spec);
    const auto b = synthesize_observations(truth, spec);
    EXPECT_TRUE(bitwise_equal(a.y, b.y));
    EXPECT_TRUE(bitwise_equal(a.mask, b.mask));
    spec.seed = 9;
    EXPECT_FALSE(bitwise_equal(a.y, synthesize_observations(truth, spec).y));
}

TEST(Observations, RejectsOutOfRangeTruth) {
    Tensor truth({1, 8, 8}, 1.5);
    EXPECT_THROW(synthesize_observations(truth, ProblemSpec{}), InvalidArgument);
}

TEST(Mask, ExactCountAndSeeds) {
    const Tensor m = random_mask(64, 48, 0.3, 5);
    EXPECT_EQ(sum(m), std::round(0.3 * 64 * 48));
    for (double v : m.values()) EXPECT_TRUE(v == 0.0 || v == 1.0);
    EXPECT_TRUE(bitwise_equal(m, random_mask(64, 48, 0.3, 5)));
    EXPECT_FALSE(bitwise_equal(m, random_mask(64, 48, 0.3, 6)));
    EXPECT_EQ(sum(random_mask(8, 8, 1.0, 1)), 64.0);
    EXPECT_THROW(random_mask(8, 8, 0.0, 1), InvalidArgument);
    EXPECT_THROW(random_mask(8, 8, 1.2, 1), InvalidArgument);
}

TEST(Mask, RunLengthRoundTrip) {
    const Tensor m = random_mask(17, 13, 0.4, 2);
    const std::string text = encode_mask_rle(m);
    EXPECT_TRUE(bitwise_equal(parse_mask_rle(text), m));
    const Tensor p = parse_mask_rle("2 3\n0 2 4");
    EXPECT_EQ(p(0, 0, 0), 1.0);
    EXPECT_EQ(p(0, 0, 1), 1.0);
    EXPECT_EQ(p(0, 0, 2), 0.0);
    EXPECT_EQ(p(0, 1, 2), 0.0);
    EXPECT_THROW(parse_mask_rle("2 3\n1 2"), FormatError);
    EXPECT_THROW(parse_mask_rle("2 3\n4 4"), FormatError);
    EXPECT_THROW(parse_mask_rle("2 x"), FormatError);
}

TEST(Mask, ReadFromFiles) {
    const auto dir = testutil::temp_dir("mask");
    const Tensor m = random_mask(16, 12, 0.5, 3);
    {
        std::ofstream out(dir / "m.txt");
        out << encode_mask_rle(m);
    }
    EXPECT_TRUE(bitwise_equal(read_mask(dir / "m.txt"), m));
    write_image(dir / "m.png", m);
    EXPECT_TRUE(bitwise_equal(read_mask(dir / "m.png"), m));
}

TEST(Kernel, MotionBlurAndParse) {
    const ConvKernel k = motion_blur_kernel(7);
    double mass = 0.0;
    for (double v : k.taps) mass += v;
    EXPECT_NEAR(mass, 1.0, 1e-12);
    for (int a = 0; a < 7; ++a) EXPECT_GT(k.at(0, 0, a, a), 0.0);
    EXPECT_EQ(default_blur_length(32), 3);
    EXPECT_EQ(default_blur_length(256), 9);
    EXPECT_THROW(motion_blur_kernel(4), InvalidArgument);

    const ConvKernel p = parse_kernel("2 3\n1 2 3\n4 5 6\n");
    EXPECT_EQ(p.ly, 2);
    EXPECT_EQ(p.lx, 3);
    double pm = 0.0;
    for (double v : p.taps) pm += v;
    EXPECT_NEAR(pm, 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(p.at(0, 0, 1, 2), 6.0 / 21.0);
    EXPECT_THROW(parse_kernel("2 2\n1 2 3"), FormatError);
    EXPECT_THROW(parse_kernel("2 2\n1 2 3 4 5"), FormatError);
    EXPECT_THROW(parse_kernel("1 2\n1 -1"), FormatError);
    EXPECT_THROW(parse_kernel("0 2\n"), FormatError);
}

TEST(Init, SyntheticImageAndSplineFill) {
    const Tensor img = synthetic_image(48, 3);
    for (double v : img.values()) {
        EXPECT_GE(v, 0.05);
        EXPECT_LE(v, 0.95);
    }
    ProblemSpec spec;
    spec.observed_fraction = 0.2;
    spec.sigma2 = 0.0;
    spec.seed = 2;
    const InverseProblem p = synthesize_observations(img, spec);
    const Tensor x0 = initial_state(p);
    for (double v : x0.values()) ASSERT_TRUE(std::isfinite(v));
    // Interpolation beats the zero-filled observation.
    EXPECT_GT(psnr(img, x0), psnr(img, p.y) + 3.0);

    // Very sparse masks still cover every pixel.
    Tensor sparse({1, 32, 32});
    sparse(0, 16, 16) = 1.0;
    Tensor y({1, 32, 32});
    y(0, 16, 16) = 0.7;
    const Tensor f = spline_fill(y, sparse);
    for (double v : f.values()) EXPECT_NEAR(v, 0.7, 1e-12);

    ProblemSpec deconv;
    deconv.task = Task::DeconvGauss;
    const Tensor z = initial_state(synthesize_observations(img, deconv));
    for (double v : z.values()) EXPECT_EQ(v, 0.0);
}

TEST(Potentials, Combinations) {
    const Tensor truth = synthetic_image(32, 3);
    auto net = std::make_shared<const DenoiserGraph>(random_dncnn(3, 4, 3, 1));
    const Prior pnp{PriorKind::PnP, net, 0.0};
    const Prior tv{PriorKind::TV, nullptr, 40.0};

    ProblemSpec gs;
    gs.task = Task::DeconvGauss;
    const InverseProblem g = synthesize_observations(truth, gs);
    const Posterior gp = potential_terms(g, pnp);
    EXPECT_TRUE(gp.f1.has_value());
    EXPECT_TRUE(gp.couplings.empty());
    EXPECT_EQ(gp.x_update, XUpdate::PnpUla);
    EXPECT_NEAR(gp.L, op_norm_sq(g.forward, g.shape, 1) / g.sigma2, 1e-12 * gp.L);

    const Posterior gt = potential_terms(g, tv);
    ASSERT_EQ(gt.couplings.size(), 1u);
    EXPECT_EQ(gt.couplings[0].prox.kind, ProxSpec::Kind::GroupL21);
    EXPECT_EQ(gt.couplings[0].prox.weight, 40.0);
    EXPECT_EQ(gt.couplings[0].norm_sq, 8.0);
    EXPECT_EQ(gt.x_update, XUpdate::Psgla);

    ProblemSpec ps;
    ps.task = Task::DeconvPoisson;
    ps.eta = 100.0;
    const InverseProblem p = synthesize_observations(truth, ps);
    const Posterior pp = potential_terms(p, pnp);
    EXPECT_FALSE(pp.f1.has_value());
    ASSERT_EQ(pp.couplings.size(), 2u);
    EXPECT_EQ(pp.couplings[0].prox.kind, ProxSpec::Kind::KLPoisson);
    EXPECT_EQ(pp.couplings[0].op.scale(), 100.0);
    EXPECT_EQ(pp.couplings[1].prox.kind, ProxSpec::Kind::Nonneg);
    EXPECT_EQ(pp.L, 0.0);
    const Posterior pt = potential_terms(p, tv);
    ASSERT_EQ(pt.couplings.size(), 2u);
    EXPECT_EQ(pt.couplings[1].prox.kind, ProxSpec::Kind::GroupL21);

    EXPECT_THROW(potential_terms(g, Prior{PriorKind::PnP, nullptr, 0.0}), UnsupportedCombination);
    EXPECT_THROW(potential_terms(g, Prior{PriorKind::TV, net, 40.0}), UnsupportedCombination);
    auto gray = std::make_shared<const DenoiserGraph>(random_dncnn(3, 4, 1, 1));
    EXPECT_THROW(potential_terms(g, Prior{PriorKind::PnP, gray, 0.0}), ChannelMismatch);
}

TEST(Assumptions, HoldOnRandomInstances) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Tensor truth = synthetic_image(32, 3);
        for (Task task : {Task::InpaintGauss, Task::DeconvGauss, Task::DeconvPoisson}) {
            ProblemSpec spec;
            spec.task = task;
            spec.seed = seed;
            spec.kernel = motion_blur_kernel(5);
            const InverseProblem p = synthesize_observations(truth, spec);
            const AssumptionReport r = check_assumptions(p, Prior{PriorKind::TV, nullptr, 40.0}, 4, seed);
            for (const auto& it : r.items) EXPECT_TRUE(it.ok) << it.name << ": " << it.detail;
            ASSERT_NE(r.find("A4"), nullptr);
        }
    }
}

TEST(Assumptions, LargeBlurViolatesLocality) {
    const Tensor truth = synthetic_image(32, 1);
    ProblemSpec spec;
    spec.task = Task::DeconvGauss;
    spec.kernel = motion_blur_kernel(21);
    const InverseProblem p = synthesize_observations(truth, spec);
    const AssumptionReport r = check_assumptions(p, Prior{PriorKind::TV, nullptr, 40.0}, 4);
    EXPECT_FALSE(r.ok());
    ASSERT_NE(r.find("A3"), nullptr);
    EXPECT_FALSE(r.find("A3")->ok);
    EXPECT_TRUE(check_assumptions(p, Prior{PriorKind::TV, nullptr, 40.0}, 1).find("A3")->ok);
}
