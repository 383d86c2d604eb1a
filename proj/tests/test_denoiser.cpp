// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <iterator>

#include "dpnp/denoiser.hpp"
#include "dpnp/errors.hpp"
#include "dpnp/noise.hpp"
#include "dpnp/reference_dump.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dpnp;

namespace {

Tensor random_image(Shape s, std::uint64_t seed) {
    Tensor x(s);
    NoiseStream ns(seed, 99u);
    for (std::size_t n = 0; n < x.size(); ++n) x.values()[n] = ns.uniform(0, n);
    return x;
}

}  // namespace

TEST(Denoiser, DnCNNMatchesOracle) {
    for (int K : {4, 5}) {
        auto g = random_dncnn(K, 8, 3, 11);
        const Tensor x = random_image({3, 32, 32}, 1);
        const Tensor ref = oracle::denoise(g, x);
        const Tensor serial = apply_denoiser_serial(g, x);
        EXPECT_LT(oracle::max_abs_diff(ref, serial), 1e-12) << "K=" << K;
        for (int B : {2, 4}) {
            EXPECT_TRUE(bitwise_equal(serial, apply_denoiser_distributed(g, x, B))) << "B=" << B;
        }
    }
}

TEST(Denoiser, DDFBMatchesOracle) {
    auto g = random_ddfb(4, 16, 3, 0.05, 12);
    const Tensor x = random_image({3, 32, 32}, 2);
    const Tensor serial = apply_denoiser_serial(g, x);
    EXPECT_LT(oracle::max_abs_diff(oracle::denoise(g, x), serial), 1e-12);
    for (int B : {2, 4}) EXPECT_TRUE(bitwise_equal(serial, apply_denoiser_distributed(g, x, B)));
}

TEST(Denoiser, DRUNetMatchesOracle) {
    auto g = random_drunet(2, 1, 4, 3, 0.05, 13);
    const Tensor x = random_image({3, 32, 32}, 3);
    const Tensor serial = apply_denoiser_serial(g, x);
    EXPECT_LT(oracle::max_abs_diff(oracle::denoise(g, x), serial), 1e-12);
    for (int B : {2, 4}) EXPECT_TRUE(bitwise_equal(serial, apply_denoiser_distributed(g, x, B)));
}

TEST(Denoiser, ParameterCounts) {
    EXPECT_EQ(build_ddfb(4, 64, 3, ddfb_layout(4, 64, 3), std::vector<double>(4, 1.0), 0.05)
                  .parameter_count(),
              6912u);
    EXPECT_EQ(build_ddfb(20, 64, 3, ddfb_layout(20, 64, 3), std::vector<double>(20, 1.0), 0.05)
                  .parameter_count(),
              34560u);
    EXPECT_EQ(build_dncnn(20, 64, 3, dncnn_layout(20, 64, 3)).parameter_count(), 668227u);
    EXPECT_EQ(build_drunet(3, 4, 64, 3, drunet_layout(3, 4, 64, 3), 0.05).parameter_count(),
              32640960u);
}

TEST(Denoiser, CommPhasesMatchLiveCounter) {
    struct Case {
        DenoiserGraph g;
        int expected;
    };
    std::vector<Case> cases;
    cases.push_back({random_ddfb(4, 4, 3, 0.05, 1), 8});
    cases.push_back({random_dncnn(20, 4, 3, 2), 20});
    cases.push_back({random_drunet(3, 4, 4, 3, 0.05, 3), 58});
    for (const auto& [g, expected] : cases) {
        EXPECT_EQ(g.comm_phases(), expected) << family_name(g.family);
        const int rows = std::max(32, 2 * g.min_block_rows());
        const Tensor x = random_image({3, rows, 16}, 4);
        SpmdStats st;
        apply_denoiser_distributed(g, x, 2, &st);
        for (const auto& c : st.per_rank) EXPECT_EQ(c.halo_phases, expected) << family_name(g.family);
        SpmdStats single;
        apply_denoiser_distributed(g, x, 1, &single);
        EXPECT_EQ(single.per_rank[0].halo_phases, 0);
        EXPECT_EQ(cost_model(g, x.shape(), 2).comm_phases, expected);
    }
}

TEST(Denoiser, CostModel) {
    const auto g = random_dncnn(2, 4, 1, 5);
    const CostReport one = cost_model(g, {1, 16, 16}, 1);
    const CostReport two = cost_model(g, {1, 16, 16}, 2);
    EXPECT_EQ(one.comm_phases, 0);
    EXPECT_EQ(one.message_elems, 0.0);
    EXPECT_EQ(two.comm_phases, 2);
    EXPECT_DOUBLE_EQ(two.message_elems, (2.0 * 1 * 16 + 2.0 * 4 * 16) / 2.0);
    // Two 3x3 convolutions: 2 MACs each way per pixel, plus elementwise work.
    const double mac_flops = 2.0 * (4 * 1 * 9 + 1 * 4 * 9) * 256;
    EXPECT_GT(one.flops_per_worker, mac_flops);
    EXPECT_DOUBLE_EQ(two.flops_per_worker, one.flops_per_worker / 2.0);

    const CostReport tv = cost_model_tv({3, 64, 48}, 4);
    EXPECT_EQ(tv.comm_phases, 1);
    EXPECT_DOUBLE_EQ(tv.message_elems, 3.0 * 48);
    EXPECT_DOUBLE_EQ(tv.flops_per_worker, 2.0 * 3 * 16 * 48);
    EXPECT_THROW(cost_model(g, {3, 16, 16}, 1), ChannelMismatch);
}

TEST(Denoiser, ShapeErrors) {
    const auto g = random_drunet(3, 1, 4, 3, 0.05, 6);
    EXPECT_THROW(apply_denoiser_serial(g, Tensor({3, 18, 16})), ShapeMismatch);
    EXPECT_THROW(apply_denoiser_serial(g, Tensor({1, 16, 16})), ChannelMismatch);
    EXPECT_THROW(build_dncnn(4, 8, 3, dncnn_layout(5, 8, 3)), ArchitectureMismatch);
    EXPECT_THROW(build_dncnn(4, 8, 3, dncnn_layout(4, 8, 1)), ArchitectureMismatch);
}

TEST(Denoiser, DDFBSteps) {
    auto g = random_ddfb(4, 8, 3, 0.05, 7);
    EXPECT_NO_THROW(validate_ddfb_steps(g));
    auto bad = g.gammas;
    bad[2] = 1e6;
    EXPECT_THROW(validate_ddfb_steps(build_ddfb(4, 8, 3, g.layers, bad, 0.05)),
                 ArchitectureMismatch);
    bad[2] = -1.0;
    EXPECT_THROW(build_ddfb(4, 8, 3, g.layers, bad, 0.05), ArchitectureMismatch);
}

TEST(Lipschitz, KnownMaps) {
    const Shape s{1, 8, 8};
    auto ident = [](const Tensor& x) { return x; };
    auto zero = [](const Tensor& x) { return Tensor(x.shape()); };
    auto half = [](const Tensor& x) {
        Tensor y = x;
        for (double& v : y.values()) v *= 0.5;
        return y;
    };
    EXPECT_EQ(estimate_lipschitz(ident, s, 3, 1), 0.0);
    EXPECT_NEAR(estimate_lipschitz(zero, s, 3, 1), 1.0, 1e-9);
    EXPECT_NEAR(estimate_lipschitz(half, s, 3, 1), 0.5, 1e-9);
    const auto g = random_dncnn(3, 4, 1, 8);
    const double a = estimate_lipschitz(g, {1, 16, 16}, 2, 5);
    const double b = estimate_lipschitz(g, {1, 16, 16}, 4, 5);
    EXPECT_GT(a, 0.0);
    EXPECT_GE(b, a);
}

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

void expect_same_graph(const DenoiserGraph& a, const DenoiserGraph& b) {
    ASSERT_EQ(a.family, b.family);
    ASSERT_EQ(a.layers.size(), b.layers.size());
    EXPECT_EQ(a.hyper.K, b.hyper.K);
    EXPECT_EQ(a.hyper.I, b.hyper.I);
    EXPECT_EQ(a.hyper.J, b.hyper.J);
    EXPECT_EQ(a.hyper.P, b.hyper.P);
    EXPECT_EQ(a.hyper.C, b.hyper.C);
    EXPECT_EQ(a.eps, b.eps);
    EXPECT_EQ(a.gammas, b.gammas);
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        EXPECT_EQ(a.layers[i].type, b.layers[i].type);
        EXPECT_EQ(a.layers[i].kernel.taps, b.layers[i].kernel.taps);
        EXPECT_EQ(a.layers[i].kernel.bias, b.layers[i].kernel.bias);
    }
}

}  // namespace

TEST(WeightFile, RoundTrip) {
    const auto dir = testutil::temp_dir("pnpw");
    std::vector<DenoiserGraph> graphs;
    graphs.push_back(random_dncnn(4, 8, 3, 1));
    graphs.push_back(random_ddfb(4, 8, 3, 0.05, 2));
    graphs.push_back(random_drunet(2, 1, 4, 3, 0.05, 3));
    for (const auto& g : graphs) {
        const auto path = dir / (family_name(g.family) + ".pnpw");
        write_weights(path, g);
        ASSERT_TRUE(std::filesystem::exists(path.string() + ".manifest"));
        const DenoiserGraph r = read_weights(path);
        expect_same_graph(g, r);
        EXPECT_EQ(r.lipschitz_bound, g.lipschitz_bound);
        const Tensor x = random_image({3, 16, 16}, 9);
        EXPECT_TRUE(bitwise_equal(apply_denoiser_serial(g, x), apply_denoiser_serial(r, x)));
        expect_same_graph(g, decode_weights(encode_weights(g)));
    }
}

TEST(WeightFile, CorruptInputs) {
    const auto g = random_dncnn(3, 4, 3, 4);
    const auto bytes = encode_weights(g);

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_weights(bad_magic), FormatError);

    auto bad_version = bytes;
    bad_version[4] = 2;
    EXPECT_THROW(decode_weights(bad_version), FormatError);

    auto bad_family = bytes;
    bad_family[8] = 9;
    EXPECT_THROW(decode_weights(bad_family), FormatError);

    for (std::size_t cut : {std::size_t{3}, std::size_t{12}, bytes.size() / 2, bytes.size() - 1}) {
        std::vector<std::uint8_t> t(bytes.begin(), bytes.begin() + static_cast<long>(cut));
        try {
            decode_weights(t);
            ADD_FAILURE() << "truncation at " << cut << " accepted";
        } catch (const FormatError& e) {
            EXPECT_NE(std::string(e.what()).find("byte"), std::string::npos);
        }
    }

    auto trailing = bytes;
    trailing.push_back(0);
    EXPECT_THROW(decode_weights(trailing), FormatError);

    // Header says K = 4 but the file holds three layers.
    auto wrong_depth = bytes;
    wrong_depth[9] = 4;
    EXPECT_THROW(decode_weights(wrong_depth), ArchitectureMismatch);
}

TEST(WeightFile, ChecksumMismatch) {
    const auto dir = testutil::temp_dir("pnpw_sum");
    const auto path = dir / "net.pnpw";
    write_weights(path, random_dncnn(3, 4, 3, 5));
    auto bytes = slurp(path);
    bytes[bytes.size() - 2] ^= 0x01;
    spit(path, bytes);
    EXPECT_THROW(read_weights(path), FormatError);
    std::filesystem::remove(path.string() + ".manifest");
    EXPECT_NO_THROW(read_weights(path));
    EXPECT_THROW(read_weights(dir / "missing.pnpw"), IoError);
}

TEST(ReferenceDump, RoundTripWithinTolerance) {
    const auto dir = testutil::temp_dir("refdump");
    const auto g = random_ddfb(4, 8, 3, 0.05, 31);
    write_weights(dir / "net.pnpw", g);
    std::vector<ReferencePair> pairs;
    for (int k = 0; k < 5; ++k) {
        const Tensor x = random_image({3, 16, 16}, 40 + k);
        Tensor y = apply_denoiser_serial(g, x);
        // The dump stores single precision, like an exporter would.
        for (double& v : y.values()) v = static_cast<float>(v);
        Tensor xf = x;
        for (double& v : xf.values()) v = static_cast<float>(v);
        pairs.push_back({xf, y});
    }
    write_reference_dump(dir / "ref.jsonl", pairs);
    const auto back = read_reference_dump(dir / "ref.jsonl");
    ASSERT_EQ(back.size(), 5u);
    const DenoiserGraph loaded = read_weights(dir / "net.pnpw");
    EXPECT_LE(reference_max_abs_error(loaded, back), 1e-5);
    EXPECT_EQ(reference_max_abs_error(loaded, back, 2), reference_max_abs_error(loaded, back, 1));

    // A different network does not reproduce the dump.
    EXPECT_GT(reference_max_abs_error(random_ddfb(4, 8, 3, 0.05, 32), back), 1e-3);
}

TEST(ReferenceDump, Errors) {
    const auto dir = testutil::temp_dir("refdump_bad");
    const Tensor x = random_image({1, 4, 4}, 1);
    write_reference_dump(dir / "ref.jsonl", {{x, x}});
    {
        std::ofstream out(dir / "ref.0.out.raw", std::ios::app | std::ios::binary);
        out.put('\0');
    }
    EXPECT_THROW(read_reference_dump(dir / "ref.jsonl"), FormatError);
    {
        std::ofstream out(dir / "bad.jsonl");
        out << "{not json}\n";
    }
    EXPECT_THROW(read_reference_dump(dir / "bad.jsonl"), FormatError);
    {
        std::ofstream out(dir / "missing.jsonl");
        out << R"({"input": "nope.raw", "output": "nope.raw"})" << "\n";
    }
    EXPECT_THROW(read_reference_dump(dir / "missing.jsonl"), IoError);
    EXPECT_THROW(read_reference_dump(dir / "absent.jsonl"), IoError);
}
