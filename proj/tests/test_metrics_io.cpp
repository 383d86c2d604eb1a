// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "dpnp/errors.hpp"
#include "dpnp/metrics_io.hpp"
#include "test_util.hpp"

using namespace dpnp;

TEST(Metrics, SnrExamples) {
    const Tensor ref({2, 4, 4}, 1.0);
    EXPECT_NEAR(snr(ref, Tensor({2, 4, 4}, 1.1)), 20.0, 1e-9);
    EXPECT_EQ(snr(ref, ref), std::numeric_limits<double>::infinity());
    const Tensor a = testutil::random_tensor({1, 8, 8}, 1);
    const Tensor b = testutil::random_tensor({1, 8, 8}, 2);
    double num = 0.0, den = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        num += a.values()[n] * a.values()[n];
        den += (a.values()[n] - b.values()[n]) * (a.values()[n] - b.values()[n]);
    }
    EXPECT_NEAR(snr(a, b), 10.0 * std::log10(num / den), 1e-12);
    for (int k = 0; k < 100; ++k) {
        const Tensor r = testutil::random_tensor({3, 7, 5}, 100 + k, -1.0, 1.0);
        const Tensor e = testutil::random_tensor({3, 7, 5}, 300 + k, -1.0, 1.0);
        double rr = 0.0, dd = 0.0;
        for (std::size_t n = 0; n < r.size(); ++n) {
            rr += r.values()[n] * r.values()[n];
            dd += (r.values()[n] - e.values()[n]) * (r.values()[n] - e.values()[n]);
        }
        EXPECT_NEAR(snr(r, e), 10.0 * std::log10(rr / dd), 1e-10);
    }
    EXPECT_THROW(snr(a, Tensor({1, 8, 7})), ShapeMismatch);
}

TEST(Metrics, PsnrExamples) {
    const Tensor ref({3, 4, 4}, 0.0);
    EXPECT_NEAR(psnr(ref, Tensor({3, 4, 4}, 1.0)), 0.0, 1e-12);
    EXPECT_NEAR(psnr(ref, Tensor({3, 4, 4}, 0.1)), 20.0, 1e-9);
    EXPECT_NEAR(psnr(ref, Tensor({3, 4, 4}, 2.0), 2.0), 0.0, 1e-12);
}

TEST(Metrics, SsimProperties) {
    const Tensor a = testutil::random_tensor({3, 32, 32}, 3);
    const Tensor b = testutil::random_tensor({3, 32, 32}, 4);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
    EXPECT_LT(ssim(a, b), 0.5);
    Tensor noisy = a;
    for (std::size_t n = 0; n < noisy.size(); ++n) noisy.values()[n] += 0.05 * (b.values()[n] - 0.5);
    const double s = ssim(a, noisy);
    EXPECT_GT(s, ssim(a, b));
    EXPECT_LT(s, 1.0);
}

TEST(Metrics, SsimConstantImages) {
    // Zero variance leaves the luminance term only.
    const double mu1 = 0.3, mu2 = 0.6, c1 = 0.01 * 0.01;
    const double expect = (2.0 * mu1 * mu2 + c1) / (mu1 * mu1 + mu2 * mu2 + c1);
    EXPECT_NEAR(ssim(Tensor({1, 20, 20}, mu1), Tensor({1, 20, 20}, mu2)), expect, 1e-12);
    // Smaller than the window.
    EXPECT_NEAR(ssim(Tensor({1, 6, 6}, mu1), Tensor({1, 6, 6}, mu2)), expect, 1e-12);
}

TEST(Metrics, ReportPerChannel) {
    const Tensor a = testutil::random_tensor({3, 16, 16}, 5);
    const Tensor b = testutil::random_tensor({3, 16, 16}, 6);
    const MetricReport r = compute_metrics(a, b);
    ASSERT_EQ(r.channel_psnr.size(), 3u);
    EXPECT_EQ(r.psnr, psnr(a, b));
    EXPECT_EQ(r.snr, snr(a, b));
    EXPECT_EQ(r.ssim, ssim(a, b));
}

TEST(ImageIo, PngRoundTrip) {
    const auto dir = testutil::temp_dir("png");
    for (int channels : {1, 3}) {
        for (int depth : {8, 16}) {
            const double levels = depth == 8 ? 255.0 : 65535.0;
            Tensor t({channels, 9, 7});
            for (std::size_t n = 0; n < t.size(); ++n) {
                t.values()[n] = std::round(levels * ((n * 37) % 101) / 100.0) / levels;
            }
            const auto path = dir / ("img" + std::to_string(channels) + "_" + std::to_string(depth) + ".png");
            write_image(path, t, depth);
            EXPECT_TRUE(bitwise_equal(read_image(path), t));
        }
    }
    // Unquantized values come back within half a level.
    const Tensor raw = testutil::random_tensor({3, 6, 6}, 8);
    for (int depth : {8, 16}) {
        write_image(dir / "q.png", raw, depth);
        const Tensor q = read_image(dir / "q.png");
        const double half = 0.5 / (depth == 8 ? 255.0 : 65535.0);
        for (std::size_t n = 0; n < q.size(); ++n) {
            EXPECT_LE(std::abs(q.values()[n] - raw.values()[n]), half + 1e-15);
        }
    }
    Tensor out({1, 2, 2}, 2.0);
    out(0, 0, 0) = -1.0;
    write_image(dir / "clamp.png", out);
    const Tensor back = read_image(dir / "clamp.png");
    EXPECT_EQ(back(0, 0, 0), 0.0);
    EXPECT_EQ(back(0, 1, 1), 1.0);
    EXPECT_THROW(read_image(dir / "missing.png"), IoError);
    {
        std::ofstream bad(dir / "bad.png");
        bad << "not a png";
    }
    EXPECT_THROW(read_image(dir / "bad.png"), FormatError);
}

TEST(ArrayIo, RoundTripAndErrors) {
    const auto dir = testutil::temp_dir("raw");
    Tensor t({2, 5, 3});
    for (std::size_t n = 0; n < t.size(); ++n) t.values()[n] = static_cast<float>(0.1 * n - 1.0);
    write_array(dir / "a.raw", t);
    EXPECT_TRUE(bitwise_equal(read_array(dir / "a.raw"), t));

    const auto bytes = encode_array(t);
    const std::string header = "2 5 3 f32-le\n";
    ASSERT_GE(bytes.size(), header.size());
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + static_cast<long>(header.size())), header);
    EXPECT_EQ(bytes.size(), header.size() + 4 * t.size());

    auto truncated = bytes;
    truncated.pop_back();
    try {
        decode_array(truncated);
        ADD_FAILURE() << "truncated array accepted";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("byte"), std::string::npos);
    }
    auto trailing = bytes;
    trailing.push_back(0);
    EXPECT_THROW(decode_array(trailing), FormatError);
    const std::string bad = "2 5 f32-le\n";
    EXPECT_THROW(decode_array(std::vector<std::uint8_t>(bad.begin(), bad.end())), FormatError);
}

TEST(ArrayIo, Sidecar) {
    const auto dir = testutil::temp_dir("sidecar");
    const Tensor t = testutil::random_tensor({1, 4, 4}, 7);
    write_array_with_sidecar(dir / "v.raw", t);
    // The summary describes the stored single-precision values.
    const Tensor stored = read_array(dir / "v.raw");
    std::ifstream in(dir / "v.raw.manifest");
    std::string text((std::istreambuf_iterator<char>(in)), {});
    EXPECT_NE(text.find("shape = 1 4 4"), std::string::npos) << text;
    const auto [lo, hi] = std::minmax_element(stored.values().begin(), stored.values().end());
    std::ostringstream mm;
    mm.precision(17);
    mm << "min = " << *lo;
    EXPECT_NE(text.find(mm.str()), std::string::npos) << text;
    mm.str("");
    mm << "max = " << *hi;
    EXPECT_NE(text.find(mm.str()), std::string::npos) << text;
    EXPECT_NE(text.find("sha256 = " + sha256_file(dir / "v.raw")), std::string::npos) << text;
}

TEST(Checksum, KnownDigest) {
    const std::string abc = "abc";
    EXPECT_EQ(sha256_hex({abc.begin(), abc.end()}),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
