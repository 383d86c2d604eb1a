// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

/**
 * @file metrics_io.hpp
 * @brief Image quality metrics, PNG and raw array I/O, checksums.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dpnp/tensor.hpp"

namespace dpnp {

/// 10 log10(||ref||^2 / ||ref - est||^2); +infinity when est == ref.
double snr(const Tensor& ref, const Tensor& est);
/// 10 log10(peak^2 N / ||ref - est||^2).
double psnr(const Tensor& ref, const Tensor& est, double peak = 1.0);
/// Mean structural similarity: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, valid windows only, averaged over channels. Images smaller
/// than the window use the largest odd window that fits.
double ssim(const Tensor& ref, const Tensor& est, double peak = 1.0);

struct MetricReport {
    double snr = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
    std::vector<double> channel_snr;
    std::vector<double> channel_psnr;
    std::vector<double> channel_ssim;
};

MetricReport compute_metrics(const Tensor& ref, const Tensor& est, double peak = 1.0);

/// PNG (8 or 16 bit, gray or RGB; alpha is dropped), values scaled to [0, 1].
Tensor read_image(const std::filesystem::path& path);
/// Values are clamped to [0, 1] and rounded to the nearest level.
void write_image(const std::filesystem::path& path, const Tensor& image, int bit_depth = 8);

/// Raw planar array: text line "C N_y N_x f32-le\n" then little-endian f32.
void write_array(const std::filesystem::path& path, const Tensor& t);
Tensor read_array(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_array(const Tensor& t);
Tensor decode_array(const std::vector<std::uint8_t>& bytes);

struct ArraySummary {
    Shape shape;
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    std::string sha256;
};

/// Statistics of the values as stored (single precision) and the checksum
/// of the encoded array.
ArraySummary summarize_array(const Tensor& t);

/// Writes the array plus a "key = value" sidecar (path + ".manifest") with
/// shape, min, max, mean and checksum of the stored values.
void write_array_with_sidecar(const std::filesystem::path& path, const Tensor& t);

std::string sha256_hex(const std::vector<std::uint8_t>& bytes);
std::string sha256_file(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace dpnp
