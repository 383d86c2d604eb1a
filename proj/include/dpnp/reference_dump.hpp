// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

/**
 * @file reference_dump.hpp
 * @brief Reference forward passes exported next to a weight file.
 *
 * The dump is a JSON-lines index. Each line names one (input, output) pair
 * of raw f32 arrays, relative to the index file, with their checksums:
 *
 *   {"input": "pair0.in.raw", "output": "pair0.out.raw",
 *    "input_sha256": "...", "output_sha256": "..."}
 */

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dpnp/denoiser.hpp"
#include "dpnp/tensor.hpp"

namespace dpnp {

struct ReferencePair {
    Tensor input;
    Tensor output;
};

/// Writes the arrays as <stem>.<k>.in.raw / <stem>.<k>.out.raw beside the index.
void write_reference_dump(const std::filesystem::path& index, const std::vector<ReferencePair>& pairs);
/// Throws IoError for missing files and FormatError for malformed lines or
/// checksum mismatches.
std::vector<ReferencePair> read_reference_dump(const std::filesystem::path& index);

/// Largest absolute difference between the network output and the dumped
/// output over all pairs.
double reference_max_abs_error(const DenoiserGraph& g, const std::vector<ReferencePair>& pairs,
                               int workers = 1);

}  // namespace dpnp
