// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dpnp/reference_dump.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "dpnp/errors.hpp"
#include "dpnp/metrics_io.hpp"

namespace dpnp {

void write_reference_dump(const std::filesystem::path& index, const std::vector<ReferencePair>& pairs) {
    const std::filesystem::path dir = index.parent_path();
    const std::string stem = index.stem().string();
    std::ofstream out(index, std::ios::trunc);
    if (!out) throw IoError("cannot write " + index.string());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const std::string in_name = stem + "." + std::to_string(k) + ".in.raw";
        const std::string out_name = stem + "." + std::to_string(k) + ".out.raw";
        const auto in_bytes = encode_array(pairs[k].input);
        const auto out_bytes = encode_array(pairs[k].output);
        write_file_bytes(dir / in_name, in_bytes);
        write_file_bytes(dir / out_name, out_bytes);
        nlohmann::json line = {{"input", in_name},
                               {"output", out_name},
                               {"input_sha256", sha256_hex(in_bytes)},
                               {"output_sha256", sha256_hex(out_bytes)}};
        out << line.dump() << '\n';
    }
    if (!out) throw IoError("cannot write " + index.string());
}

std::vector<ReferencePair> read_reference_dump(const std::filesystem::path& index) {
    std::ifstream in(index);
    if (!in) throw IoError("cannot open " + index.string());
    const std::filesystem::path dir = index.parent_path();
    std::vector<ReferencePair> pairs;
    std::string text;
    int line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = index.string() + ":" + std::to_string(line_no);
        nlohmann::json line;
        try {
            line = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(where + ": " + e.what());
        }
        auto load = [&](const char* key, const char* sum_key) {
            if (!line.contains(key) || !line[key].is_string()) {
                throw FormatError(where + ": missing \"" + std::string(key) + "\"");
            }
            const auto bytes = read_file_bytes(dir / line[key].get<std::string>());
            if (line.contains(sum_key) && line[sum_key].get<std::string>() != sha256_hex(bytes)) {
                throw FormatError(where + ": checksum mismatch for " + line[key].get<std::string>());
            }
            return decode_array(bytes);
        };
        ReferencePair p;
        p.input = load("input", "input_sha256");
        p.output = load("output", "output_sha256");
        if (p.input.shape() != p.output.shape()) throw FormatError(where + ": input and output shapes differ");
        pairs.push_back(std::move(p));
    }
    return pairs;
}

double reference_max_abs_error(const DenoiserGraph& g, const std::vector<ReferencePair>& pairs,
                               int workers) {
    double worst = 0.0;
    for (const auto& p : pairs) {
        const Tensor y = apply_denoiser_distributed(g, p.input, workers);
        for (std::size_t n = 0; n < y.size(); ++n) {
            worst = std::max(worst, std::abs(y.values()[n] - p.output.values()[n]));
        }
    }
    return worst;
}

}  // namespace dpnp
