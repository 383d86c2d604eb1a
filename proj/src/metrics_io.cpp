// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dpnp/metrics_io.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "dpnp/errors.hpp"

namespace dpnp {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw ShapeMismatch("metric operands differ in shape");
}

double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

double sum_sq(std::span<const double> a) {
    double acc = 0.0;
    for (double v : a) acc += v * v;
    return acc;
}

double snr_of(std::span<const double> ref, std::span<const double> est) {
    const double err = sum_sq_diff(ref, est);
    if (err == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(sum_sq(ref) / err);
}

double psnr_of(std::span<const double> ref, std::span<const double> est, double peak) {
    const double err = sum_sq_diff(ref, est);
    if (err == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak * static_cast<double>(ref.size()) / err);
}

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(size);
    const double c = 0.5 * (size - 1);
    double total = 0.0;
    for (int i = 0; i < size; ++i) {
        w[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
        total += w[i];
    }
    for (double& v : w) v /= total;
    return w;
}

double ssim_plane(std::span<const double> x, std::span<const double> y, int rows, int cols,
                  double peak) {
    int win = std::min({11, rows, cols});
    if (win % 2 == 0) win -= 1;
    const std::vector<double> g = gaussian_window(win, 1.5);
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    double total = 0.0;
    long long count = 0;
    for (int i = 0; i + win <= rows; ++i) {
        for (int j = 0; j + win <= cols; ++j) {
            double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
            for (int a = 0; a < win; ++a) {
                for (int b = 0; b < win; ++b) {
                    const double w = g[a] * g[b];
                    const double xv = x[static_cast<std::size_t>(i + a) * cols + j + b];
                    const double yv = y[static_cast<std::size_t>(i + a) * cols + j + b];
                    mx += w * xv;
                    my += w * yv;
                    sxx += w * xv * xv;
                    syy += w * yv * yv;
                    sxy += w * xv * yv;
                }
            }
            const double vx = sxx - mx * mx;
            const double vy = syy - my * my;
            const double cxy = sxy - mx * my;
            total += ((2 * mx * my + c1) * (2 * cxy + c2)) /
                     ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

}  // namespace

double snr(const Tensor& ref, const Tensor& est) {
    require_same_shape(ref, est);
    return snr_of(ref.values(), est.values());
}

double psnr(const Tensor& ref, const Tensor& est, double peak) {
    require_same_shape(ref, est);
    return psnr_of(ref.values(), est.values(), peak);
}

double ssim(const Tensor& ref, const Tensor& est, double peak) {
    require_same_shape(ref, est);
    double acc = 0.0;
    for (int c = 0; c < ref.channels(); ++c) {
        acc += ssim_plane(ref.plane(c), est.plane(c), ref.rows(), ref.cols(), peak);
    }
    return acc / ref.channels();
}

MetricReport compute_metrics(const Tensor& ref, const Tensor& est, double peak) {
    require_same_shape(ref, est);
    MetricReport r;
    r.snr = snr(ref, est);
    r.psnr = psnr(ref, est, peak);
    r.ssim = ssim(ref, est, peak);
    for (int c = 0; c < ref.channels(); ++c) {
        r.channel_snr.push_back(snr_of(ref.plane(c), est.plane(c)));
        r.channel_psnr.push_back(psnr_of(ref.plane(c), est.plane(c), peak));
        r.channel_ssim.push_back(ssim_plane(ref.plane(c), est.plane(c), ref.rows(), ref.cols(), peak));
    }
    return r;
}

// --- PNG ---

namespace {

struct PngReadState {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReadState() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

struct PngWriteState {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriteState() { png_destroy_write_struct(&png, info ? &info : nullptr); }
};

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};

}  // namespace

Tensor read_image(const std::filesystem::path& path) {
    std::unique_ptr<FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path.string());
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw FormatError(path.string() + ": not a PNG file (at byte 0)");
    }
    PngReadState st;
    st.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!st.png) throw IoError("libpng initialisation failed");
    st.info = png_create_info_struct(st.png);
    if (!st.info) throw IoError("libpng initialisation failed");

    png_uint_32 width = 0, height = 0;
    int depth = 0, color = 0;
    if (setjmp(png_jmpbuf(st.png))) throw FormatError(path.string() + ": corrupt PNG header");
    png_init_io(st.png, fp.get());
    png_set_sig_bytes(st.png, 8);
    png_read_info(st.png, st.info);
    png_get_IHDR(st.png, st.info, &width, &height, &depth, &color, nullptr, nullptr, nullptr);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(st.png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(st.png);
    if (png_get_valid(st.png, st.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(st.png);
    if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(st.png, st.info, PNG_INFO_tRNS)) {
        png_set_strip_alpha(st.png);
    }
    png_read_update_info(st.png, st.info);
    const int channels = png_get_channels(st.png, st.info);
    const int out_depth = png_get_bit_depth(st.png, st.info);
    const std::size_t rowbytes = png_get_rowbytes(st.png, st.info);

    std::vector<unsigned char> buffer(rowbytes * height);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 i = 0; i < height; ++i) rows[i] = buffer.data() + i * rowbytes;
    if (setjmp(png_jmpbuf(st.png))) throw FormatError(path.string() + ": corrupt PNG data");
    png_read_image(st.png, rows.data());
    png_read_end(st.png, nullptr);

    if (channels != 1 && channels != 3) {
        throw FormatError(path.string() + ": unsupported channel count " + std::to_string(channels));
    }
    Tensor t({channels, static_cast<int>(height), static_cast<int>(width)});
    const double maxval = out_depth == 16 ? 65535.0 : 255.0;
    for (png_uint_32 i = 0; i < height; ++i) {
        const unsigned char* row = rows[i];
        for (png_uint_32 j = 0; j < width; ++j) {
            for (int c = 0; c < channels; ++c) {
                const std::size_t k = static_cast<std::size_t>(j) * channels + c;
                const double v = out_depth == 16 ? (row[2 * k] << 8 | row[2 * k + 1]) : row[k];
                t(c, static_cast<int>(i), static_cast<int>(j)) = v / maxval;
            }
        }
    }
    return t;
}

void write_image(const std::filesystem::path& path, const Tensor& image, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw InvalidArgument("PNG bit depth must be 8 or 16");
    if (image.channels() != 1 && image.channels() != 3) {
        throw InvalidArgument("PNG output needs 1 or 3 channels");
    }
    const int C = image.channels();
    const int H = image.rows();
    const int W = image.cols();
    const int bytes = bit_depth / 8;
    const double maxval = bit_depth == 16 ? 65535.0 : 255.0;
    std::vector<unsigned char> buffer(static_cast<std::size_t>(H) * W * C * bytes);
    for (int i = 0; i < H; ++i) {
        for (int j = 0; j < W; ++j) {
            for (int c = 0; c < C; ++c) {
                double v = image(c, i, j);
                v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
                const auto q = static_cast<unsigned>(std::lround(v * maxval));
                const std::size_t k = ((static_cast<std::size_t>(i) * W + j) * C + c) * bytes;
                if (bytes == 2) {
                    buffer[k] = static_cast<unsigned char>(q >> 8);
                    buffer[k + 1] = static_cast<unsigned char>(q & 0xff);
                } else {
                    buffer[k] = static_cast<unsigned char>(q);
                }
            }
        }
    }
    std::vector<png_bytep> rows(H);
    for (int i = 0; i < H; ++i) rows[i] = buffer.data() + static_cast<std::size_t>(i) * W * C * bytes;

    std::unique_ptr<FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write " + path.string());
    PngWriteState st;
    st.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!st.png) throw IoError("libpng initialisation failed");
    st.info = png_create_info_struct(st.png);
    if (!st.info) throw IoError("libpng initialisation failed");
    if (setjmp(png_jmpbuf(st.png))) throw IoError("failed writing " + path.string());
    png_init_io(st.png, fp.get());
    png_set_IHDR(st.png, st.info, W, H, bit_depth, C == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(st.png, st.info);
    png_write_image(st.png, rows.data());
    png_write_end(st.png, nullptr);
}

// --- raw arrays ---

std::vector<std::uint8_t> encode_array(const Tensor& t) {
    const std::string header = std::to_string(t.channels()) + " " + std::to_string(t.rows()) + " " +
                               std::to_string(t.cols()) + " f32-le\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(header.size() + 4 * t.size());
    for (double v : t.values()) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
    }
    return out;
}

Tensor decode_array(const std::vector<std::uint8_t>& bytes) {
    const auto nl = std::find(bytes.begin(), bytes.end(), std::uint8_t{'\n'});
    if (nl == bytes.end()) throw FormatError("raw array header missing newline (at byte 0)");
    const std::string header(bytes.begin(), nl);
    std::istringstream in(header);
    long long C = 0, H = 0, W = 0;
    std::string kind, extra;
    if (!(in >> C >> H >> W >> kind) || (in >> extra) || kind != "f32-le" || C < 1 || H < 1 ||
        W < 1) {
        throw FormatError("bad raw array header '" + header + "' (at byte 0)");
    }
    const std::size_t offset = static_cast<std::size_t>(nl - bytes.begin()) + 1;
    const std::size_t count = static_cast<std::size_t>(C * H * W);
    if (bytes.size() != offset + 4 * count) {
        throw FormatError("raw array payload has " + std::to_string(bytes.size() - offset) +
                          " bytes, expected " + std::to_string(4 * count) + " (at byte " +
                          std::to_string(offset) + ")");
    }
    Tensor t({static_cast<int>(C), static_cast<int>(H), static_cast<int>(W)});
    auto vals = t.values();
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits = 0;
        for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(bytes[offset + 4 * i + k]) << (8 * k);
        vals[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    return t;
}

void write_array(const std::filesystem::path& path, const Tensor& t) {
    write_file_bytes(path, encode_array(t));
}

Tensor read_array(const std::filesystem::path& path) {
    try {
        return decode_array(read_file_bytes(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

ArraySummary summarize_array(const Tensor& t) {
    ArraySummary s;
    s.shape = t.shape();
    s.min = std::numeric_limits<double>::infinity();
    s.max = -s.min;
    double sum = 0.0;
    for (double v : t.values()) {
        const double f = static_cast<float>(v);
        s.min = std::min(s.min, f);
        s.max = std::max(s.max, f);
        sum += f;
    }
    if (t.size() == 0) s.min = s.max = 0.0;
    s.mean = t.size() ? sum / static_cast<double>(t.size()) : 0.0;
    s.sha256 = sha256_hex(encode_array(t));
    return s;
}

void write_array_with_sidecar(const std::filesystem::path& path, const Tensor& t) {
    write_array(path, t);
    const ArraySummary s = summarize_array(t);
    std::ostringstream out;
    out << std::setprecision(17);
    out << "file = " << path.filename().string() << "\n";
    out << "shape = " << s.shape.channels << " " << s.shape.rows << " " << s.shape.cols << "\n";
    out << "min = " << s.min << "\n";
    out << "max = " << s.max << "\n";
    out << "mean = " << s.mean << "\n";
    out << "sha256 = " << s.sha256 << "\n";
    const std::string text = out.str();
    write_file_bytes(path.string() + ".manifest", std::vector<std::uint8_t>(text.begin(), text.end()));
}

// --- checksums and files ---

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw IoError("SHA-256 computation failed");
    }
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) {
        out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return out.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file_bytes(path)); }

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace dpnp
