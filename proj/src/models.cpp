// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dpnp/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "dpnp/errors.hpp"
#include "dpnp/metrics_io.hpp"
#include "dpnp/noise.hpp"

namespace dpnp {

// --- kernels and masks ---

ConvKernel motion_blur_kernel(int length) {
    if (length < 1 || length % 2 == 0) throw InvalidArgument("blur length must be odd and positive");
    std::vector<double> taps(static_cast<std::size_t>(length) * length, 0.0);
    for (int a = 0; a < length; ++a) taps[static_cast<std::size_t>(a) * length + a] = 1.0 / length;
    return make_kernel2d(length, length, std::move(taps));
}

int default_blur_length(int rows) {
    return std::max(3, 2 * static_cast<int>(std::lround(rows / 64.0)) + 1);
}

ConvKernel parse_kernel(const std::string& text) {
    std::istringstream in(text);
    int ly = 0, lx = 0;
    if (!(in >> ly >> lx) || ly < 1 || lx < 1) throw FormatError("kernel header must be 'Ly Lx'");
    std::vector<double> taps(static_cast<std::size_t>(ly) * lx);
    for (std::size_t n = 0; n < taps.size(); ++n) {
        if (!(in >> taps[n])) {
            throw FormatError("kernel has " + std::to_string(n) + " of " +
                              std::to_string(taps.size()) + " values");
        }
    }
    std::string extra;
    if (in >> extra) throw FormatError("trailing data after kernel values");
    const double mass = std::accumulate(taps.begin(), taps.end(), 0.0);
    if (!(std::abs(mass) > 0.0) || !std::isfinite(mass)) throw FormatError("kernel mass must be nonzero");
    for (double& t : taps) t /= mass;
    return make_kernel2d(ly, lx, std::move(taps));
}

ConvKernel read_kernel(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return parse_kernel(std::string(bytes.begin(), bytes.end()));
}

Tensor random_mask(int rows, int cols, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw InvalidArgument("observed fraction must lie in (0, 1]");
    }
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    const NoiseStream u(seed, NoiseTag::Mask);
    std::vector<std::pair<double, std::size_t>> order(n);
    for (std::size_t p = 0; p < n; ++p) order[p] = {u.uniform(0, p), p};
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end());
    Tensor m(Shape{1, rows, cols});
    for (std::size_t k = 0; k < keep; ++k) m.values()[order[k].second] = 1.0;
    return m;
}

Tensor parse_mask_rle(const std::string& text) {
    std::istringstream in(text);
    int rows = 0, cols = 0;
    if (!(in >> rows >> cols) || rows < 1 || cols < 1) throw FormatError("mask header must be 'N_y N_x'");
    Tensor m(Shape{1, rows, cols});
    std::size_t pos = 0;
    double value = 0.0;
    long long run = 0;
    while (in >> run) {
        if (run < 0 || pos + static_cast<std::size_t>(run) > m.size()) {
            throw FormatError("mask runs exceed " + std::to_string(m.size()) + " pixels");
        }
        std::fill_n(m.values().begin() + static_cast<std::ptrdiff_t>(pos), run, value);
        pos += static_cast<std::size_t>(run);
        value = 1.0 - value;
    }
    if (!in.eof()) throw FormatError("non-numeric mask run");
    if (pos != m.size()) {
        throw FormatError("mask runs cover " + std::to_string(pos) + " of " +
                          std::to_string(m.size()) + " pixels");
    }
    return m;
}

std::string encode_mask_rle(const Tensor& mask) {
    std::ostringstream out;
    out << mask.rows() << ' ' << mask.cols() << '\n';
    double value = 0.0;
    long long run = 0;
    bool first = true;
    auto flush = [&] {
        out << (first ? "" : " ") << run;
        first = false;
    };
    const std::size_t n = static_cast<std::size_t>(mask.rows()) * mask.cols();
    for (std::size_t p = 0; p < n; ++p) {
        const double v = mask.values()[p] != 0.0 ? 1.0 : 0.0;
        if (v != value) {
            flush();
            run = 0;
            value = v;
        }
        ++run;
    }
    flush();
    out << '\n';
    return out.str();
}

Tensor read_mask(const std::filesystem::path& path) {
    if (path.extension() == ".png") {
        const Tensor img = read_image(path);
        Tensor m(Shape{1, img.rows(), img.cols()});
        for (int i = 0; i < img.rows(); ++i)
            for (int j = 0; j < img.cols(); ++j) m(0, i, j) = img(0, i, j) > 0.5 ? 1.0 : 0.0;
        return m;
    }
    const auto bytes = read_file_bytes(path);
    return parse_mask_rle(std::string(bytes.begin(), bytes.end()));
}

Tensor synthetic_image(int size, int channels) {
    if (size < 4 || channels < 1) throw InvalidArgument("synthetic image too small");
    Tensor x(Shape{channels, size, size});
    const double s = size;
    struct Disk {
        double ci, cj, r;
        double color[3];
    };
    const Disk disks[] = {{0.35 * s, 0.40 * s, 0.20 * s, {0.90, 0.30, 0.20}},
                          {0.70 * s, 0.72 * s, 0.15 * s, {0.95, 0.90, 0.30}}};
    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            double px[3] = {0.2 + 0.5 * j / s, 0.3 + 0.4 * i / s, 0.6 - 0.3 * (i + j) / (2.0 * s)};
            if (i >= 0.55 * s && i < 0.85 * s && j >= 0.15 * s && j < 0.50 * s) {
                px[0] = 0.10;
                px[1] = 0.60;
                px[2] = 0.90;
            }
            for (const Disk& d : disks) {
                const double di = i - d.ci, dj = j - d.cj;
                if (di * di + dj * dj < d.r * d.r) std::copy(d.color, d.color + 3, px);
            }
            for (int c = 0; c < channels; ++c) x(c, i, j) = std::clamp(px[c % 3], 0.05, 0.95);
        }
    }
    return x;
}

// --- synthesis ---

InverseProblem synthesize_observations(const Tensor& truth, const ProblemSpec& spec) {
    for (double v : truth.values()) {
        if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("ground truth must lie in [0, 1]");
    }
    InverseProblem p;
    p.task = spec.task;
    p.shape = truth.shape();
    const int rows = truth.rows(), cols = truth.cols();
    if (spec.task == Task::InpaintGauss) {
        p.mask = spec.mask ? *spec.mask : random_mask(rows, cols, spec.observed_fraction, spec.seed);
        if (p.mask.rows() != rows || p.mask.cols() != cols) throw ShapeMismatch("mask size");
        p.forward = LocalizedOp::mask(p.mask);
    } else {
        p.forward = LocalizedOp::blur(spec.kernel ? *spec.kernel
                                                  : motion_blur_kernel(default_blur_length(rows)));
    }
    const Tensor hx = p.forward.forward_serial(truth);
    p.y = Tensor(hx.shape());
    if (spec.task == Task::DeconvPoisson) {
        if (!(spec.eta > 1.0)) throw InvalidArgument("Poisson scale must exceed 1");
        p.eta = spec.eta;
        for (std::size_t n = 0; n < hx.size(); ++n) {
            PhiloxEngine eng(spec.seed, static_cast<std::uint32_t>(NoiseTag::Poisson), n);
            const double mean = spec.eta * std::max(hx.values()[n], 0.0);
            p.y.values()[n] = mean > 0.0 ? static_cast<double>(std::poisson_distribution<long long>(mean)(eng))
                                         : 0.0;
        }
        return p;
    }
    if (spec.sigma2) {
        p.sigma2 = *spec.sigma2;
    } else {
        const double snr = spec.input_snr_db.value_or(spec.task == Task::InpaintGauss ? 15.0 : 25.0);
        double energy = 0.0;
        for (double v : hx.values()) energy += v * v;
        p.sigma2 = energy / (static_cast<double>(hx.size()) * std::pow(10.0, snr / 10.0));
    }
    if (p.sigma2 < 0.0) throw InvalidArgument("noise variance must be nonnegative");
    const NoiseStream noise(spec.seed, NoiseTag::Observation);
    const double sd = std::sqrt(p.sigma2);
    for (std::size_t n = 0; n < hx.size(); ++n) {
        p.y.values()[n] = sd > 0.0 ? hx.values()[n] + sd * noise.normal(0, n) : hx.values()[n];
    }
    return p;
}

// --- initialization ---

namespace {

double bspline3(double u) {
    u = std::abs(u);
    if (u < 1.0) return 2.0 / 3.0 - u * u + 0.5 * u * u * u;
    if (u < 2.0) return (2.0 - u) * (2.0 - u) * (2.0 - u) / 6.0;
    return 0.0;
}

// Separable zero-padded smoothing of every channel with taps w[-r..r].
Tensor smooth(const Tensor& x, const std::vector<double>& w) {
    const int r = static_cast<int>(w.size() / 2);
    Tensor tmp(x.shape()), out(x.shape());
    for (int c = 0; c < x.channels(); ++c) {
        for (int i = 0; i < x.rows(); ++i) {
            for (int j = 0; j < x.cols(); ++j) {
                double acc = 0.0;
                for (int d = -r; d <= r; ++d) {
                    const int jj = j + d;
                    if (jj >= 0 && jj < x.cols()) acc += w[d + r] * x(c, i, jj);
                }
                tmp(c, i, j) = acc;
            }
        }
        for (int i = 0; i < x.rows(); ++i) {
            for (int j = 0; j < x.cols(); ++j) {
                double acc = 0.0;
                for (int d = -r; d <= r; ++d) {
                    const int ii = i + d;
                    if (ii >= 0 && ii < x.rows()) acc += w[d + r] * tmp(c, ii, j);
                }
                out(c, i, j) = acc;
            }
        }
    }
    return out;
}

}  // namespace

Tensor spline_fill(const Tensor& y, const Tensor& mask) {
    if (mask.rows() != y.rows() || mask.cols() != y.cols()) throw ShapeMismatch("mask size");
    const int C = y.channels();
    Tensor my(y.shape()), m(Shape{1, y.rows(), y.cols()});
    double observed = 0.0, total = 0.0;
    for (int i = 0; i < y.rows(); ++i) {
        for (int j = 0; j < y.cols(); ++j) {
            const double k = mask(0, i, j) != 0.0 ? 1.0 : 0.0;
            m(0, i, j) = k;
            observed += k;
            for (int c = 0; c < C; ++c) {
                my(c, i, j) = k * y(c, i, j);
                total += my(c, i, j);
            }
        }
    }
    Tensor out(y.shape());
    if (observed == 0.0) return out;
    const double fallback = total / (observed * C);
    std::vector<bool> done(static_cast<std::size_t>(y.rows()) * y.cols(), false);
    const int max_scale = std::max(y.rows(), y.cols());
    for (int s = 1;; s *= 2) {
        std::vector<double> w(4 * s + 1);
        for (int d = -2 * s; d <= 2 * s; ++d) w[d + 2 * s] = bspline3(static_cast<double>(d) / s);
        const Tensor num = smooth(my, w);
        const Tensor den = smooth(m, w);
        bool all = true;
        for (int i = 0; i < y.rows(); ++i) {
            for (int j = 0; j < y.cols(); ++j) {
                const std::size_t p = static_cast<std::size_t>(i) * y.cols() + j;
                if (done[p]) continue;
                if (den(0, i, j) > 1e-8) {
                    for (int c = 0; c < C; ++c) out(c, i, j) = num(c, i, j) / den(0, i, j);
                    done[p] = true;
                } else if (s >= max_scale) {
                    for (int c = 0; c < C; ++c) out(c, i, j) = fallback;
                    done[p] = true;
                } else {
                    all = false;
                }
            }
        }
        if (all) break;
    }
    return out;
}

Tensor initial_state(const InverseProblem& problem) {
    if (problem.task == Task::InpaintGauss) return spline_fill(problem.y, problem.mask);
    return Tensor(problem.shape);
}

// --- posterior wiring ---

Posterior potential_terms(const InverseProblem& problem, const Prior& prior) {
    Posterior post;
    post.shape = problem.shape;
    const bool poisson = problem.task == Task::DeconvPoisson;
    if (prior.kind == PriorKind::PnP) {
        if (!prior.denoiser) throw UnsupportedCombination("PnP prior needs a denoiser");
        if (prior.denoiser->channels() != problem.shape.channels) {
            throw ChannelMismatch("denoiser has " + std::to_string(prior.denoiser->channels()) +
                                  " channels, image has " + std::to_string(problem.shape.channels));
        }
        post.denoiser = prior.denoiser;
        post.x_update = XUpdate::PnpUla;
    } else {
        if (prior.denoiser) throw UnsupportedCombination("TV prior does not take a denoiser");
        if (!(prior.beta > 0.0)) throw InvalidArgument("TV weight must be positive");
        post.x_update = XUpdate::Psgla;
    }
    const double h_norm_sq = op_norm_sq(problem.forward, problem.shape, 1);
    if (!poisson) {
        if (!(problem.sigma2 > 0.0)) throw InvalidArgument("noise variance must be positive");
        post.f1 = GaussianTerm{problem.forward, std::make_shared<const Tensor>(problem.y), problem.sigma2};
        post.L = h_norm_sq / problem.sigma2;
    } else {
        Coupling kl;
        kl.op = problem.forward.scaled(problem.eta);
        kl.prox.kind = ProxSpec::Kind::KLPoisson;
        kl.data = std::make_shared<const Tensor>(problem.y);
        kl.norm_sq = problem.eta * problem.eta * h_norm_sq;
        post.couplings.push_back(std::move(kl));
        if (prior.kind == PriorKind::PnP) {
            Coupling pos;
            pos.op = LocalizedOp::identity();
            pos.prox.kind = ProxSpec::Kind::Nonneg;
            pos.norm_sq = 1.0;
            post.couplings.push_back(std::move(pos));
        }
    }
    if (prior.kind == PriorKind::TV) {
        Coupling tv;
        tv.op = LocalizedOp::grad2d();
        tv.prox.kind = ProxSpec::Kind::GroupL21;
        tv.prox.weight = prior.beta;
        tv.norm_sq = 8.0;
        post.couplings.push_back(std::move(tv));
    }
    return post;
}

ProblemConstants problem_constants(const InverseProblem& problem, const Prior& prior) {
    ProblemConstants k;
    k.sigma2 = problem.sigma2;
    k.eta = problem.eta;
    k.h_norm_sq = op_norm_sq(problem.forward, problem.shape, 1);
    k.d_norm_sq = 8.0;
    k.L_D = prior.denoiser ? prior.denoiser->lipschitz_bound : 0.0;
    return k;
}

// --- assumption checks ---

bool AssumptionReport::ok() const {
    return std::all_of(items.begin(), items.end(), [](const AssumptionItem& i) { return i.ok; });
}

const AssumptionItem* AssumptionReport::find(const std::string& name) const {
    for (const auto& i : items) {
        if (i.name == name) return &i;
    }
    return nullptr;
}

namespace {

Tensor serial_gradient(const InverseProblem& p, const Tensor& x) {
    Tensor out;
    run_spmd(1, [&](WorkerCtx& ctx) {
        BlockTensor xb(0, x.shape(), {0, x.rows()}, x);
        halo_exchange(ctx, xb, p.forward.forward_halo());
        const BlockTensor yb(0, p.y.shape(), {0, p.y.rows()}, p.y);
        out = grad_gaussian_likelihood(ctx, xb, yb, p.forward, p.sigma2).data();
    });
    return out;
}

double norm(const Tensor& t) {
    double acc = 0.0;
    for (double v : t.values()) acc += v * v;
    return std::sqrt(acc);
}

double pixel_potential(const InverseProblem& p, double hx, double y) {
    if (p.task != Task::DeconvPoisson) return (y - hx) * (y - hx) / (2.0 * p.sigma2);
    const double m = p.eta * hx;
    return m - (y > 0.0 ? y * std::log(m) - y * std::log(y) + y : 0.0);
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

}  // namespace

AssumptionReport check_assumptions(const InverseProblem& problem, const Prior& prior, int workers,
                                   std::uint64_t seed) {
    AssumptionReport rep;
    const Shape shape = problem.shape;
    const NoiseStream u(seed, NoiseTag::Lipschitz);
    auto random_image = [&](std::uint64_t t, double lo) {
        Tensor x(shape);
        for (std::size_t n = 0; n < x.size(); ++n) x.values()[n] = lo + (1.0 - lo) * u.uniform(t, n);
        return x;
    };

    // A1: Lipschitz gradient of the Gaussian data term.
    {
        AssumptionItem it{"A1", true, ""};
        if (problem.task == Task::DeconvPoisson) {
            it.detail = "f1 = 0";
        } else {
            const double bound = op_norm_sq(problem.forward, shape, seed) / problem.sigma2;
            const Tensor x1 = random_image(0, 0.0);
            Tensor x2 = random_image(1, 0.0);
            double worst = 0.0;
            const Tensor g1 = serial_gradient(problem, x1);
            for (int k = 0; k < 6; ++k) {
                const Tensor g2 = serial_gradient(problem, x2);
                Tensor dx(shape), dg(shape);
                for (std::size_t n = 0; n < dx.size(); ++n) {
                    dx.values()[n] = x2.values()[n] - x1.values()[n];
                    dg.values()[n] = g2.values()[n] - g1.values()[n];
                }
                const double dn = norm(dx), gn = norm(dg);
                if (dn == 0.0 || gn == 0.0) break;
                worst = std::max(worst, gn / dn);
                // Move the probe along the gradient difference.
                for (std::size_t n = 0; n < dx.size(); ++n) {
                    x2.values()[n] = x1.values()[n] + dg.values()[n] * (dn / gn);
                }
            }
            it.ok = worst <= bound * (1.0 + 1e-3);
            it.detail = "finite-difference ratio " + fmt(worst) + " vs ||H||^2/sigma2 " + fmt(bound);
        }
        rep.items.push_back(it);
    }

    // A3: stencil halos versus block size.
    std::optional<Partition> part;
    {
        AssumptionItem it{"A3", true, ""};
        int halo = 0;
        auto take = [&](const LocalizedOp& op) {
            const HaloWidths f = op.forward_halo(), a = op.adjoint_halo();
            halo = std::max({halo, f.before, f.after, a.before, a.after});
        };
        take(problem.forward);
        if (prior.kind == PriorKind::TV) take(LocalizedOp::grad2d());
        try {
            part = make_partition(shape.rows, workers, 0);
        } catch (const Error& e) {
            it.ok = false;
            it.detail = e.what();
        }
        if (part) {
            it.ok = halo < part->min_block();
            it.detail = "halo " + std::to_string(halo) + ", smallest block " +
                        std::to_string(part->min_block()) + " rows";
            if (it.ok) part = make_partition(shape.rows, workers, halo);
        }
        rep.items.push_back(it);
        if (!it.ok) part.reset();
    }

    // A4: per-block likelihood terms add up to the global value.
    {
        AssumptionItem it{"A4", true, ""};
        if (!part) {
            it.ok = false;
            it.detail = "no valid partition";
        } else {
            const Tensor x = random_image(2, 0.05);
            const Tensor hx = problem.forward.forward_serial(x);
            double global = 0.0;
            for (std::size_t n = 0; n < hx.size(); ++n) {
                global += pixel_potential(problem, hx.values()[n], problem.y.values()[n]);
            }
            const auto blocks = scatter_global(x, *part);
            std::vector<double> local(workers, 0.0);
            run_spmd(workers, [&](WorkerCtx& ctx) {
                BlockTensor xb = blocks[ctx.rank()];
                const BlockTensor h = problem.forward.forward(ctx, xb);
                const Tensor yb = slice_rows(problem.y, xb.range());
                double acc = 0.0;
                for (std::size_t n = 0; n < yb.size(); ++n) {
                    acc += pixel_potential(problem, h.data().values()[n], yb.values()[n]);
                }
                local[ctx.rank()] = acc;
            });
            const double sum = std::accumulate(local.begin(), local.end(), 0.0);
            const double rel = std::abs(sum - global) / std::max(std::abs(global), 1e-300);
            it.ok = rel <= 1e-12;
            it.detail = "relative gap " + fmt(rel);
        }
        rep.items.push_back(it);
    }

    // A5: the prior's halo accounting matches a live run on two workers.
    {
        AssumptionItem it{"A5", true, ""};
        SpmdStats st;
        int expected = 0;
        if (prior.kind == PriorKind::PnP && prior.denoiser) {
            const DenoiserGraph& g = *prior.denoiser;
            const int align = g.row_alignment();
            const Tensor x(Shape{g.channels(), 2 * g.min_block_rows(), std::max(8, 2 * align)}, 0.5);
            apply_denoiser_distributed(g, x, 2, &st);
            expected = g.comm_phases();
        } else {
            const Shape s{shape.channels, 4, 8};
            const Partition p = make_partition(4, 2, 1);
            auto blocks = scatter_global(Tensor(s, 0.5), p);
            run_spmd(
                2, [&](WorkerCtx& ctx) { grad2d_forward(ctx, blocks[ctx.rank()]); }, &st);
            expected = 1;
        }
        const long long measured = st.per_rank.at(0).halo_phases;
        it.ok = measured == expected;
        it.detail = "expected " + std::to_string(expected) + " phases, measured " + std::to_string(measured);
        rep.items.push_back(it);
    }
    return rep;
}

}  // namespace dpnp
