// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dpnp/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "dpnp/errors.hpp"
#include "dpnp/noise.hpp"

namespace dpnp {

std::string task_name(Task t) {
    switch (t) {
        case Task::InpaintGauss: return "inpaint-gauss";
        case Task::DeconvGauss: return "deconv-gauss";
        case Task::DeconvPoisson: return "deconv-poisson";
    }
    return "unknown";
}

Task parse_task(const std::string& name) {
    if (name == "inpaint-gauss") return Task::InpaintGauss;
    if (name == "deconv-gauss") return Task::DeconvGauss;
    if (name == "deconv-poisson") return Task::DeconvPoisson;
    throw InvalidArgument("unknown task '" + name + "'");
}

std::string prior_name(PriorKind p) { return p == PriorKind::PnP ? "pnp" : "tv"; }

PriorKind parse_prior(const std::string& name) {
    if (name == "pnp") return PriorKind::PnP;
    if (name == "tv") return PriorKind::TV;
    throw InvalidArgument("unknown prior '" + name + "'");
}

// --- step sizes ---

StepsizeCheck validate_stepsizes(const SamplerConfig& cfg, double L, double h2, double L_D) {
    StepsizeCheck out;
    const double prior = cfg.alpha * L_D / (cfg.eps * cfg.eps);
    const double prior_term = (cfg.alpha == 0.0 || L_D == 0.0) ? 0.0 : prior;
    const double lhs1 = 2.0 * (L + h2) + prior_term;
    const double rhs1 = 1.0 / (2.0 * cfg.lambda);
    if (!(lhs1 <= rhs1)) {
        std::ostringstream m;
        m.precision(17);
        m << "2(L + ||H2||^2) + alpha L_D / eps^2 = " << lhs1 << " > 1/(2 lambda) = " << rhs1;
        out.violations.push_back(m.str());
    }
    const double lhs2 = 3.0 * cfg.gamma * (L + h2 + 1.0 / cfg.lambda + prior_term);
    if (!(lhs2 < 1.0)) {
        std::ostringstream m;
        m.precision(17);
        m << "3 gamma (L + ||H2||^2 + 1/lambda + alpha L_D / eps^2) = " << lhs2 << " >= 1";
        out.violations.push_back(m.str());
    }
    out.ok = out.violations.empty();
    return out;
}

namespace {

// gamma (L + h2) < 1 for the projected x-update.
StepsizeCheck validate_psgla(const SamplerConfig& cfg, double L, double h2) {
    StepsizeCheck out;
    const double lhs = cfg.gamma * (L + h2);
    if (!(lhs < 1.0)) {
        std::ostringstream m;
        m.precision(17);
        m << "gamma (L + ||H2||^2) = " << lhs << " >= 1";
        out.violations.push_back(m.str());
    }
    out.ok = out.violations.empty();
    return out;
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& e : v) s += (s.empty() ? "" : "; ") + e;
    return s;
}

}  // namespace

SamplerConfig default_config(Task task, PriorKind prior, const ProblemConstants& k) {
    SamplerConfig c;
    const bool poisson = task == Task::DeconvPoisson;
    if (poisson && !(k.eta > 0.0)) throw InvalidArgument("Poisson scale must be positive");
    if (!poisson && !(k.sigma2 > 0.0)) throw InvalidArgument("noise variance must be positive");
    if (!(k.h_norm_sq > 0.0)) throw InvalidArgument("||H||^2 must be positive");
    const double eta_h = k.eta * k.eta * k.h_norm_sq;
    StepsizeCheck check;
    if (prior == PriorKind::PnP) {
        c.alpha = 1.0;
        const double LD = k.L_D;
        if (!poisson) {
            c.eps = std::sqrt(k.sigma2);
            const double L = k.h_norm_sq / k.sigma2;
            const double p = c.alpha * LD / (c.eps * c.eps);
            c.lambda = 0.99 / (4.0 * L + 2.0 * p);
            c.gamma = 0.99 / (3.0 * (p + L + 1.0 / c.lambda));
            check = validate_stepsizes(c, L, 0.0, LD);
        } else {
            c.eps = 0.05;
            c.rho = {10.0, 1e-3};
            c.kappa = {0.99 * c.rho[0], 0.99 * c.rho[1]};
            const double p = c.alpha * LD / (c.eps * c.eps);
            c.lambda = 0.99 / (4.0 * eta_h / c.rho[0] + 4.0 / c.rho[1] + 2.0 * p);
            c.gamma = 0.99 / (p + eta_h / c.rho[0] + 1.0 / c.rho[1] + 1.0 / c.lambda) / 3.0;
            check = validate_stepsizes(c, 0.0, eta_h / c.rho[0] + 1.0 / c.rho[1], LD);
        }
    } else {
        c.alpha = 0.0;
        if (!poisson) {
            c.beta = 40.0;
            c.rho = {1e-5};
            const double L = k.h_norm_sq / k.sigma2;
            c.gamma = 0.99 / (L + k.d_norm_sq / c.rho[0]);
            c.kappa = {0.99 * c.rho[0] / k.d_norm_sq};
            check = validate_psgla(c, L, k.d_norm_sq / c.rho[0]);
        } else {
            c.beta = 13.0;
            c.rho = {10.0, 1e-3};
            c.gamma = 0.99 / (eta_h / c.rho[0] + k.d_norm_sq / c.rho[1]);
            c.kappa = {0.99 * c.rho[0], 0.99 * c.rho[1]};
            check = validate_psgla(c, 0.0, eta_h / c.rho[0] + k.d_norm_sq / c.rho[1]);
        }
    }
    if (!check.ok || !std::isfinite(c.gamma) || !(c.gamma > 0.0)) {
        throw ConfigInfeasible(task_name(task) + "/" + prior_name(prior) + ": " +
                               (check.ok ? "non-finite step size" : join(check.violations)));
    }
    return c;
}

// --- posterior ---

double Posterior::coupling_curvature(const SamplerConfig& cfg) const {
    double h2 = 0.0;
    for (std::size_t i = 0; i < couplings.size(); ++i) h2 += couplings[i].norm_sq / cfg.rho.at(i);
    return h2;
}

int Posterior::halo() const {
    int h = 0;
    auto take = [&](const LocalizedOp& op) {
        const HaloWidths f = op.forward_halo();
        const HaloWidths a = op.adjoint_halo();
        h = std::max({h, f.before, f.after, a.before, a.after});
    };
    if (f1) take(f1->op);
    for (const auto& c : couplings) take(c.op);
    return h;
}

void check_config(const Posterior& post, const SamplerConfig& cfg) {
    if (cfg.rho.size() != post.couplings.size() || cfg.kappa.size() != post.couplings.size()) {
        throw StepsizeInvalid("expected " + std::to_string(post.couplings.size()) +
                              " coupling parameters (rho, kappa), got " +
                              std::to_string(cfg.rho.size()) + " and " +
                              std::to_string(cfg.kappa.size()));
    }
    for (std::size_t i = 0; i < cfg.rho.size(); ++i) {
        if (!(cfg.rho[i] > 0.0) || !(cfg.kappa[i] > 0.0) || !(cfg.kappa[i] < cfg.rho[i])) {
            std::ostringstream m;
            m << "block " << i << ": need 0 < kappa < rho, got kappa = " << cfg.kappa[i]
              << ", rho = " << cfg.rho[i];
            throw StepsizeInvalid(m.str());
        }
    }
    if (!(cfg.gamma > 0.0) || !std::isfinite(cfg.gamma)) throw StepsizeInvalid("gamma must be positive");
    if (cfg.iterations < 0 || cfg.burn_in < 0) throw StepsizeInvalid("negative iteration count");
    const double h2 = post.coupling_curvature(cfg);
    StepsizeCheck check;
    if (post.x_update == XUpdate::Psgla) {
        check = validate_psgla(cfg, post.L, h2);
    } else {
        const double LD = post.denoiser ? post.denoiser->lipschitz_bound : 0.0;
        if (post.denoiser && !(cfg.eps > 0.0)) throw StepsizeInvalid("eps must be positive");
        if (!(cfg.lambda > 0.0)) throw StepsizeInvalid("lambda must be positive");
        if (std::isfinite(cfg.lambda)) {
            check = validate_stepsizes(cfg, post.L, h2, LD);
        } else {
            // No box term: only the step condition applies.
            SamplerConfig c = cfg;
            c.lambda = std::numeric_limits<double>::infinity();
            check = validate_stepsizes(c, post.L, h2, post.denoiser ? LD : 0.0);
            check.violations.erase(
                std::remove_if(check.violations.begin(), check.violations.end(),
                               [](const std::string& v) { return v.rfind("2(L", 0) == 0; }),
                check.violations.end());
            check.ok = check.violations.empty();
        }
    }
    if (!check.ok) throw StepsizeInvalid(join(check.violations));
}

Partition chain_partition(const Posterior& post, int workers) {
    if (post.denoiser) return denoiser_partition(*post.denoiser, post.shape.rows, workers, post.halo());
    return make_partition(post.shape.rows, workers, post.halo());
}

// --- statistics ---

ChainStats::ChainStats(Shape shape) : mean_(shape), m2_(shape) {}

ChainStats::ChainStats(long long count, Tensor mean, Tensor m2)
    : count_(count), mean_(std::move(mean)), m2_(std::move(m2)) {
    if (mean_.shape() != m2_.shape()) throw ShapeMismatch("mean and m2 shapes differ");
}

const Tensor& ChainStats::mean() const {
    if (count_ == 0) throw StatsEmpty("no samples accumulated");
    return mean_;
}

Tensor ChainStats::variance() const {
    if (count_ < 2) throw StatsEmpty("variance needs at least two samples, have " + std::to_string(count_));
    Tensor v(m2_.shape());
    const double d = static_cast<double>(count_ - 1);
    for (std::size_t p = 0; p < v.size(); ++p) v.values()[p] = std::max(0.0, m2_.values()[p] / d);
    return v;
}

void ChainStats::update(const Tensor& sample) {
    if (sample.shape() != mean_.shape()) throw ShapeMismatch("sample shape differs from statistics");
    ++count_;
    const double n = static_cast<double>(count_);
    auto mv = mean_.values();
    auto qv = m2_.values();
    auto sv = sample.values();
    for (std::size_t p = 0; p < sv.size(); ++p) {
        const double delta = sv[p] - mv[p];
        mv[p] += delta / n;
        qv[p] += delta * (sv[p] - mv[p]);
    }
}

void welford_update(ChainStats& stats, const Tensor& sample) { stats.update(sample); }

// --- steps ---

namespace {

std::uint64_t flat_index(const Shape& g, int c, int row, int col) {
    return (static_cast<std::uint64_t>(c) * g.rows + row) * g.cols + col;
}

HaloWidths widest(HaloWidths a, HaloWidths b) {
    return {std::max(a.before, b.before), std::max(a.after, b.after)};
}

void add_into(BlockTensor& acc, const BlockTensor& g) {
    auto av = acc.data().values();
    auto gv = g.data().values();
    for (std::size_t p = 0; p < av.size(); ++p) av[p] += gv[p];
}

// v = H_1^* grad f_1(H_1 x) + sum_i H_2i^* (H_2i x - z_i) / rho_i, with one
// batched exchange providing every forward stencil with its ghost rows.
BlockTensor drift(WorkerCtx& ctx, ChainState& s, const Posterior& post, const LocalData& data,
                  const SamplerConfig& cfg, bool& any) {
    BlockTensor& x = s.x;
    HaloWidths hw;
    if (post.f1) hw = widest(hw, post.f1->op.forward_halo());
    for (const auto& c : post.couplings) hw = widest(hw, c.op.forward_halo());
    if (hw.before > 0 || hw.after > 0) halo_exchange(ctx, x, hw);

    BlockTensor v = x.like(x.channels());
    any = false;
    if (post.f1) {
        v = grad_gaussian_likelihood(ctx, x, data.y, post.f1->op, post.f1->sigma2);
        any = true;
    }
    for (std::size_t i = 0; i < post.couplings.size(); ++i) {
        const LocalizedOp& op = post.couplings[i].op;
        BlockTensor u = op.apply(x);
        auto uv = u.data().values();
        auto zv = s.z[i].data().values();
        for (std::size_t p = 0; p < uv.size(); ++p) uv[p] = uv[p] - zv[p];
        BlockTensor g = op.adjoint(ctx, u);
        for (double& e : g.data().values()) e /= cfg.rho[i];
        if (any) {
            add_into(v, g);
        } else {
            v = std::move(g);
            any = true;
        }
    }
    return v;
}

void resize_terms(StepTerms* terms, int rows) {
    if (!terms) return;
    terms->gradient.assign(rows, 0.0);
    terms->prior.assign(rows, 0.0);
    terms->box.assign(rows, 0.0);
    terms->noise.assign(rows, 0.0);
}

}  // namespace

LocalData local_data(const Posterior& post, int rank, RowRange rows) {
    LocalData d;
    if (post.f1) {
        const Tensor& y = *post.f1->y;
        d.y = BlockTensor(rank, y.shape(), rows, slice_rows(y, rows));
    }
    for (const auto& c : post.couplings) {
        if (c.data) {
            d.kl.emplace_back(rank, c.data->shape(), rows, slice_rows(*c.data, rows));
        } else {
            d.kl.emplace_back();
        }
    }
    return d;
}

BlockTensor pnp_ula_step(WorkerCtx& ctx, ChainState& s, const Posterior& post,
                         const LocalData& data, const SamplerConfig& cfg, long long t,
                         StepTerms* terms) {
    bool has_v = false;
    const BlockTensor v = drift(ctx, s, post, data, cfg, has_v);
    BlockTensor d;
    const bool has_prior = static_cast<bool>(post.denoiser);
    if (has_prior) d = apply_denoiser(ctx, *post.denoiser, s.x);
    const bool has_box = std::isfinite(cfg.lambda);

    const BlockTensor& x = s.x;
    BlockTensor next = x.like(x.channels());
    const Shape g = x.global_shape();
    const NoiseStream xi(cfg.seed, NoiseTag::XNoise);
    const double a = has_prior ? cfg.alpha * cfg.gamma / (cfg.eps * cfg.eps) : 0.0;
    const double b = has_box ? cfg.gamma / cfg.lambda : 0.0;
    const double sg = std::sqrt(2.0 * cfg.gamma);
    resize_terms(terms, x.owned_rows());
    for (int c = 0; c < x.channels(); ++c) {
        for (int i = 0; i < x.owned_rows(); ++i) {
            const int row = x.range().begin + i;
            auto xr = x.data().row(c, i);
            auto nr = next.data().row(c, i);
            for (int j = 0; j < g.cols; ++j) {
                const double xv = xr[j];
                double val = xv;
                const double gv = has_v ? cfg.gamma * v.data()(c, i, j) : 0.0;
                if (has_v) val = val - gv;
                double pv = 0.0;
                if (has_prior) {
                    pv = a * (d.data()(c, i, j) - xv);
                    val = val + pv;
                }
                double bv = 0.0;
                if (has_box) {
                    bv = b * (std::clamp(xv, 0.0, 1.0) - xv);
                    val = val + bv;
                }
                const double nv = sg * xi.normal(t + 1, flat_index(g, c, row, j));
                val = val + nv;
                nr[j] = val;
                if (terms) {
                    terms->gradient[i] += gv * gv;
                    terms->prior[i] += pv * pv;
                    terms->box[i] += bv * bv;
                    terms->noise[i] += nv * nv;
                }
            }
        }
    }
    return next;
}

BlockTensor psgla_x_step(WorkerCtx& ctx, ChainState& s, const Posterior& post,
                         const LocalData& data, const SamplerConfig& cfg, long long t,
                         StepTerms* terms) {
    bool has_v = false;
    const BlockTensor v = drift(ctx, s, post, data, cfg, has_v);
    const BlockTensor& x = s.x;
    BlockTensor next = x.like(x.channels());
    const Shape g = x.global_shape();
    const NoiseStream xi(cfg.seed, NoiseTag::XNoise);
    const double sg = std::sqrt(2.0 * cfg.gamma);
    resize_terms(terms, x.owned_rows());
    for (int c = 0; c < x.channels(); ++c) {
        for (int i = 0; i < x.owned_rows(); ++i) {
            const int row = x.range().begin + i;
            auto xr = x.data().row(c, i);
            auto nr = next.data().row(c, i);
            for (int j = 0; j < g.cols; ++j) {
                const double gv = has_v ? cfg.gamma * v.data()(c, i, j) : 0.0;
                double val = has_v ? xr[j] - gv : xr[j];
                const double nv = sg * xi.normal(t + 1, flat_index(g, c, row, j));
                val = val + nv;
                nr[j] = std::max(val, 0.0);
                if (terms) {
                    terms->gradient[i] += gv * gv;
                    terms->noise[i] += nv * nv;
                }
            }
        }
    }
    return next;
}

std::vector<BlockTensor> psgla_step(WorkerCtx& ctx, const ChainState& s, BlockTensor& x_next,
                                    const Posterior& post, const LocalData& data,
                                    const SamplerConfig& cfg, long long t) {
    std::vector<BlockTensor> out;
    if (post.couplings.empty()) return out;
    HaloWidths hw;
    for (const auto& c : post.couplings) hw = widest(hw, c.op.forward_halo());
    if (hw.before > 0 || hw.after > 0) halo_exchange(ctx, x_next, hw);
    for (std::size_t i = 0; i < post.couplings.size(); ++i) {
        const Coupling& cp = post.couplings[i];
        const double kappa = cfg.kappa[i];
        const double rho = cfg.rho[i];
        if (!(kappa > 0.0 && kappa < rho)) throw StepsizeInvalid("kappa outside (0, rho)");
        const BlockTensor h = cp.op.apply(x_next);
        const BlockTensor& z = s.z[i];
        BlockTensor w = z.like(z.channels());
        const Shape g = z.global_shape();
        const NoiseStream zeta(cfg.seed, z_noise_tag(static_cast<int>(i)));
        const double r = kappa / rho;
        const double sk = std::sqrt(2.0 * kappa);
        for (int c = 0; c < z.channels(); ++c) {
            for (int ii = 0; ii < z.owned_rows(); ++ii) {
                const int row = z.range().begin + ii;
                auto zr = z.data().row(c, ii);
                auto hr = h.data().row(c, ii);
                auto wr = w.data().row(c, ii);
                for (int j = 0; j < g.cols; ++j) {
                    wr[j] = zr[j] - r * (zr[j] - hr[j]) +
                            sk * zeta.normal(t + 1, flat_index(g, c, row, j));
                }
            }
        }
        auto wv = w.data().values();
        switch (cp.prox.kind) {
            case ProxSpec::Kind::Zero: break;
            case ProxSpec::Kind::Nonneg: prox_nonneg(wv); break;
            case ProxSpec::Kind::KLPoisson:
                prox_kl_poisson(wv, data.kl.at(i).data().values(), kappa);
                break;
            case ProxSpec::Kind::GroupL21: prox_group_l21(w.data(), kappa * cp.prox.weight); break;
            case ProxSpec::Kind::Quadratic:
                for (double& e : wv) e = prox_quadratic(e, cp.prox.mu, cp.prox.s2, kappa);
                break;
        }
        out.push_back(std::move(w));
    }
    return out;
}

// --- chain ---

namespace {

ChainState copy_state(const ChainState& s) {
    ChainState c;
    c.x = BlockTensor(s.x.owner(), s.x.global_shape(), s.x.range(), s.x.data());
    for (const auto& z : s.z) c.z.emplace_back(z.owner(), z.global_shape(), z.range(), z.data());
    return c;
}

}  // namespace

WorkerChain run_sgs(WorkerCtx& ctx, const Partition& p, const Posterior& post,
                    const SamplerConfig& cfg, const Tensor& init, const RunOptions& opts) {
    if (init.shape() != post.shape) throw ShapeMismatch("initial state shape");
    const int rank = ctx.rank();
    const RowRange r = p.range(rank);
    WorkerChain w;
    w.state.x = BlockTensor(rank, post.shape, r, slice_rows(init, r));
    for (const auto& c : post.couplings) {
        const Shape zs{c.op.out_channels(post.shape.channels), post.shape.rows, post.shape.cols};
        w.state.z.emplace_back(rank, zs, r);
    }
    const LocalData data = local_data(post, rank, r);
    w.stats = ChainStats(w.state.x.data().shape());
    const int thin = std::max(1, opts.thin);

    try {
        for (long long t = 0; t < cfg.iterations; ++t) {
            const auto start = std::chrono::steady_clock::now();
            const CommCounters before = ctx.counters();
            if (opts.before_iteration) opts.before_iteration(rank, t);

            StepTerms terms;
            BlockTensor x_next = post.x_update == XUpdate::PnpUla
                                     ? pnp_ula_step(ctx, w.state, post, data, cfg, t, &terms)
                                     : psgla_x_step(ctx, w.state, post, data, cfg, t, &terms);
            std::vector<BlockTensor> z_next = psgla_step(ctx, w.state, x_next, post, data, cfg, t);
            w.state.x = std::move(x_next);
            w.state.x.invalidate_ghosts();
            w.state.z = std::move(z_next);

            const long long phases = (ctx.counters().halo_phases - before.halo_phases) +
                                     (ctx.counters().reduce_phases - before.reduce_phases);

            // Term norms, folded in global row order; doubles as the point
            // after which every worker has finished iteration t.
            std::vector<double> local;
            for (const auto* v : {&terms.gradient, &terms.prior, &terms.box, &terms.noise}) {
                local.insert(local.end(), v->begin(), v->end());
            }
            const auto parts = all_gather(ctx, std::move(local));
            double sums[4] = {0.0, 0.0, 0.0, 0.0};
            for (const auto& part : parts) {
                const std::size_t rows = part.size() / 4;
                for (int k = 0; k < 4; ++k) {
                    for (std::size_t i = 0; i < rows; ++i) sums[k] += part[k * rows + i];
                }
            }
            if (rank == 0) {
                DiagnosticsRow row;
                row.iteration = t + 1;
                row.gradient_norm = std::sqrt(sums[0]);
                row.prior_norm = std::sqrt(sums[1]);
                row.box_norm = std::sqrt(sums[2]);
                row.noise_norm = std::sqrt(sums[3]);
                row.halo_phases = phases;
                row.wall_seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                w.diagnostics.push_back(row);
            }

            if (t >= cfg.burn_in) {
                w.stats.update(w.state.x.data());
                if (opts.dump_samples && (t - cfg.burn_in) % thin == 0) {
                    w.samples.push_back(w.state.x.data());
                }
            }
            w.completed = t + 1;
            if (std::find(opts.snapshot_at.begin(), opts.snapshot_at.end(), t + 1) !=
                opts.snapshot_at.end()) {
                w.snapshots.emplace(t + 1, copy_state(w.state));
            }
        }
    } catch (const TransportClosed&) {
        w.error = "stopped after a peer failure";
    } catch (const std::exception& e) {
        w.error = e.what();
        ctx.transport().close();
    }
    return w;
}

namespace {

Tensor gather_rows(const std::vector<const Tensor*>& parts, const Partition& p, Shape global) {
    std::vector<BlockTensor> blocks;
    for (int b = 0; b < p.workers(); ++b) blocks.emplace_back(b, global, p.range(b), *parts[b]);
    return gather_global(blocks);
}

Snapshot gather_state(const std::vector<const ChainState*>& states, const Partition& p) {
    Snapshot s;
    std::vector<const Tensor*> xs;
    for (const auto* st : states) xs.push_back(&st->x.data());
    s.x = gather_rows(xs, p, states[0]->x.global_shape());
    for (std::size_t i = 0; i < states[0]->z.size(); ++i) {
        std::vector<const Tensor*> zs;
        for (const auto* st : states) zs.push_back(&st->z[i].data());
        s.z.push_back(gather_rows(zs, p, states[0]->z[i].global_shape()));
    }
    return s;
}

}  // namespace

ChainResult run_chain(const Posterior& post, const SamplerConfig& cfg, const Tensor& init,
                      int workers, const RunOptions& opts) {
    check_config(post, cfg);
    const Partition p = chain_partition(post, workers);
    std::vector<WorkerChain> chains(workers);
    SpmdStats spmd;
    run_spmd(
        workers,
        [&](WorkerCtx& ctx) {
            chains[ctx.rank()] = run_sgs(ctx, p, post, cfg, init, opts);
        },
        &spmd);

    ChainResult res;
    res.comm = spmd.per_rank;
    res.completed_iterations = cfg.iterations;
    bool same_count = true;
    for (const auto& c : chains) {
        res.completed_iterations = std::min(res.completed_iterations, c.completed);
        same_count = same_count && c.stats.count() == chains[0].stats.count();
    }
    // The error of the lowest rank that failed on its own.
    for (const auto& c : chains) {
        if (!c.error.empty() && c.error != "stopped after a peer failure") {
            res.error = c.error;
            break;
        }
    }
    if (res.error.empty()) {
        for (const auto& c : chains) {
            if (!c.error.empty()) res.error = c.error;
        }
    }
    res.complete = res.error.empty() && res.completed_iterations == cfg.iterations;

    std::vector<const ChainState*> states;
    for (const auto& c : chains) states.push_back(&c.state);
    if (same_count) {
        std::vector<Tensor> mean_parts;
        std::vector<const Tensor*> means, m2s;
        for (const auto& c : chains) {
            mean_parts.push_back(c.stats.count() > 0 ? c.stats.mean() : Tensor(c.stats.shape()));
            m2s.push_back(&c.stats.m2());
        }
        for (const auto& m : mean_parts) means.push_back(&m);
        res.stats = ChainStats(chains[0].stats.count(), gather_rows(means, p, post.shape),
                               gather_rows(m2s, p, post.shape));
    } else {
        res.stats = ChainStats(post.shape);
    }
    if (res.complete) res.last = gather_state(states, p);
    res.diagnostics = chains[0].diagnostics;
    res.diagnostics.resize(std::min<std::size_t>(res.diagnostics.size(), res.completed_iterations));

    for (const auto& [t, st] : chains[0].snapshots) {
        std::vector<const ChainState*> parts;
        for (const auto& c : chains) {
            auto it = c.snapshots.find(t);
            if (it == c.snapshots.end()) break;
            parts.push_back(&it->second);
        }
        if (parts.size() == chains.size()) res.snapshots.emplace(t, gather_state(parts, p));
    }
    std::size_t n_samples = chains[0].samples.size();
    for (const auto& c : chains) n_samples = std::min(n_samples, c.samples.size());
    for (std::size_t k = 0; k < n_samples; ++k) {
        std::vector<const Tensor*> parts;
        for (const auto& c : chains) parts.push_back(&c.samples[k]);
        res.samples.push_back(gather_rows(parts, p, post.shape));
    }
    return res;
}

}  // namespace dpnp
