// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

/**
 * @file sampler.hpp
 * @brief Split Gibbs sampler: PnP-ULA / PSGLA x-updates, PSGLA z-updates,
 *        step-size rules and streaming chain statistics.
 *
 * One iteration on worker b (t = 0, 1, ...):
 *
 *   x <- x - gamma v + (alpha gamma / eps^2) (D(x) - x)
 *          + (gamma / lambda) (proj_C(x) - x) + sqrt(2 gamma) xi      (PnP-ULA)
 *   x <- proj_{R+}(x - gamma v + sqrt(2 gamma) xi)                    (PSGLA)
 *   z_i <- prox_{kappa_i f_2i}(z_i - (kappa_i / rho_i)(z_i - H_2i x)
 *          + sqrt(2 kappa_i) zeta_i)
 *
 * with v = H_1^* grad f_1(H_1 x) + sum_i H_2i^*(H_2i x - z_i) / rho_i. Noise
 * is drawn at global pixel indices, so the whole chain is bit-identical for
 * any number of workers.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dpnp/comm.hpp"
#include "dpnp/denoiser.hpp"
#include "dpnp/grid.hpp"
#include "dpnp/linops.hpp"
#include "dpnp/tensor.hpp"

namespace dpnp {

enum class Task { InpaintGauss, DeconvGauss, DeconvPoisson };
enum class PriorKind { PnP, TV };

std::string task_name(Task t);
Task parse_task(const std::string& name);
std::string prior_name(PriorKind p);
PriorKind parse_prior(const std::string& name);

struct SamplerConfig {
    double gamma = 0.0;
    /// Moreau parameter of the box term; +infinity disables the term.
    double lambda = std::numeric_limits<double>::infinity();
    double alpha = 1.0;
    double eps = 0.0;
    std::vector<double> rho;    // one per AXDA block
    std::vector<double> kappa;  // one per AXDA block
    double beta = 0.0;          // TV weight
    int iterations = 0;
    int burn_in = 0;
    std::uint64_t seed = 0;
};

struct StepsizeCheck {
    bool ok = true;
    std::vector<std::string> violations;
};

/// Both conditions
///   2 (L + h2) + alpha L_D / eps^2 <= 1 / (2 lambda)
///   3 gamma (L + h2 + 1 / lambda + alpha L_D / eps^2) < 1
/// where h2 is the coupling curvature sum_i ||H_2i||^2 / rho_i.
StepsizeCheck validate_stepsizes(const SamplerConfig& cfg, double L, double h2, double L_D);

/// Problem constants the default step sizes depend on.
struct ProblemConstants {
    double sigma2 = 0.0;    // Gaussian noise variance
    double eta = 0.0;       // Poisson scale
    double h_norm_sq = 0.0; // ||H||^2
    double d_norm_sq = 8.0; // ||D||^2
    double L_D = 0.0;       // Lipschitz constant of I - D
};

/// Published step-size formulas for each task and prior. Throws
/// ConfigInfeasible if the result does not satisfy the step-size rule.
SamplerConfig default_config(Task task, PriorKind prior, const ProblemConstants& k);

// --- posterior wiring ---

struct ProxSpec {
    enum class Kind { Zero, Nonneg, KLPoisson, GroupL21, Quadratic };
    Kind kind = Kind::Zero;
    double weight = 0.0;  // GroupL21: beta (threshold kappa * beta)
    double mu = 0.0;      // Quadratic: (z - mu)^2 / (2 s2)
    double s2 = 1.0;
};

/// One AXDA block z_i ~ H_2i x with potential f_2i.
struct Coupling {
    LocalizedOp op;
    ProxSpec prox;
    std::shared_ptr<const Tensor> data;  // KL observations
    double norm_sq = 0.0;                // ||H_2i||^2
};

struct GaussianTerm {
    LocalizedOp op;
    std::shared_ptr<const Tensor> y;
    double sigma2 = 1.0;
};

enum class XUpdate { PnpUla, Psgla };

struct Posterior {
    Shape shape;
    std::optional<GaussianTerm> f1;
    std::vector<Coupling> couplings;
    std::shared_ptr<const DenoiserGraph> denoiser;  // PnP prior, may be null
    XUpdate x_update = XUpdate::PnpUla;
    double L = 0.0;  // Lipschitz constant of grad(f_1 o H_1)

    double coupling_curvature(const SamplerConfig& cfg) const;
    /// Ghost rows any operator of the chain needs.
    int halo() const;
};

/// Rejects configurations before any step runs: kappa_i in (0, rho_i),
/// gamma > 0, and the step-size rule of the x-update. Throws StepsizeInvalid.
void check_config(const Posterior& post, const SamplerConfig& cfg);

/// Row partition serving every operator and the denoiser.
Partition chain_partition(const Posterior& post, int workers);

// --- streaming statistics ---

class ChainStats {
public:
    ChainStats() = default;
    explicit ChainStats(Shape shape);
    ChainStats(long long count, Tensor mean, Tensor m2);

    long long count() const noexcept { return count_; }
    Shape shape() const { return mean_.shape(); }
    /// Throws StatsEmpty before the first sample.
    const Tensor& mean() const;
    const Tensor& m2() const noexcept { return m2_; }
    /// m2 / (count - 1); throws StatsEmpty with fewer than two samples.
    Tensor variance() const;

    void update(const Tensor& sample);

private:
    long long count_ = 0;
    Tensor mean_;
    Tensor m2_;
};

void welford_update(ChainStats& stats, const Tensor& sample);

// --- single steps ---

struct ChainState {
    BlockTensor x;
    std::vector<BlockTensor> z;
};

/// Norms of the pieces of one x-update (squared, per owned row).
struct StepTerms {
    std::vector<double> gradient;
    std::vector<double> prior;
    std::vector<double> box;
    std::vector<double> noise;
};

/// Local observation rows of a worker.
struct LocalData {
    BlockTensor y;                 // Gaussian observations
    std::vector<BlockTensor> kl;   // per coupling, empty unless KL
};

LocalData local_data(const Posterior& post, int rank, RowRange rows);

/// x_{t+1} from (x_t, z_t); `t` is the index of the iteration being taken.
BlockTensor pnp_ula_step(WorkerCtx& ctx, ChainState& s, const Posterior& post,
                         const LocalData& data, const SamplerConfig& cfg, long long t,
                         StepTerms* terms = nullptr);
/// Projected x-update used with the TV prior.
BlockTensor psgla_x_step(WorkerCtx& ctx, ChainState& s, const Posterior& post,
                         const LocalData& data, const SamplerConfig& cfg, long long t,
                         StepTerms* terms = nullptr);
/// z_{t+1} from (z_t, x_{t+1}).
std::vector<BlockTensor> psgla_step(WorkerCtx& ctx, const ChainState& s, BlockTensor& x_next,
                                    const Posterior& post, const LocalData& data,
                                    const SamplerConfig& cfg, long long t);

// --- full chain ---

struct DiagnosticsRow {
    long long iteration = 0;
    double gradient_norm = 0.0;
    double prior_norm = 0.0;
    double box_norm = 0.0;
    double noise_norm = 0.0;
    long long halo_phases = 0;  // rank 0, this iteration
    double wall_seconds = 0.0;
};

struct Snapshot {
    Tensor x;
    std::vector<Tensor> z;
};

struct RunOptions {
    int thin = 10;
    bool dump_samples = false;
    std::vector<long long> snapshot_at;  // iteration counts (after t steps)
    /// Called by every worker before iteration t; may throw to abort.
    std::function<void(int rank, long long t)> before_iteration;
};

struct ChainResult {
    ChainStats stats;
    Snapshot last;
    std::vector<DiagnosticsRow> diagnostics;
    std::map<long long, Snapshot> snapshots;
    std::vector<Tensor> samples;
    std::vector<CommCounters> comm;
    long long completed_iterations = 0;
    bool complete = true;
    std::string error;
};

/// Per-worker part of the chain: T iterations of (x-update; z-update).
struct WorkerChain {
    ChainStats stats;
    ChainState state;
    std::vector<DiagnosticsRow> diagnostics;
    std::map<long long, ChainState> snapshots;
    std::vector<Tensor> samples;
    long long completed = 0;
    std::string error;
};

WorkerChain run_sgs(WorkerCtx& ctx, const Partition& p, const Posterior& post,
                    const SamplerConfig& cfg, const Tensor& init, const RunOptions& opts);

/// Runs the chain on `workers` workers and gathers statistics, snapshots and
/// samples. A failing worker stops the run at an iteration boundary; the
/// result then holds the statistics of the completed iterations and is
/// flagged incomplete.
ChainResult run_chain(const Posterior& post, const SamplerConfig& cfg, const Tensor& init,
                      int workers, const RunOptions& opts = {});

}  // namespace dpnp
