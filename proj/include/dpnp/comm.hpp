// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

/**
 * @file comm.hpp
 * @brief SPMD worker runtime: point-to-point transport, halo exchange,
 *        overlap-add reduction and rank-ordered collectives.
 *
 * Every worker runs the same program. Collectives must be called by all
 * ranks in the same order; each call consumes one tag from the worker's
 * counter, so matching sends and receives carry equal tags and tags are
 * strictly increasing per ordered pair of ranks.
 */

#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <mutex>
#include <vector>

#include "dpnp/grid.hpp"

namespace dpnp {

struct Message {
    std::uint64_t tag = 0;
    std::vector<double> payload;
};

/// Point-to-point FIFO channels between ranks 0..size-1. Sends never block.
class Transport {
public:
    virtual ~Transport() = default;
    virtual int size() const = 0;
    virtual void send(int src, int dst, Message msg) = 0;
    /// Blocks until the next message from src to dst arrives. Once the
    /// transport is closed, messages already queued are still delivered and
    /// a receive on an empty channel throws TransportClosed.
    virtual Message recv(int dst, int src) = 0;
    /// Wakes every blocked receiver with TransportClosed.
    virtual void close() = 0;
};

class InProcessTransport final : public Transport {
public:
    explicit InProcessTransport(int size);

    int size() const override { return size_; }
    void send(int src, int dst, Message msg) override;
    Message recv(int dst, int src) override;
    void close() override;

private:
    int size_;
    std::mutex mu_;
    std::condition_variable cv_;
    bool closed_ = false;
    std::vector<std::deque<Message>> boxes_;  // index src * size + dst
};

/// Per-worker traffic counters. A phase is one neighbour exchange in which
/// messages may be sent; phases are only counted when B > 1.
struct CommCounters {
    long long halo_phases = 0;
    long long reduce_phases = 0;
    long long messages = 0;
    long long elements_sent = 0;
};

class WorkerCtx {
public:
    WorkerCtx(int rank, Transport& transport) : rank_(rank), transport_(&transport) {}

    int rank() const noexcept { return rank_; }
    int size() const noexcept { return transport_->size(); }
    Transport& transport() noexcept { return *transport_; }

    const CommCounters& counters() const noexcept { return counters_; }
    CommCounters& counters() noexcept { return counters_; }

    std::uint64_t next_tag() noexcept { return ++tag_; }

    void send(int dst, std::uint64_t tag, std::vector<double> payload);
    std::vector<double> recv(int src, std::uint64_t tag);

private:
    int rank_;
    Transport* transport_;
    CommCounters counters_;
    std::uint64_t tag_ = 0;
};

struct SpmdStats {
    std::vector<CommCounters> per_rank;
};

/// Runs program(ctx) on `workers` threads, one per rank, and waits for all of
/// them. If any worker throws, the transport is closed so the others unwind,
/// and WorkerPanic is raised for the lowest rank whose failure was not a
/// consequence of the shutdown.
void run_spmd(int workers, const std::function<void(WorkerCtx&)>& program,
              SpmdStats* stats = nullptr);

/// Typed front end of run_spmd: collects per-rank results in rank order.
template <class F>
auto spawn_spmd(int workers, F&& program, SpmdStats* stats = nullptr) {
    using R = decltype(program(std::declval<WorkerCtx&>()));
    std::vector<R> results(workers > 0 ? workers : 0);
    run_spmd(
        workers, [&](WorkerCtx& ctx) { results[ctx.rank()] = program(ctx); }, stats);
    return results;
}

enum class HaloDirection {
    Down,  ///< ghost_after filled from the next rank's first rows
    Up,    ///< ghost_before filled from the previous rank's last rows
    Both,
};

struct HaloWidths {
    int before = 0;
    int after = 0;
};

HaloWidths halo_widths(HaloDirection dir, int width);

/// Fills the ghost buffers of `block` with neighbour rows and marks them
/// valid. Ghost rows beyond the image are zero. Throws GhostWidthExceeded if
/// a neighbour owns fewer in-image rows than requested.
void halo_exchange(WorkerCtx& ctx, BlockTensor& block, HaloWidths widths);
void halo_exchange(WorkerCtx& ctx, BlockTensor& block, int width, HaloDirection dir);

/// Treats the valid ghost buffers of `block` as contributions to rows owned
/// by the neighbours: they are sent to their owners and added onto the owned
/// rows there. Per row the order is owned value, then the contribution from
/// the previous rank, then the one from the next rank. Contributions to rows
/// outside the image are dropped. Ghosts are invalidated afterwards.
void overlap_add_reduce(WorkerCtx& ctx, BlockTensor& block);

enum class ReduceOp { Sum, Max };

/// Every rank receives the values of all ranks, in rank order.
std::vector<std::vector<double>> all_gather(WorkerCtx& ctx, std::vector<double> local);

/// Folds the per-rank values left to right in rank order on every rank.
double all_reduce_scalar(WorkerCtx& ctx, double value, ReduceOp op);

/// Sum of per-row partial sums over all workers, folded in global row
/// order. `row_partials` holds one value per owned row. Matches a serial
/// left-to-right fold over the rows for any partition.
double ordered_row_sum(WorkerCtx& ctx, const std::vector<double>& row_partials);

}  // namespace dpnp
