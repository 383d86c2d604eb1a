// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

#include "dpnp/comm.hpp"

#include <algorithm>
#include <string>
#include <thread>

#include "dpnp/errors.hpp"

namespace dpnp {

InProcessTransport::InProcessTransport(int size)
    : size_(size), boxes_(static_cast<std::size_t>(size > 0 ? size : 0) * (size > 0 ? size : 0)) {
    if (size < 1) throw InvalidArgument("transport needs at least one rank");
}

void InProcessTransport::send(int src, int dst, Message msg) {
    if (src < 0 || src >= size_ || dst < 0 || dst >= size_) {
        throw InvalidArgument("send between ranks " + std::to_string(src) + " and " +
                              std::to_string(dst));
    }
    {
        std::lock_guard<std::mutex> lock(mu_);
        if (closed_) throw TransportClosed("send after close");
        boxes_[static_cast<std::size_t>(src) * size_ + dst].push_back(std::move(msg));
    }
    cv_.notify_all();
}

Message InProcessTransport::recv(int dst, int src) {
    if (src < 0 || src >= size_ || dst < 0 || dst >= size_) {
        throw InvalidArgument("recv between ranks " + std::to_string(src) + " and " +
                              std::to_string(dst));
    }
    auto& box = boxes_[static_cast<std::size_t>(src) * size_ + dst];
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return closed_ || !box.empty(); });
    if (box.empty()) throw TransportClosed("rank " + std::to_string(dst) + " waiting on " +
                                         std::to_string(src));
    Message msg = std::move(box.front());
    box.pop_front();
    return msg;
}

void InProcessTransport::close() {
    {
        std::lock_guard<std::mutex> lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

void WorkerCtx::send(int dst, std::uint64_t tag, std::vector<double> payload) {
    counters_.messages += 1;
    counters_.elements_sent += static_cast<long long>(payload.size());
    transport_->send(rank_, dst, Message{tag, std::move(payload)});
}

std::vector<double> WorkerCtx::recv(int src, std::uint64_t tag) {
    Message msg = transport_->recv(rank_, src);
    if (msg.tag != tag) {
        throw Error("rank " + std::to_string(rank_) + " expected tag " + std::to_string(tag) +
                    " from " + std::to_string(src) + ", got " + std::to_string(msg.tag));
    }
    return std::move(msg.payload);
}

void run_spmd(int workers, const std::function<void(WorkerCtx&)>& program, SpmdStats* stats) {
    if (workers < 1) throw InvalidArgument("worker count must be positive");
    InProcessTransport transport(workers);
    std::vector<WorkerCtx> ctxs;
    ctxs.reserve(workers);
    for (int r = 0; r < workers; ++r) ctxs.emplace_back(r, transport);
    std::vector<std::exception_ptr> errors(workers);

    auto body = [&](int r) {
        try {
            program(ctxs[r]);
        } catch (...) {
            errors[r] = std::current_exception();
            transport.close();
        }
    };
    if (workers == 1) {
        body(0);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (int r = 0; r < workers; ++r) threads.emplace_back(body, r);
        for (auto& t : threads) t.join();
    }

    if (stats) {
        stats->per_rank.clear();
        for (const auto& ctx : ctxs) stats->per_rank.push_back(ctx.counters());
    }

    int first = -1;
    std::string what;
    for (int r = 0; r < workers && first < 0; ++r) {
        if (!errors[r]) continue;
        try {
            std::rethrow_exception(errors[r]);
        } catch (const TransportClosed&) {
        } catch (const std::exception& e) {
            first = r;
            what = e.what();
        } catch (...) {
            first = r;
            what = "unknown exception";
        }
    }
    if (first < 0) {
        for (int r = 0; r < workers; ++r) {
            if (errors[r]) {
                first = r;
                what = "transport closed";
                break;
            }
        }
    }
    if (first >= 0) throw WorkerPanic(first, what);
}

HaloWidths halo_widths(HaloDirection dir, int width) {
    switch (dir) {
        case HaloDirection::Down: return {0, width};
        case HaloDirection::Up: return {width, 0};
        case HaloDirection::Both: return {width, width};
    }
    return {};
}

namespace {

std::vector<double> pack_rows(const Tensor& t, int first, int count) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(t.channels()) * count * t.cols());
    for (int c = 0; c < t.channels(); ++c) {
        for (int i = first; i < first + count; ++i) {
            auto row = t.row(c, i);
            out.insert(out.end(), row.begin(), row.end());
        }
    }
    return out;
}

// Writes `count` packed rows into rows [first, first + count) of t.
void unpack_rows(const std::vector<double>& in, Tensor& t, int first, int count) {
    if (in.size() != static_cast<std::size_t>(t.channels()) * count * t.cols()) {
        throw ShapeMismatch("halo payload has " + std::to_string(in.size()) + " values");
    }
    const double* p = in.data();
    for (int c = 0; c < t.channels(); ++c) {
        for (int i = first; i < first + count; ++i) {
            std::copy_n(p, t.cols(), t.row(c, i).begin());
            p += t.cols();
        }
    }
}

}  // namespace

void halo_exchange(WorkerCtx& ctx, BlockTensor& block, HaloWidths widths) {
    if (widths.before < 0 || widths.after < 0) throw InvalidArgument("negative halo width");
    const int rank = ctx.rank();
    const int size = ctx.size();
    const int H = block.global_shape().rows;
    const RowRange own = block.range();
    const std::uint64_t tag = ctx.next_tag();

    // Rows a neighbour needs from us: only rows inside the image travel.
    const int give_prev = std::min(widths.after, H - own.begin);
    const int give_next = std::min(widths.before, own.end);
    if (rank > 0 && give_prev > own.size()) {
        throw GhostWidthExceeded("rank " + std::to_string(rank) + " owns " +
                                 std::to_string(own.size()) + " rows, neighbour needs " +
                                 std::to_string(give_prev));
    }
    if (rank + 1 < size && give_next > own.size()) {
        throw GhostWidthExceeded("rank " + std::to_string(rank) + " owns " +
                                 std::to_string(own.size()) + " rows, neighbour needs " +
                                 std::to_string(give_next));
    }

    if (size > 1 && (widths.before > 0 || widths.after > 0)) ctx.counters().halo_phases += 1;

    if (rank > 0 && give_prev > 0) ctx.send(rank - 1, tag, pack_rows(block.data(), 0, give_prev));
    if (rank + 1 < size && give_next > 0) {
        ctx.send(rank + 1, tag, pack_rows(block.data(), own.size() - give_next, give_next));
    }

    const int C = block.channels();
    const int W = block.cols();
    Ghost before{Tensor({C, widths.before, W}), true};
    Ghost after{Tensor({C, widths.after, W}), true};
    if (rank > 0) {
        const int take = std::min(widths.before, own.begin);
        if (take > 0) unpack_rows(ctx.recv(rank - 1, tag), before.rows, widths.before - take, take);
    }
    if (rank + 1 < size) {
        const int take = std::min(widths.after, H - own.end);
        if (take > 0) unpack_rows(ctx.recv(rank + 1, tag), after.rows, 0, take);
    }
    block.ghost_before() = std::move(before);
    block.ghost_after() = std::move(after);
}

void halo_exchange(WorkerCtx& ctx, BlockTensor& block, int width, HaloDirection dir) {
    halo_exchange(ctx, block, halo_widths(dir, width));
}

void overlap_add_reduce(WorkerCtx& ctx, BlockTensor& block) {
    const int rank = ctx.rank();
    const int size = ctx.size();
    const int H = block.global_shape().rows;
    const RowRange own = block.range();
    const Ghost& gb = block.ghost_before();
    const Ghost& ga = block.ghost_after();
    const int wb = gb.valid ? gb.width() : 0;
    const int wa = ga.valid ? ga.width() : 0;
    const std::uint64_t tag = ctx.next_tag();

    // In-image spill rows adjacent to the block.
    const int spill_prev = std::min(wb, own.begin);
    const int spill_next = std::min(wa, H - own.end);
    if ((spill_prev > 0 && rank == 0) || (spill_next > 0 && rank + 1 == size)) {
        throw InvalidArgument("overlap-add spill without a neighbour");
    }
    if (size > 1 && (wb > 0 || wa > 0)) ctx.counters().reduce_phases += 1;

    // Sizes are exchanged with the payload so asymmetric spills are allowed.
    auto with_count = [](int count, std::vector<double> rows) {
        rows.push_back(static_cast<double>(count));
        return rows;
    };
    if (rank > 0) {
        ctx.send(rank - 1, tag, with_count(spill_prev, pack_rows(gb.rows, wb - spill_prev, spill_prev)));
    }
    if (rank + 1 < size) {
        ctx.send(rank + 1, tag, with_count(spill_next, pack_rows(ga.rows, 0, spill_next)));
    }

    Tensor& data = block.data();
    const int C = block.channels();
    const int W = block.cols();
    auto add_rows = [&](std::vector<double> msg, bool from_prev) {
        const int count = static_cast<int>(msg.back());
        msg.pop_back();
        if (count > own.size()) throw GhostWidthExceeded("overlap-add spill wider than block");
        Tensor rows({C, count, W});
        unpack_rows(msg, rows, 0, count);
        const int first = from_prev ? 0 : own.size() - count;
        for (int c = 0; c < C; ++c) {
            for (int i = 0; i < count; ++i) {
                auto dst = data.row(c, first + i);
                auto src = rows.row(c, i);
                for (int j = 0; j < W; ++j) dst[j] += src[j];
            }
        }
    };
    if (rank > 0) add_rows(ctx.recv(rank - 1, tag), true);
    if (rank + 1 < size) add_rows(ctx.recv(rank + 1, tag), false);
    block.invalidate_ghosts();
}

std::vector<std::vector<double>> all_gather(WorkerCtx& ctx, std::vector<double> local) {
    const int rank = ctx.rank();
    const int size = ctx.size();
    const std::uint64_t tag = ctx.next_tag();
    for (int r = 0; r < size; ++r) {
        if (r != rank) ctx.send(r, tag, local);
    }
    std::vector<std::vector<double>> out(size);
    for (int r = 0; r < size; ++r) {
        out[r] = (r == rank) ? local : ctx.recv(r, tag);
    }
    return out;
}

double all_reduce_scalar(WorkerCtx& ctx, double value, ReduceOp op) {
    const auto parts = all_gather(ctx, {value});
    double acc = parts[0].at(0);
    for (std::size_t r = 1; r < parts.size(); ++r) {
        const double v = parts[r].at(0);
        acc = (op == ReduceOp::Sum) ? acc + v : std::max(acc, v);
    }
    return acc;
}

// Ranks own contiguous rows in rank order, so concatenating the gathered
// parts reproduces global row order.
double ordered_row_sum(WorkerCtx& ctx, const std::vector<double>& row_partials) {
    const auto parts = all_gather(ctx, row_partials);
    double acc = 0.0;
    for (const auto& part : parts) {
        for (double v : part) acc += v;
    }
    return acc;
}

}  // namespace dpnp
