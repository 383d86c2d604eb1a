// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dpnp {

// Every failure raised by the library derives from Error so that callers
// (notably the CLI) can map them to exit codes in one place.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define DPNP_DEFINE_ERROR(Name)                  \
    class Name : public Error {                  \
    public:                                      \
        explicit Name(const std::string& what)   \
            : Error(#Name ": " + what) {}        \
    }

DPNP_DEFINE_ERROR(InvalidArgument);
DPNP_DEFINE_ERROR(ShapeMismatch);
DPNP_DEFINE_ERROR(PartitionTooFine);
DPNP_DEFINE_ERROR(InvalidGhost);
DPNP_DEFINE_ERROR(GhostWidthExceeded);
DPNP_DEFINE_ERROR(TransportClosed);
DPNP_DEFINE_ERROR(ChannelMismatch);
DPNP_DEFINE_ERROR(ArchitectureMismatch);
DPNP_DEFINE_ERROR(ConfigInfeasible);
DPNP_DEFINE_ERROR(StepsizeInvalid);
DPNP_DEFINE_ERROR(StatsEmpty);
DPNP_DEFINE_ERROR(UnsupportedCombination);
DPNP_DEFINE_ERROR(IoError);
DPNP_DEFINE_ERROR(FormatError);

#undef DPNP_DEFINE_ERROR

// Raised by spawn_spmd when a worker program throws; carries the rank
// (0-based) of the first worker that failed for a reason other than the
// transport being torn down.
class WorkerPanic : public Error {
public:
    WorkerPanic(int rank, const std::string& what)
        : Error("WorkerPanic(rank " + std::to_string(rank) + "): " + what),
          rank_(rank) {}

    int rank() const noexcept { return rank_; }

private:
    int rank_;
};

}  // namespace dpnp
