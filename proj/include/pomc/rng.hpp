#pragma once

#include <cstdint>
#include <limits>

namespace pomc {

/// Purposes used to key substreams; keeps the state and observation noise of a
/// simulation on separate streams.
enum class StreamPurpose : std::uint64_t {
    State = 1,
    Observation = 2,
    Component = 3,
    Resampling = 4,
    Initial = 5,
    Replicate = 6,
    Excursion = 7,
    Synthetic = 8,
};

/// Counter-based random stream keyed by (master_seed, path_id).
///
/// Draw i of a stream is a SplitMix64 finalizer applied to key + i * golden,
/// so two streams with the same identity are bit-identical and any stream can
/// be split into child streams without consuming draws from the parent.
/// Satisfies UniformRandomBitGenerator, so <random> distributions accept it.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t master_seed, std::uint64_t path_id);

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t path_id() const noexcept { return path_id_; }
    std::uint64_t draws() const noexcept { return counter_; }

    /// Child stream whose identity depends only on this stream's identity and
    /// the key, never on how many draws were taken.
    RngStream substream(std::uint64_t key) const;
    RngStream substream(StreamPurpose purpose) const {
        return substream(static_cast<std::uint64_t>(purpose) | (1ULL << 63));
    }

    result_type operator()() noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    /// Uniform on the open interval (0, 1) with 53-bit resolution.
    double uniform() noexcept;

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept;

private:
    std::uint64_t master_seed_;
    std::uint64_t path_id_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// SplitMix64 output finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace pomc
