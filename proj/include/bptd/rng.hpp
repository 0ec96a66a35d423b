#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace bptd {

/// Seeded random stream with hash-derived substreams.
///
/// Identical seeds give identical variate sequences (same build). Substreams
/// are derived from (seed, stream id), never from the current engine state,
/// so a fixed worker count yields reproducible parallel allocation.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed);

    /// Independent stream derived from the base seed and `stream_id`.
    RngStream substream(std::uint64_t stream_id) const;

    /// Next substream in a deterministic sequence (advances a counter only).
    RngStream next_substream();

    std::uint64_t seed() const { return seed_; }

    double uniform();  // (0, 1)

    /// Gamma(shape, rate), mean shape/rate. Underflow clamps to the smallest
    /// positive normal value.
    double gamma(double shape, double rate);

    /// Poisson draw; rate 0 returns 0.
    long long poisson(double rate);

    /// Index k with probability weights[k] / sum(weights).
    std::size_t categorical(std::span<const double> weights);

    /// Chinese restaurant table count: l = sum_{n=1..m} Bernoulli(a/(a+n-1)).
    long long crt(long long count, double concentration);

    std::mt19937_64& engine() { return engine_; }

    /// Number of gamma draws clamped away from zero since process start.
    static std::uint64_t underflow_clamps();

  private:
    std::uint64_t seed_;
    std::uint64_t substream_counter_ = 0;
    std::mt19937_64 engine_;
};

}  // namespace bptd
