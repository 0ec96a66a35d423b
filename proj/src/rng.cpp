#include "bptd/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bptd {

namespace {

std::atomic<std::uint64_t> g_underflow_clamps{0};

// SplitMix64; used to spread user seeds and derive substream seeds.
std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

RngStream RngStream::substream(std::uint64_t stream_id) const {
    return RngStream(splitmix64(seed_ ^ splitmix64(stream_id + 1)));
}

RngStream RngStream::next_substream() {
    return substream(substream_counter_++);
}

double RngStream::uniform() {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double x;
    do {
        x = u(engine_);
    } while (x <= 0.0);
    return x;
}

double RngStream::gamma(double shape, double rate) {
    if (!(shape > 0.0) || !(rate > 0.0) || std::isnan(shape) || std::isnan(rate)) {
        throw std::invalid_argument("gamma: shape and rate must be positive");
    }
    // Conditional-posterior parameters can overflow in the far tails of the
    // prior; the draw itself is indistinguishable after capping.
    shape = std::min(shape, 1e300);
    rate = std::min(rate, 1e300);
    std::gamma_distribution<double> g(shape, 1.0 / rate);
    double x = g(engine_);
    if (x > std::numeric_limits<double>::max()) {
        x = std::numeric_limits<double>::max();
    } else if (x <= 0.0 || !std::isnormal(x)) {
        // Downstream conditionals divide by factor values; keep draws normal.
        x = std::numeric_limits<double>::min();
        g_underflow_clamps.fetch_add(1, std::memory_order_relaxed);
    }
    return x;
}

long long RngStream::poisson(double rate) {
    if (rate < 0.0 || !std::isfinite(rate)) {
        throw std::invalid_argument("poisson: rate must be nonnegative and finite");
    }
    if (rate == 0.0) return 0;
    std::poisson_distribution<long long> p(rate);
    return p(engine_);
}

std::size_t RngStream::categorical(std::span<const double> weights) {
    if (weights.empty()) throw std::invalid_argument("categorical: no weights");
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0 || !std::isfinite(w)) {
            throw std::invalid_argument("categorical: weights must be finite and nonnegative");
        }
        total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("categorical: all weights zero");
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        acc += weights[k];
        if (u <= acc) return k;
    }
    return weights.size() - 1;  // u landed on accumulated rounding slack
}

long long RngStream::crt(long long count, double concentration) {
    if (count < 0) throw std::invalid_argument("crt: count must be nonnegative");
    if (!(concentration > 0.0) || std::isnan(concentration)) {
        throw std::invalid_argument("crt: concentration must be positive");
    }
    concentration = std::min(concentration, 1e300);
    long long tables = 0;
    for (long long n = 1; n <= count; ++n) {
        double p = concentration / (concentration + static_cast<double>(n - 1));
        if (uniform() <= p) ++tables;
    }
    return tables;
}

std::uint64_t RngStream::underflow_clamps() {
    return g_underflow_clamps.load(std::memory_order_relaxed);
}

}  // namespace bptd
