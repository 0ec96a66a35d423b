#include "bptd/allocation.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bptd {

namespace {

constexpr double kRescaleHigh = 1e300;
constexpr double kRescaleLow = 1e-300;

// Rescale by the max weight when the weights leave the safe linear range.
// When every product underflowed to zero, recompute through the supplied
// per-index log-weight function (state entries are clamped strictly positive,
// so the logs are finite).
template <typename LogWeightFn>
void guard_rescale(std::span<double> w, LogWeightFn&& log_weight) {
    double max_w = 0.0;
    for (double x : w) max_w = std::max(max_w, x);
    if (max_w <= 0.0 || !std::isfinite(max_w)) {
        // underflow to all-zero, or overflow past the representable range
        double max_lw = -std::numeric_limits<double>::infinity();
        for (std::size_t n = 0; n < w.size(); ++n) {
            w[n] = log_weight(n);
            max_lw = std::max(max_lw, w[n]);
        }
        if (!std::isfinite(max_lw)) throw std::runtime_error("allocation: degenerate class weights");
        for (double& x : w) x = std::exp(x - max_lw);
        return;
    }
    if (max_w > kRescaleHigh || max_w < kRescaleLow) {
        for (double& x : w) x /= max_w;
    }
}

}  // namespace

std::vector<Token> tokens_from_tensor(const CountTensor& tensor) {
    std::vector<Token> tokens;
    tokens.reserve(static_cast<std::size_t>(tensor.total()));
    for (const auto& e : tensor.sorted_entries()) {
        for (std::int64_t n = 0; n < e.count; ++n) tokens.push_back({e.i, e.j, e.a, e.t});
    }
    return tokens;
}

LatentSources::LatentSources(const ModelDims& dims) {
    send.assign(static_cast<std::size_t>(dims.V) * dims.C, 0);
    recv.assign(static_cast<std::size_t>(dims.V) * dims.C, 0);
    topic.assign(static_cast<std::size_t>(dims.A) * dims.K, 0);
    regime.assign(static_cast<std::size_t>(dims.T) * dims.R, 0);
    core_counts.assign(dims.core_size(), 0);
}

void LatentSources::merge(const LatentSources& other) {
    auto add = [](std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
        for (std::size_t n = 0; n < a.size(); ++n) a[n] += b[n];
    };
    add(send, other.send);
    add(recv, other.recv);
    add(topic, other.topic);
    add(regime, other.regime);
    add(core_counts, other.core_counts);
    total += other.total;
}

LatentSources aggregate_sources(const ModelDims& dims, std::span<const Token> tokens,
                                std::span<const TokenAssignment> assignments) {
    if (tokens.size() != assignments.size()) {
        throw std::invalid_argument("aggregate_sources: token/assignment size mismatch");
    }
    LatentSources src(dims);
    for (std::size_t n = 0; n < tokens.size(); ++n) {
        const Token& e = tokens[n];
        const TokenAssignment& z = assignments[n];
        src.send[static_cast<std::size_t>(e.i) * dims.C + z.c] += 1;
        src.recv[static_cast<std::size_t>(e.j) * dims.C + z.d] += 1;
        src.topic[static_cast<std::size_t>(e.a) * dims.K + z.k] += 1;
        src.regime[static_cast<std::size_t>(e.t) * dims.R + z.r] += 1;
        src.core_counts[dims.core_index(z.c, z.d, z.k, z.r)] += 1;
    }
    src.total = static_cast<std::int64_t>(tokens.size());
    return src;
}

namespace {

// Shared per-range implementations; the parallel entry points run these on
// contiguous token slices with per-worker streams and accumulators.

void joint_range(const BPTDState& state, std::span<const Token> tokens,
                 std::span<TokenAssignment> assignments, std::size_t begin, std::size_t end,
                 RngStream& rng, LatentSources& src, std::uint64_t& weight_evals) {
    const ModelDims& m = state.dims;
    const std::size_t n_classes = m.core_size();
    std::vector<double> w(n_classes);
    for (std::size_t n = begin; n < end; ++n) {
        const Token& e = tokens[n];
        std::size_t idx = 0;
        for (int c = 0; c < m.C; ++c) {
            const double wc = state.theta_at(static_cast<int>(e.i), c);
            for (int d = 0; d < m.C; ++d) {
                const double wcd = wc * state.theta_at(static_cast<int>(e.j), d);
                for (int k = 0; k < m.K; ++k) {
                    const double wcdk = wcd * state.phi_at(static_cast<int>(e.a), k);
                    const double* lam = &state.core[m.core_index(c, d, k, 0)];
                    for (int r = 0; r < m.R; ++r) {
                        w[idx++] = wcdk * state.psi_at(static_cast<int>(e.t), r) * lam[r];
                    }
                }
            }
        }
        weight_evals += n_classes;
        guard_rescale(std::span<double>(w), [&](std::size_t flat) {
            const ModelDims& md = state.dims;
            std::size_t rest = flat;
            const int rr = static_cast<int>(rest % static_cast<std::size_t>(md.R));
            rest /= static_cast<std::size_t>(md.R);
            const int kk = static_cast<int>(rest % static_cast<std::size_t>(md.K));
            rest /= static_cast<std::size_t>(md.K);
            const int dd = static_cast<int>(rest % static_cast<std::size_t>(md.C));
            const int cc = static_cast<int>(rest / static_cast<std::size_t>(md.C));
            return std::log(state.theta_at(static_cast<int>(e.i), cc)) +
                   std::log(state.theta_at(static_cast<int>(e.j), dd)) +
                   std::log(state.phi_at(static_cast<int>(e.a), kk)) +
                   std::log(state.psi_at(static_cast<int>(e.t), rr)) +
                   std::log(state.core_at(cc, dd, kk, rr));
        });
        std::size_t z = rng.categorical(w);
        const int r = static_cast<int>(z % static_cast<std::size_t>(m.R));
        z /= static_cast<std::size_t>(m.R);
        const int k = static_cast<int>(z % static_cast<std::size_t>(m.K));
        z /= static_cast<std::size_t>(m.K);
        const int d = static_cast<int>(z % static_cast<std::size_t>(m.C));
        const int c = static_cast<int>(z / static_cast<std::size_t>(m.C));
        assignments[n] = {static_cast<std::uint16_t>(c), static_cast<std::uint16_t>(d),
                          static_cast<std::uint16_t>(k), static_cast<std::uint16_t>(r)};
        src.send[e.i * static_cast<std::size_t>(m.C) + static_cast<std::size_t>(c)] += 1;
        src.recv[e.j * static_cast<std::size_t>(m.C) + static_cast<std::size_t>(d)] += 1;
        src.topic[e.a * static_cast<std::size_t>(m.K) + static_cast<std::size_t>(k)] += 1;
        src.regime[e.t * static_cast<std::size_t>(m.R) + static_cast<std::size_t>(r)] += 1;
        src.core_counts[m.core_index(c, d, k, r)] += 1;
        src.total += 1;
    }
}

void compositional_range(const BPTDState& state, std::span<const Token> tokens,
                         std::span<TokenAssignment> assignments, std::size_t begin, std::size_t end,
                         RngStream& rng, LatentSources& src, std::uint64_t& weight_evals) {
    const ModelDims& m = state.dims;
    const std::size_t strideC = static_cast<std::size_t>(m.C) * m.K * m.R;  // c step
    const std::size_t strideD = static_cast<std::size_t>(m.K) * m.R;        // d step
    const std::size_t strideK = static_cast<std::size_t>(m.R);              // k step
    std::vector<double> w(static_cast<std::size_t>(std::max(m.C, std::max(m.K, m.R))));
    for (std::size_t n = begin; n < end; ++n) {
        const Token& e = tokens[n];
        TokenAssignment z = assignments[n];
        int c = z.c, d = z.d, k = z.k, r = z.r;

        // c | d, k, r
        {
            const double* theta_i = &state.theta[e.i * static_cast<std::size_t>(m.C)];
            const std::size_t base = static_cast<std::size_t>(d) * strideD + static_cast<std::size_t>(k) * strideK +
                                     static_cast<std::size_t>(r);
            for (int cc = 0; cc < m.C; ++cc) {
                w[static_cast<std::size_t>(cc)] = theta_i[cc] * state.core[base + static_cast<std::size_t>(cc) * strideC];
            }
            std::span<double> view(w.data(), static_cast<std::size_t>(m.C));
            guard_rescale(view, [&](std::size_t cc) {
                return std::log(theta_i[cc]) + std::log(state.core[base + cc * strideC]);
            });
            c = static_cast<int>(rng.categorical(view));
            weight_evals += static_cast<std::uint64_t>(m.C);
        }
        // d | c, k, r
        {
            const double* theta_j = &state.theta[e.j * static_cast<std::size_t>(m.C)];
            const std::size_t base = static_cast<std::size_t>(c) * strideC + static_cast<std::size_t>(k) * strideK +
                                     static_cast<std::size_t>(r);
            for (int dd = 0; dd < m.C; ++dd) {
                w[static_cast<std::size_t>(dd)] = theta_j[dd] * state.core[base + static_cast<std::size_t>(dd) * strideD];
            }
            std::span<double> view(w.data(), static_cast<std::size_t>(m.C));
            guard_rescale(view, [&](std::size_t dd) {
                return std::log(theta_j[dd]) + std::log(state.core[base + dd * strideD]);
            });
            d = static_cast<int>(rng.categorical(view));
            weight_evals += static_cast<std::uint64_t>(m.C);
        }
        // k | c, d, r
        {
            const double* phi_a = &state.phi[e.a * static_cast<std::size_t>(m.K)];
            const std::size_t base = static_cast<std::size_t>(c) * strideC + static_cast<std::size_t>(d) * strideD +
                                     static_cast<std::size_t>(r);
            for (int kk = 0; kk < m.K; ++kk) {
                w[static_cast<std::size_t>(kk)] = phi_a[kk] * state.core[base + static_cast<std::size_t>(kk) * strideK];
            }
            std::span<double> view(w.data(), static_cast<std::size_t>(m.K));
            guard_rescale(view, [&](std::size_t kk) {
                return std::log(phi_a[kk]) + std::log(state.core[base + kk * strideK]);
            });
            k = static_cast<int>(rng.categorical(view));
            weight_evals += static_cast<std::uint64_t>(m.K);
        }
        // r | c, d, k
        {
            const double* psi_t = &state.psi[e.t * static_cast<std::size_t>(m.R)];
            const double* lam = &state.core[m.core_index(c, d, k, 0)];
            for (int rr = 0; rr < m.R; ++rr) {
                w[static_cast<std::size_t>(rr)] = psi_t[rr] * lam[rr];
            }
            std::span<double> view(w.data(), static_cast<std::size_t>(m.R));
            guard_rescale(view, [&](std::size_t rr) {
                return std::log(psi_t[rr]) + std::log(lam[rr]);
            });
            r = static_cast<int>(rng.categorical(view));
            weight_evals += static_cast<std::uint64_t>(m.R);
        }

        assignments[n] = {static_cast<std::uint16_t>(c), static_cast<std::uint16_t>(d),
                          static_cast<std::uint16_t>(k), static_cast<std::uint16_t>(r)};
        src.send[e.i * static_cast<std::size_t>(m.C) + static_cast<std::size_t>(c)] += 1;
        src.recv[e.j * static_cast<std::size_t>(m.C) + static_cast<std::size_t>(d)] += 1;
        src.topic[e.a * static_cast<std::size_t>(m.K) + static_cast<std::size_t>(k)] += 1;
        src.regime[e.t * static_cast<std::size_t>(m.R) + static_cast<std::size_t>(r)] += 1;
        src.core_counts[m.core_index(c, d, k, r)] += 1;
        src.total += 1;
    }
}

using RangeFn = void (*)(const BPTDState&, std::span<const Token>, std::span<TokenAssignment>, std::size_t,
                         std::size_t, RngStream&, LatentSources&, std::uint64_t&);

LatentSources run_parallel(RangeFn fn, const BPTDState& state, std::span<const Token> tokens,
                           std::vector<TokenAssignment>& assignments, RngStream& rng, int workers,
                           AllocationStats* stats) {
    if (workers < 1) throw std::invalid_argument("allocation: workers must be >= 1");
    const ModelDims& m = state.dims;
    const std::size_t n = tokens.size();
    std::vector<RngStream> streams;
    streams.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) streams.push_back(rng.next_substream());
    std::vector<LatentSources> locals(static_cast<std::size_t>(workers), LatentSources(m));
    std::vector<std::uint64_t> evals(static_cast<std::size_t>(workers), 0);

#ifdef _OPENMP
#pragma omp parallel for num_threads(workers) schedule(static, 1)
#endif
    for (int w = 0; w < workers; ++w) {
        const std::size_t begin = n * static_cast<std::size_t>(w) / static_cast<std::size_t>(workers);
        const std::size_t end = n * static_cast<std::size_t>(w + 1) / static_cast<std::size_t>(workers);
        fn(state, tokens, assignments, begin, end, streams[static_cast<std::size_t>(w)],
           locals[static_cast<std::size_t>(w)], evals[static_cast<std::size_t>(w)]);
    }

    LatentSources src(m);
    for (int w = 0; w < workers; ++w) src.merge(locals[static_cast<std::size_t>(w)]);
    if (stats) {
        for (auto e : evals) stats->weight_evals += e;
    }
    return src;
}

}  // namespace

LatentSources allocate_joint(const BPTDState& state, std::span<const Token> tokens,
                             std::vector<TokenAssignment>& assignments, RngStream& rng,
                             AllocationStats* stats) {
    assignments.resize(tokens.size());
    LatentSources src(state.dims);
    std::uint64_t evals = 0;
    joint_range(state, tokens, assignments, 0, tokens.size(), rng, src, evals);
    if (stats) stats->weight_evals += evals;
    return src;
}

LatentSources allocate_compositional(const BPTDState& state, std::span<const Token> tokens,
                                     std::vector<TokenAssignment>& assignments, RngStream& rng,
                                     AllocationStats* stats) {
    if (assignments.size() != tokens.size()) {
        throw std::invalid_argument("allocate_compositional: assignments must carry current classes");
    }
    LatentSources src(state.dims);
    std::uint64_t evals = 0;
    compositional_range(state, tokens, assignments, 0, tokens.size(), rng, src, evals);
    if (stats) stats->weight_evals += evals;
    return src;
}

LatentSources allocate_joint_parallel(const BPTDState& state, std::span<const Token> tokens,
                                      std::vector<TokenAssignment>& assignments, RngStream& rng,
                                      int workers, AllocationStats* stats) {
    assignments.resize(tokens.size());
    return run_parallel(&joint_range, state, tokens, assignments, rng, workers, stats);
}

LatentSources allocate_compositional_parallel(const BPTDState& state, std::span<const Token> tokens,
                                              std::vector<TokenAssignment>& assignments, RngStream& rng,
                                              int workers, AllocationStats* stats) {
    if (assignments.size() != tokens.size()) {
        throw std::invalid_argument("allocate_compositional_parallel: assignments must carry current classes");
    }
    return run_parallel(&compositional_range, state, tokens, assignments, rng, workers, stats);
}

void init_assignments_uniform(const ModelDims& dims, std::size_t n_tokens,
                              std::vector<TokenAssignment>& assignments, RngStream& rng) {
    assignments.resize(n_tokens);
    for (auto& z : assignments) {
        z.c = static_cast<std::uint16_t>(rng.uniform() * dims.C);
        z.d = static_cast<std::uint16_t>(rng.uniform() * dims.C);
        z.k = static_cast<std::uint16_t>(rng.uniform() * dims.K);
        z.r = static_cast<std::uint16_t>(rng.uniform() * dims.R);
        z.c = std::min<std::uint16_t>(z.c, static_cast<std::uint16_t>(dims.C - 1));
        z.d = std::min<std::uint16_t>(z.d, static_cast<std::uint16_t>(dims.C - 1));
        z.k = std::min<std::uint16_t>(z.k, static_cast<std::uint16_t>(dims.K - 1));
        z.r = std::min<std::uint16_t>(z.r, static_cast<std::uint16_t>(dims.R - 1));
    }
}

AllocationCost allocation_cost(const ModelDims& dims) {
    dims.validate();
    AllocationCost cost;
    cost.joint_classes = static_cast<std::int64_t>(dims.C) * dims.C * dims.K * dims.R;
    cost.compositional_weights = 2LL * dims.C + dims.K + dims.R;
    cost.ratio = static_cast<double>(cost.joint_classes) / static_cast<double>(cost.compositional_weights);
    return cost;
}

std::vector<double> enumerate_class_probs(const BPTDState& state, const Token& token) {
    const ModelDims& m = state.dims;
    std::vector<double> p(m.core_size());
    double total = 0.0;
    std::size_t idx = 0;
    for (int c = 0; c < m.C; ++c) {
        for (int d = 0; d < m.C; ++d) {
            for (int k = 0; k < m.K; ++k) {
                for (int r = 0; r < m.R; ++r) {
                    double w = state.theta_at(static_cast<int>(token.i), c) *
                               state.theta_at(static_cast<int>(token.j), d) *
                               state.phi_at(static_cast<int>(token.a), k) *
                               state.psi_at(static_cast<int>(token.t), r) * state.core_at(c, d, k, r);
                    p[idx++] = w;
                    total += w;
                }
            }
        }
    }
    if (total <= 0.0) throw std::runtime_error("enumerate_class_probs: zero normalizer");
    for (double& x : p) x /= total;
    return p;
}

}  // namespace bptd
