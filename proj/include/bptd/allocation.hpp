#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bptd/model.hpp"

namespace bptd {

/// One event token, flattened out of the sparse tensor with multiplicity.
struct Token {
    std::uint32_t i, j, a, t;
};

/// A token's latent class (c -k-> d, r).
struct TokenAssignment {
    std::uint16_t c = 0, d = 0, k = 0, r = 0;
};

/// Token view of a count tensor, in sorted entry order.
std::vector<Token> tokens_from_tensor(const CountTensor& tensor);

/// Aggregated allocation counts; the sufficient statistics for every
/// conditional update. All marginals sum to the token count.
struct LatentSources {
    std::vector<std::int64_t> send;         // V*C: token sender memberships
    std::vector<std::int64_t> recv;         // V*C: token receiver memberships
    std::vector<std::int64_t> topic;        // A*K
    std::vector<std::int64_t> regime;       // T*R
    std::vector<std::int64_t> core_counts;  // C*C*K*R
    std::int64_t total = 0;

    explicit LatentSources(const ModelDims& dims);
    LatentSources() = default;
    void merge(const LatentSources& other);
};

LatentSources aggregate_sources(const ModelDims& dims, std::span<const Token> tokens,
                                std::span<const TokenAssignment> assignments);

struct AllocationStats {
    std::uint64_t weight_evals = 0;
};

/// Draw each token's class exactly from its conditional by enumerating all
/// C*C*K*R classes. Serial reference implementation.
LatentSources allocate_joint(const BPTDState& state, std::span<const Token> tokens,
                             std::vector<TokenAssignment>& assignments, RngStream& rng,
                             AllocationStats* stats = nullptr);

/// Resample each token's class one coordinate at a time (c, then d, k, r),
/// 2C+K+R categorical weights per token. Leaves the joint conditional
/// invariant; assignments must carry the previous sweep's classes.
LatentSources allocate_compositional(const BPTDState& state, std::span<const Token> tokens,
                                     std::vector<TokenAssignment>& assignments, RngStream& rng,
                                     AllocationStats* stats = nullptr);

/// OpenMP variants: tokens are split into `workers` contiguous ranges, each
/// with its own substream and local accumulator, merged afterwards.
/// Reproducible for a fixed worker count and seed.
LatentSources allocate_joint_parallel(const BPTDState& state, std::span<const Token> tokens,
                                      std::vector<TokenAssignment>& assignments, RngStream& rng,
                                      int workers, AllocationStats* stats = nullptr);

LatentSources allocate_compositional_parallel(const BPTDState& state, std::span<const Token> tokens,
                                              std::vector<TokenAssignment>& assignments, RngStream& rng,
                                              int workers, AllocationStats* stats = nullptr);

/// Uniform-random initial assignments for the first compositional sweep.
void init_assignments_uniform(const ModelDims& dims, std::size_t n_tokens,
                              std::vector<TokenAssignment>& assignments, RngStream& rng);

struct AllocationCost {
    std::int64_t joint_classes = 0;
    std::int64_t compositional_weights = 0;
    double ratio = 0.0;
};

/// Class-enumeration count C*C*K*R vs per-token coordinate weight count
/// 2C+K+R, and their ratio.
AllocationCost allocation_cost(const ModelDims& dims);

/// Enumerated class probabilities for one token (the allocation oracle).
std::vector<double> enumerate_class_probs(const BPTDState& state, const Token& token);

}  // namespace bptd
