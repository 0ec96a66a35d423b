#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bptd/allocation.hpp"
#include "bptd/model.hpp"

namespace bptd {

struct GammaParams {
    double shape = 0.0;
    double rate = 0.0;
};

// Closed-form posterior parameters; kept as pure functions so the conjugacy
// arithmetic is testable against hand calculations.
GammaParams theta_posterior(double alpha_i, double beta_i, std::int64_t count, double exposure);
GammaParams beta_posterior(double eps0, int C, double alpha_i, double theta_row_sum);
GammaParams alpha_posterior(double eps0, std::int64_t tables, double log_exposure_sum);
GammaParams zeta_posterior(double eps0, double gamma0, double weight_sum);
GammaParams delta_posterior(double eps0, double shape_sum, double core_sum);

struct UpdateOptions {
    /// Added to every theta posterior shape; nonzero only as the deliberately
    /// broken control in the Geweke harness.
    double theta_shape_perturb = 0.0;
};

/// theta_ic ~ Gamma(alpha_i + m_ic, beta_i + S_ic), country rows in sequence
/// with the community masses maintained incrementally.
void update_theta(BPTDState& state, const LatentSources& sources, RngStream& rng,
                  const UpdateOptions& options = {});

/// Per country: beta_i by conjugacy, tables ~ CRT(m_ic, alpha_i), alpha_i from
/// the collapsed negative-binomial form, then the theta row is redrawn so that
/// later updates condition on a consistent state.
void update_alpha_beta(BPTDState& state, const LatentSources& sources, RngStream& rng,
                       const UpdateOptions& options = {});

void update_phi(BPTDState& state, const LatentSources& sources, RngStream& rng);
void update_psi(BPTDState& state, const LatentSources& sources, RngStream& rng);

/// Core cells: lambda ~ Gamma(prior shape + count, delta + X_cd F_k P_r).
void update_core(BPTDState& state, const LatentSources& sources, RngStream& rng);

/// delta, then the shrinkage weights via the marginalize-core-then-CRT
/// pattern, then zeta, then a core redraw under the new shapes.
void update_weights(BPTDState& state, const LatentSources& sources, RngStream& rng);

enum class AllocationMode { Joint, Compositional };

struct ClampFlags {
    bool theta = false;
    bool alpha_beta = false;
    bool phi = false;
    bool psi = false;
    bool core = false;
    bool weights = false;
};

struct SweepOptions {
    AllocationMode alloc = AllocationMode::Compositional;
    int workers = 1;
    UpdateOptions update;
    ClampFlags clamp;
};

/// One full Gibbs pass: allocation, aggregation, then every unclamped
/// conditional update in a fixed order. Returns the sweep's latent sources.
LatentSources gibbs_sweep(BPTDState& state, std::span<const Token> tokens,
                          std::vector<TokenAssignment>& assignments, RngStream& rng,
                          const SweepOptions& options = {});

/// Training-data log likelihood under the current state.
double log_likelihood(const BPTDState& state, const CountTensor& tensor);

/// One TSV trace row: iteration, log likelihood, effective dims, scalars.
std::string trace_header();
std::string trace_row(const std::string& model_tag, long long iteration, double loglik,
                      const EffectiveDims& eff, double delta, double zeta);

}  // namespace bptd
