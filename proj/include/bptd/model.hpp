#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bptd/event_store.hpp"
#include "bptd/rng.hpp"

namespace bptd {

struct ModelDims {
    int V = 1;  // countries
    int A = 1;  // action types
    int T = 1;  // time steps
    int C = 1;  // communities
    int K = 1;  // topics
    int R = 1;  // regimes

    void validate() const;
    std::size_t core_size() const {
        return static_cast<std::size_t>(C) * C * K * R;
    }
    std::size_t core_index(int c, int d, int k, int r) const {
        return ((static_cast<std::size_t>(c) * C + d) * K + k) * R + r;
    }
};

struct Hyperparams {
    double eps0 = 0.1;
    double gamma0 = 1.0;

    void validate() const;
};

/// Full latent state of the Poisson Tucker model. All entries are strictly
/// positive. Row-major layouts: theta V*C, phi A*K, psi T*R,
/// core ((c*C+d)*K+k)*R+r.
struct BPTDState {
    ModelDims dims;
    Hyperparams hyper;

    std::vector<double> theta;
    std::vector<double> phi;
    std::vector<double> psi;
    std::vector<double> core;
    std::vector<double> eta_within;   // per-community within-interaction weight
    std::vector<double> eta_between;  // per-community between-interaction weight
    std::vector<double> nu;           // per-topic weight
    std::vector<double> rho;          // per-regime weight
    double delta = 1.0;               // core rate
    double zeta = 1.0;                // shared weight rate
    std::vector<double> alpha;        // per-country theta shape
    std::vector<double> beta;         // per-country theta rate

    double theta_at(int i, int c) const { return theta[static_cast<std::size_t>(i) * dims.C + c]; }
    double phi_at(int a, int k) const { return phi[static_cast<std::size_t>(a) * dims.K + k]; }
    double psi_at(int t, int r) const { return psi[static_cast<std::size_t>(t) * dims.R + r]; }
    double core_at(int c, int d, int k, int r) const { return core[dims.core_index(c, d, k, r)]; }

    /// Prior shape of a core cell: eta_c-within eta_c-between nu_k rho_r on the
    /// diagonal, eta_c-between eta_d-between nu_k rho_r off it.
    double core_shape(int c, int d, int k, int r) const;

    /// True when every field is strictly positive and finite.
    bool all_positive_finite() const;
};

/// Optional fixed values for the scalars the prior would otherwise draw;
/// used when conditioning on (gamma0, zeta, delta).
struct PriorOverrides {
    std::optional<double> delta;
    std::optional<double> zeta;
};

/// Draw a full state from the generative prior. zeta is drawn before the
/// shrinkage weights that use it as their rate.
BPTDState sample_prior(const ModelDims& dims, const Hyperparams& hyper, RngStream& rng,
                       const PriorOverrides& overrides = {});

/// Poisson rate for cell (i, j, a, t): the quadruple sum over communities,
/// topics, and regimes. Requires i != j.
double poisson_rate(const BPTDState& state, int i, int j, int a, int t);

/// Expected sum of core elements given (gamma0, zeta, delta) at truncation
/// level C: (1/delta)(gamma0^3/zeta^3 + ((C-1)/C) gamma0^4/zeta^4).
double expected_core_sum(double gamma0, double zeta, double delta, int C);

/// The C -> infinity limit: (1/delta)(gamma0^3/zeta^3 + gamma0^4/zeta^4).
double expected_core_sum_limit(double gamma0, double zeta, double delta);

/// Forward-sample a count tensor: y ~ Poisson(rate(i,j,a,t)) for all i != j.
CountTensor simulate(const BPTDState& state, RngStream& rng);

struct EffectiveDims {
    int c_eff = 0;
    int k_eff = 0;
    int r_eff = 0;
};

/// Count communities/topics/regimes whose shrinkage weight exceeds
/// threshold_fraction times the largest weight of its kind.
EffectiveDims effective_dims(const BPTDState& state, double threshold_fraction = 0.05);

/// Column/mass aggregates shared by the conditional updates.
struct Aggregates {
    std::vector<double> F;  // K: per-topic action mass, sum_a phi_ak
    std::vector<double> P;  // R: per-regime time mass, sum_t psi_tr
    std::vector<double> S;  // C: per-community country mass, sum_i theta_ic
    std::vector<double> X;  // C*C: self-pair-excluded products S_c S_d - sum_i theta_ic theta_id
};

Aggregates compute_aggregates(const BPTDState& state);

/// Sum of all Poisson rates over i != j cells, via the aggregated masses.
double total_rate(const BPTDState& state);

}  // namespace bptd
