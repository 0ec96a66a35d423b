#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bptd/allocation.hpp"
#include "bptd/geweke.hpp"
#include "bptd/model.hpp"

namespace bptd {

/// Nonparametric CP-decomposition baseline: one-dimensional latent classes
/// with per-class shrinkage weights.
struct BPTFState {
    int V = 1, A = 1, T = 1, Q = 1;
    Hyperparams hyper;
    std::vector<double> theta_send;  // V*Q
    std::vector<double> theta_recv;  // V*Q
    std::vector<double> phi;         // A*Q
    std::vector<double> psi;         // T*Q
    std::vector<double> lambda;      // Q per-class weights
    double zeta = 1.0;

    double rate(int i, int j, int a, int t) const;
};

/// Class count matching the total number of latent factors in the Tucker
/// likelihood: ceil((VC + AK + TR + C^2 K R) / (V + V + A + T + 1)).
int bptf_q_for_parity(int V, int A, int T, int C, int K, int R);

BPTFState bptf_sample_prior(int V, int A, int T, int Q, const Hyperparams& hyper, RngStream& rng);
CountTensor bptf_simulate(const BPTFState& state, RngStream& rng);

struct BPTFSources {
    std::vector<std::int64_t> send, recv;    // V*Q
    std::vector<std::int64_t> topic, regime; // A*Q, T*Q
    std::vector<std::int64_t> cls;           // Q
    std::int64_t total = 0;
};

/// Non-compositional allocation: each token draws its class from Q weights.
BPTFSources bptf_allocate(const BPTFState& state, std::span<const Token> tokens,
                          std::vector<std::uint16_t>& assignments, RngStream& rng);

/// One Gibbs pass: allocation, then conjugate updates for all factor
/// matrices, the class weights, and zeta.
void bptf_sweep(BPTFState& state, std::span<const Token> tokens,
                std::vector<std::uint16_t>& assignments, RngStream& rng);

GewekeResult geweke_bptf(int V, int A, int T, int Q, const Hyperparams& hyper,
                         const GewekeConfig& config, RngStream& rng);

double bptf_log_likelihood(const BPTFState& state, const CountTensor& tensor);

/// Gamma-Poisson infinite relational model: one-hot entity assignments with a
/// per-class-cell rate tensor; the degree-corrected variant adds a positive
/// scalar per entity.
struct GPIRMState {
    ModelDims dims;
    Hyperparams hyper;
    bool degree_corrected = false;
    std::vector<int> z_country;  // V, values in [C]
    std::vector<int> z_action;   // A, values in [K]
    std::vector<int> z_time;     // T, values in [R]
    std::vector<double> core;    // C*C*K*R
    std::vector<double> deg_country;  // V; all ones when not degree corrected
    std::vector<double> deg_action;   // A
    std::vector<double> deg_time;     // T

    double rate(int i, int j, int a, int t) const;
};

GPIRMState gpirm_sample_prior(const ModelDims& dims, const Hyperparams& hyper, bool degree_corrected,
                              RngStream& rng);
CountTensor gpirm_simulate(const GPIRMState& state, RngStream& rng);

/// One Gibbs pass: entity assignments from their discrete conditionals, then
/// degree scalars (if enabled), then core cells by conjugacy.
void gpirm_sweep(GPIRMState& state, const CountTensor& tensor, RngStream& rng);

/// One-hot embedding into the Tucker parameterization; the embedded state
/// reproduces the GPIRM rates exactly.
BPTDState gpirm_embed(const GPIRMState& state);

GewekeResult geweke_gpirm(const ModelDims& dims, const Hyperparams& hyper, bool degree_corrected,
                          const GewekeConfig& config, RngStream& rng);

double gpirm_log_likelihood(const GPIRMState& state, const CountTensor& tensor);

}  // namespace bptd
