#include "bptd/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bptd {

void ModelDims::validate() const {
    if (V < 1 || A < 1 || T < 1 || C < 1 || K < 1 || R < 1) {
        throw std::invalid_argument("ModelDims: all dimensions must be >= 1");
    }
}

void Hyperparams::validate() const {
    if (!(eps0 > 0.0) || !(gamma0 > 0.0)) {
        throw std::invalid_argument("Hyperparams: eps0 and gamma0 must be positive");
    }
}

double BPTDState::core_shape(int c, int d, int k, int r) const {
    double base = nu[static_cast<std::size_t>(k)] * rho[static_cast<std::size_t>(r)];
    double shape;
    if (c == d) {
        shape = eta_within[static_cast<std::size_t>(c)] * eta_between[static_cast<std::size_t>(c)] * base;
    } else {
        shape = eta_between[static_cast<std::size_t>(c)] * eta_between[static_cast<std::size_t>(d)] * base;
    }
    // shrinkage weights clamp at the smallest normal value; their products
    // must neither underflow to an invalid zero shape nor overflow past the
    // representable range
    return std::clamp(shape, std::numeric_limits<double>::min(), 1e300);
}

bool BPTDState::all_positive_finite() const {
    auto ok = [](const std::vector<double>& v) {
        for (double x : v) {
            if (!(x > 0.0) || !std::isfinite(x)) return false;
        }
        return true;
    };
    return ok(theta) && ok(phi) && ok(psi) && ok(core) && ok(eta_within) && ok(eta_between) && ok(nu) &&
           ok(rho) && ok(alpha) && ok(beta) && delta > 0.0 && std::isfinite(delta) && zeta > 0.0 &&
           std::isfinite(zeta);
}

BPTDState sample_prior(const ModelDims& dims, const Hyperparams& hyper, RngStream& rng,
                       const PriorOverrides& overrides) {
    dims.validate();
    hyper.validate();
    const double e0 = hyper.eps0;
    BPTDState s;
    s.dims = dims;
    s.hyper = hyper;
    s.alpha.resize(dims.V);
    s.beta.resize(dims.V);
    for (int i = 0; i < dims.V; ++i) s.alpha[i] = rng.gamma(e0, e0);
    for (int i = 0; i < dims.V; ++i) s.beta[i] = rng.gamma(e0, e0);
    s.theta.resize(static_cast<std::size_t>(dims.V) * dims.C);
    for (int i = 0; i < dims.V; ++i) {
        for (int c = 0; c < dims.C; ++c) {
            s.theta[static_cast<std::size_t>(i) * dims.C + c] = rng.gamma(s.alpha[i], s.beta[i]);
        }
    }
    s.phi.resize(static_cast<std::size_t>(dims.A) * dims.K);
    for (auto& x : s.phi) x = rng.gamma(e0, e0);
    s.psi.resize(static_cast<std::size_t>(dims.T) * dims.R);
    for (auto& x : s.psi) x = rng.gamma(e0, e0);

    s.delta = overrides.delta ? *overrides.delta : rng.gamma(e0, e0);
    s.zeta = overrides.zeta ? *overrides.zeta : rng.gamma(e0, e0);

    s.eta_within.resize(dims.C);
    for (auto& x : s.eta_within) x = rng.gamma(e0, e0);
    s.eta_between.resize(dims.C);
    for (auto& x : s.eta_between) x = rng.gamma(hyper.gamma0 / dims.C, s.zeta);
    s.nu.resize(dims.K);
    for (auto& x : s.nu) x = rng.gamma(hyper.gamma0 / dims.K, s.zeta);
    s.rho.resize(dims.R);
    for (auto& x : s.rho) x = rng.gamma(hyper.gamma0 / dims.R, s.zeta);

    s.core.resize(dims.core_size());
    for (int c = 0; c < dims.C; ++c) {
        for (int d = 0; d < dims.C; ++d) {
            for (int k = 0; k < dims.K; ++k) {
                for (int r = 0; r < dims.R; ++r) {
                    s.core[dims.core_index(c, d, k, r)] = rng.gamma(s.core_shape(c, d, k, r), s.delta);
                }
            }
        }
    }
    return s;
}

double poisson_rate(const BPTDState& state, int i, int j, int a, int t) {
    const ModelDims& m = state.dims;
    if (i < 0 || i >= m.V || j < 0 || j >= m.V || a < 0 || a >= m.A || t < 0 || t >= m.T) {
        throw std::out_of_range("poisson_rate: index out of bounds");
    }
    if (i == j) throw std::invalid_argument("poisson_rate: self-pairs are outside the model");
    double rate = 0.0;
    for (int c = 0; c < m.C; ++c) {
        const double th_i = state.theta_at(i, c);
        double acc_c = 0.0;
        for (int d = 0; d < m.C; ++d) {
            const double th_j = state.theta_at(j, d);
            double acc_d = 0.0;
            for (int k = 0; k < m.K; ++k) {
                const double ph = state.phi_at(a, k);
                double acc_k = 0.0;
                const double* lam = &state.core[m.core_index(c, d, k, 0)];
                for (int r = 0; r < m.R; ++r) acc_k += state.psi_at(t, r) * lam[r];
                acc_d += ph * acc_k;
            }
            acc_c += th_j * acc_d;
        }
        rate += th_i * acc_c;
    }
    return rate;
}

double expected_core_sum(double gamma0, double zeta, double delta, int C) {
    if (!(gamma0 > 0.0) || !(zeta > 0.0) || !(delta > 0.0) || C < 1) {
        throw std::invalid_argument("expected_core_sum: arguments must be positive");
    }
    const double g3 = gamma0 * gamma0 * gamma0;
    const double g4 = g3 * gamma0;
    const double z3 = zeta * zeta * zeta;
    const double z4 = z3 * zeta;
    const double off = (static_cast<double>(C) - 1.0) / static_cast<double>(C);
    return (g3 / z3 + off * g4 / z4) / delta;
}

double expected_core_sum_limit(double gamma0, double zeta, double delta) {
    if (!(gamma0 > 0.0) || !(zeta > 0.0) || !(delta > 0.0)) {
        throw std::invalid_argument("expected_core_sum_limit: arguments must be positive");
    }
    const double g3 = gamma0 * gamma0 * gamma0;
    const double z3 = zeta * zeta * zeta;
    return (g3 / z3 + g3 * gamma0 / (z3 * zeta)) / delta;
}

CountTensor simulate(const BPTDState& state, RngStream& rng) {
    const ModelDims& m = state.dims;
    CountTensor tensor(m.V, m.A, m.T);
    // Per-(a,t) community mixing matrix M[c][d] = sum_{k,r} phi_ak psi_tr core.
    std::vector<double> M(static_cast<std::size_t>(m.C) * m.C);
    for (int a = 0; a < m.A; ++a) {
        for (int t = 0; t < m.T; ++t) {
            for (int c = 0; c < m.C; ++c) {
                for (int d = 0; d < m.C; ++d) {
                    double acc = 0.0;
                    for (int k = 0; k < m.K; ++k) {
                        const double ph = state.phi_at(a, k);
                        const double* lam = &state.core[m.core_index(c, d, k, 0)];
                        for (int r = 0; r < m.R; ++r) acc += ph * state.psi_at(t, r) * lam[r];
                    }
                    M[static_cast<std::size_t>(c) * m.C + d] = acc;
                }
            }
            for (int i = 0; i < m.V; ++i) {
                for (int j = 0; j < m.V; ++j) {
                    if (i == j) continue;
                    double rate = 0.0;
                    for (int c = 0; c < m.C; ++c) {
                        const double th_i = state.theta_at(i, c);
                        double acc = 0.0;
                        for (int d = 0; d < m.C; ++d) {
                            acc += M[static_cast<std::size_t>(c) * m.C + d] * state.theta_at(j, d);
                        }
                        rate += th_i * acc;
                    }
                    long long y = rng.poisson(rate);
                    if (y > 0) {
                        tensor.add(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                                   static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(t), y);
                    }
                }
            }
        }
    }
    return tensor;
}

namespace {

int count_above(const std::vector<double>& weights, double threshold_fraction) {
    double max_w = 0.0;
    for (double w : weights) max_w = std::max(max_w, w);
    int n = 0;
    for (double w : weights) {
        if (w > threshold_fraction * max_w) ++n;
    }
    return n;
}

}  // namespace

EffectiveDims effective_dims(const BPTDState& state, double threshold_fraction) {
    if (!(threshold_fraction > 0.0) || !(threshold_fraction < 1.0)) {
        throw std::invalid_argument("effective_dims: threshold_fraction must be in (0, 1)");
    }
    EffectiveDims e;
    e.c_eff = count_above(state.eta_between, threshold_fraction);
    e.k_eff = count_above(state.nu, threshold_fraction);
    e.r_eff = count_above(state.rho, threshold_fraction);
    return e;
}

Aggregates compute_aggregates(const BPTDState& state) {
    const ModelDims& m = state.dims;
    Aggregates agg;
    agg.F.assign(m.K, 0.0);
    for (int a = 0; a < m.A; ++a) {
        for (int k = 0; k < m.K; ++k) agg.F[k] += state.phi_at(a, k);
    }
    agg.P.assign(m.R, 0.0);
    for (int t = 0; t < m.T; ++t) {
        for (int r = 0; r < m.R; ++r) agg.P[r] += state.psi_at(t, r);
    }
    agg.S.assign(m.C, 0.0);
    std::vector<double> Q(static_cast<std::size_t>(m.C) * m.C, 0.0);
    for (int i = 0; i < m.V; ++i) {
        const double* row = &state.theta[static_cast<std::size_t>(i) * m.C];
        for (int c = 0; c < m.C; ++c) {
            agg.S[c] += row[c];
            for (int d = 0; d < m.C; ++d) {
                Q[static_cast<std::size_t>(c) * m.C + d] += row[c] * row[d];
            }
        }
    }
    agg.X.resize(Q.size());
    for (int c = 0; c < m.C; ++c) {
        for (int d = 0; d < m.C; ++d) {
            // nonnegative by construction; clamp away cancellation error
            agg.X[static_cast<std::size_t>(c) * m.C + d] =
                std::max(agg.S[c] * agg.S[d] - Q[static_cast<std::size_t>(c) * m.C + d], 0.0);
        }
    }
    return agg;
}

double total_rate(const BPTDState& state) {
    const ModelDims& m = state.dims;
    Aggregates agg = compute_aggregates(state);
    double total = 0.0;
    for (int c = 0; c < m.C; ++c) {
        for (int d = 0; d < m.C; ++d) {
            const double x = agg.X[static_cast<std::size_t>(c) * m.C + d];
            for (int k = 0; k < m.K; ++k) {
                const double* lam = &state.core[m.core_index(c, d, k, 0)];
                for (int r = 0; r < m.R; ++r) {
                    total += x * agg.F[k] * agg.P[r] * lam[r];
                }
            }
        }
    }
    return total;
}

}  // namespace bptd
