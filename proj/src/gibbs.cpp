#include "bptd/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace bptd {

GammaParams theta_posterior(double alpha_i, double beta_i, std::int64_t count, double exposure) {
    return {alpha_i + static_cast<double>(count), beta_i + exposure};
}

GammaParams beta_posterior(double eps0, int C, double alpha_i, double theta_row_sum) {
    return {eps0 + static_cast<double>(C) * alpha_i, eps0 + theta_row_sum};
}

GammaParams alpha_posterior(double eps0, std::int64_t tables, double log_exposure_sum) {
    return {eps0 + static_cast<double>(tables), eps0 + log_exposure_sum};
}

GammaParams zeta_posterior(double eps0, double gamma0, double weight_sum) {
    return {eps0 + 3.0 * gamma0, eps0 + weight_sum};
}

GammaParams delta_posterior(double eps0, double shape_sum, double core_sum) {
    return {eps0 + shape_sum, eps0 + core_sum};
}

namespace {

// Exposures are sums of factor products; in the far tails of the prior they
// can overflow even though the resulting gamma draw would simply underflow.
// Cap with headroom for the prior-rate addition; NaN still signals a logic
// error.
double guard_exposure(double x, const char* what) {
    if (std::isnan(x)) throw std::runtime_error(std::string("gibbs: non-finite ") + what);
    return std::min(x, 1e300);
}

// Product of nonnegative factors, capped so later multiplications cannot
// produce inf (and inf * 0 cannot produce NaN).
double capped_mul(double a, double b) { return std::min(a * b, 1e300); }

// W[c][d] = sum_{k,r} (core[c,d,k,r] + core[d,c,k,r]) F_k P_r: the community
// pair mass multiplying theta exposures from both the sender and receiver role.
std::vector<double> pair_mass(const BPTDState& state, const Aggregates& agg) {
    const ModelDims& m = state.dims;
    std::vector<double> lam(static_cast<std::size_t>(m.C) * m.C, 0.0);
    for (int c = 0; c < m.C; ++c) {
        for (int d = 0; d < m.C; ++d) {
            double acc = 0.0;
            for (int k = 0; k < m.K; ++k) {
                const double* cell = &state.core[m.core_index(c, d, k, 0)];
                for (int r = 0; r < m.R; ++r) acc += cell[r] * agg.F[k] * agg.P[r];
            }
            lam[static_cast<std::size_t>(c) * m.C + d] = guard_exposure(acc, "pair mass");
        }
    }
    std::vector<double> w(lam.size());
    for (int c = 0; c < m.C; ++c) {
        for (int d = 0; d < m.C; ++d) {
            w[static_cast<std::size_t>(c) * m.C + d] = lam[static_cast<std::size_t>(c) * m.C + d] +
                                                       lam[static_cast<std::size_t>(d) * m.C + c];
        }
    }
    return w;
}

struct ThetaExposure {
    std::vector<double> S;  // running community masses
    std::vector<double> W;  // pair masses

    ThetaExposure(const BPTDState& state, const Aggregates& agg)
        : S(agg.S), W(pair_mass(state, agg)) {}

    // Exposures for country i's row; free of the row itself since i != j.
    void row(const BPTDState& state, int i, std::vector<double>& out) const {
        const ModelDims& m = state.dims;
        out.assign(static_cast<std::size_t>(m.C), 0.0);
        for (int c = 0; c < m.C; ++c) {
            double acc = 0.0;
            for (int d = 0; d < m.C; ++d) {
                const double others = std::max(S[static_cast<std::size_t>(d)] - state.theta_at(i, d), 0.0);
                acc += W[static_cast<std::size_t>(c) * m.C + d] * others;
            }
            out[static_cast<std::size_t>(c)] = guard_exposure(acc, "theta exposure");
        }
    }

    void replace_row(const BPTDState& state, int i, std::span<const double> old_row) {
        const ModelDims& m = state.dims;
        for (int c = 0; c < m.C; ++c) {
            S[static_cast<std::size_t>(c)] += state.theta_at(i, c) - old_row[static_cast<std::size_t>(c)];
        }
    }
};

}  // namespace

void update_theta(BPTDState& state, const LatentSources& sources, RngStream& rng,
                  const UpdateOptions& options) {
    const ModelDims& m = state.dims;
    Aggregates agg = compute_aggregates(state);
    ThetaExposure exposure(state, agg);
    std::vector<double> expo, old_row(static_cast<std::size_t>(m.C));
    for (int i = 0; i < m.V; ++i) {
        exposure.row(state, i, expo);
        for (int c = 0; c < m.C; ++c) {
            old_row[static_cast<std::size_t>(c)] = state.theta_at(i, c);
            const std::int64_t count = sources.send[static_cast<std::size_t>(i) * m.C + c] +
                                       sources.recv[static_cast<std::size_t>(i) * m.C + c];
            GammaParams post = theta_posterior(state.alpha[static_cast<std::size_t>(i)],
                                               state.beta[static_cast<std::size_t>(i)], count,
                                               expo[static_cast<std::size_t>(c)]);
            post.shape += options.theta_shape_perturb;
            state.theta[static_cast<std::size_t>(i) * m.C + c] = rng.gamma(post.shape, post.rate);
        }
        exposure.replace_row(state, i, old_row);
    }
}

void update_alpha_beta(BPTDState& state, const LatentSources& sources, RngStream& rng,
                       const UpdateOptions& options) {
    const ModelDims& m = state.dims;
    const double e0 = state.hyper.eps0;
    Aggregates agg = compute_aggregates(state);
    ThetaExposure exposure(state, agg);
    std::vector<double> expo, old_row(static_cast<std::size_t>(m.C));
    for (int i = 0; i < m.V; ++i) {
        exposure.row(state, i, expo);
        double row_sum = 0.0;
        for (int c = 0; c < m.C; ++c) row_sum += state.theta_at(i, c);
        GammaParams bpost = beta_posterior(e0, m.C, state.alpha[static_cast<std::size_t>(i)],
                                           guard_exposure(row_sum, "theta row sum"));
        state.beta[static_cast<std::size_t>(i)] = rng.gamma(bpost.shape, bpost.rate);

        // Collapse the theta row into negative-binomial counts, draw the CRT
        // tables, and update alpha from the conjugate form.
        std::int64_t tables = 0;
        double log_sum = 0.0;
        for (int c = 0; c < m.C; ++c) {
            const std::int64_t count = sources.send[static_cast<std::size_t>(i) * m.C + c] +
                                       sources.recv[static_cast<std::size_t>(i) * m.C + c];
            tables += rng.crt(count, state.alpha[static_cast<std::size_t>(i)]);
            log_sum += std::log1p(guard_exposure(expo[static_cast<std::size_t>(c)] /
                                                     state.beta[static_cast<std::size_t>(i)],
                                                 "alpha log exposure"));
        }
        GammaParams apost = alpha_posterior(e0, tables, log_sum);
        state.alpha[static_cast<std::size_t>(i)] = rng.gamma(apost.shape, apost.rate);

        // Redraw the collapsed row under the new (alpha, beta).
        for (int c = 0; c < m.C; ++c) {
            old_row[static_cast<std::size_t>(c)] = state.theta_at(i, c);
            const std::int64_t count = sources.send[static_cast<std::size_t>(i) * m.C + c] +
                                       sources.recv[static_cast<std::size_t>(i) * m.C + c];
            GammaParams post = theta_posterior(state.alpha[static_cast<std::size_t>(i)],
                                               state.beta[static_cast<std::size_t>(i)], count,
                                               expo[static_cast<std::size_t>(c)]);
            post.shape += options.theta_shape_perturb;
            state.theta[static_cast<std::size_t>(i) * m.C + c] = rng.gamma(post.shape, post.rate);
        }
        exposure.replace_row(state, i, old_row);
    }
}

void update_phi(BPTDState& state, const LatentSources& sources, RngStream& rng) {
    const ModelDims& m = state.dims;
    const double e0 = state.hyper.eps0;
    Aggregates agg = compute_aggregates(state);
    std::vector<double> topic_exposure(static_cast<std::size_t>(m.K), 0.0);
    for (int c = 0; c < m.C; ++c) {
        for (int d = 0; d < m.C; ++d) {
            const double x = agg.X[static_cast<std::size_t>(c) * m.C + d];
            for (int k = 0; k < m.K; ++k) {
                const double* cell = &state.core[m.core_index(c, d, k, 0)];
                for (int r = 0; r < m.R; ++r) {
                    topic_exposure[static_cast<std::size_t>(k)] += cell[r] * x * agg.P[r];
                }
            }
        }
    }
    for (double& x : topic_exposure) x = guard_exposure(x, "topic exposure");
    for (int a = 0; a < m.A; ++a) {
        for (int k = 0; k < m.K; ++k) {
            const std::int64_t count = sources.topic[static_cast<std::size_t>(a) * m.K + k];
            state.phi[static_cast<std::size_t>(a) * m.K + k] =
                rng.gamma(e0 + static_cast<double>(count), e0 + topic_exposure[static_cast<std::size_t>(k)]);
        }
    }
}

void update_psi(BPTDState& state, const LatentSources& sources, RngStream& rng) {
    const ModelDims& m = state.dims;
    const double e0 = state.hyper.eps0;
    Aggregates agg = compute_aggregates(state);
    std::vector<double> regime_exposure(static_cast<std::size_t>(m.R), 0.0);
    for (int c = 0; c < m.C; ++c) {
        for (int d = 0; d < m.C; ++d) {
            const double x = agg.X[static_cast<std::size_t>(c) * m.C + d];
            for (int k = 0; k < m.K; ++k) {
                const double* cell = &state.core[m.core_index(c, d, k, 0)];
                for (int r = 0; r < m.R; ++r) {
                    regime_exposure[static_cast<std::size_t>(r)] += cell[r] * x * agg.F[k];
                }
            }
        }
    }
    for (double& x : regime_exposure) x = guard_exposure(x, "regime exposure");
    for (int t = 0; t < m.T; ++t) {
        for (int r = 0; r < m.R; ++r) {
            const std::int64_t count = sources.regime[static_cast<std::size_t>(t) * m.R + r];
            state.psi[static_cast<std::size_t>(t) * m.R + r] =
                rng.gamma(e0 + static_cast<double>(count), e0 + regime_exposure[static_cast<std::size_t>(r)]);
        }
    }
}

void update_core(BPTDState& state, const LatentSources& sources, RngStream& rng) {
    const ModelDims& m = state.dims;
    Aggregates agg = compute_aggregates(state);
    for (int c = 0; c < m.C; ++c) {
        for (int d = 0; d < m.C; ++d) {
            const double x = agg.X[static_cast<std::size_t>(c) * m.C + d];
            for (int k = 0; k < m.K; ++k) {
                for (int r = 0; r < m.R; ++r) {
                    const std::size_t idx = m.core_index(c, d, k, r);
                    const double exposure = guard_exposure(x * agg.F[k] * agg.P[r], "core exposure");
                    state.core[idx] = rng.gamma(
                        state.core_shape(c, d, k, r) + static_cast<double>(sources.core_counts[idx]),
                        state.delta + exposure);
                }
            }
        }
    }
}

void update_weights(BPTDState& state, const LatentSources& sources, RngStream& rng) {
    const ModelDims& m = state.dims;
    const double e0 = state.hyper.eps0;
    const double g0 = state.hyper.gamma0;

    // delta | core, shapes (ordinary conjugacy, before the collapse below).
    {
        double shape_sum = 0.0, core_sum = 0.0;
        for (int c = 0; c < m.C; ++c) {
            for (int d = 0; d < m.C; ++d) {
                for (int k = 0; k < m.K; ++k) {
                    for (int r = 0; r < m.R; ++r) {
                        shape_sum += state.core_shape(c, d, k, r);
                        core_sum += state.core[m.core_index(c, d, k, r)];
                    }
                }
            }
        }
        GammaParams dpost = delta_posterior(e0, guard_exposure(shape_sum, "core shape sum"),
                                            guard_exposure(core_sum, "core sum"));
        state.delta = rng.gamma(dpost.shape, dpost.rate);
    }

    // Collapse the core: per cell, its count is negative-binomial with the
    // prior shape; the CRT tables make every weight conditional conjugate.
    Aggregates agg = compute_aggregates(state);
    std::vector<double> q(m.core_size());
    std::vector<std::int64_t> tables(m.core_size());
    for (int c = 0; c < m.C; ++c) {
        for (int d = 0; d < m.C; ++d) {
            const double x = agg.X[static_cast<std::size_t>(c) * m.C + d];
            for (int k = 0; k < m.K; ++k) {
                for (int r = 0; r < m.R; ++r) {
                    const std::size_t idx = m.core_index(c, d, k, r);
                    q[idx] = std::log1p(guard_exposure(x * agg.F[k] * agg.P[r] / state.delta,
                                                       "weight log exposure"));
                    tables[idx] = rng.crt(sources.core_counts[idx], state.core_shape(c, d, k, r));
                }
            }
        }
    }

    // eta_within: appears only in diagonal cells.
    for (int c = 0; c < m.C; ++c) {
        std::int64_t l = 0;
        double rate = 0.0;
        for (int k = 0; k < m.K; ++k) {
            for (int r = 0; r < m.R; ++r) {
                const std::size_t idx = m.core_index(c, c, k, r);
                l += tables[idx];
                rate += capped_mul(capped_mul(state.eta_between[static_cast<std::size_t>(c)],
                                              capped_mul(state.nu[static_cast<std::size_t>(k)],
                                                         state.rho[static_cast<std::size_t>(r)])),
                                   q[idx]);
            }
        }
        state.eta_within[static_cast<std::size_t>(c)] =
            rng.gamma(e0 + static_cast<double>(l), e0 + guard_exposure(rate, "eta rate"));
    }

    // eta_between: diagonal cell (e,e) plus off-diagonal row e and column e.
    for (int e = 0; e < m.C; ++e) {
        std::int64_t l = 0;
        double rate = 0.0;
        for (int k = 0; k < m.K; ++k) {
            for (int r = 0; r < m.R; ++r) {
                const double nr = capped_mul(state.nu[static_cast<std::size_t>(k)],
                                             state.rho[static_cast<std::size_t>(r)]);
                {
                    const std::size_t idx = m.core_index(e, e, k, r);
                    l += tables[idx];
                    rate += capped_mul(capped_mul(state.eta_within[static_cast<std::size_t>(e)], nr), q[idx]);
                }
                for (int d = 0; d < m.C; ++d) {
                    if (d == e) continue;
                    const std::size_t row_idx = m.core_index(e, d, k, r);
                    const std::size_t col_idx = m.core_index(d, e, k, r);
                    l += tables[row_idx] + tables[col_idx];
                    rate += capped_mul(capped_mul(state.eta_between[static_cast<std::size_t>(d)], nr),
                                       q[row_idx] + q[col_idx]);
                }
            }
        }
        state.eta_between[static_cast<std::size_t>(e)] =
            rng.gamma(g0 / m.C + static_cast<double>(l), state.zeta + guard_exposure(rate, "eta rate"));
    }

    // nu: every cell with topic k.
    for (int k = 0; k < m.K; ++k) {
        std::int64_t l = 0;
        double rate = 0.0;
        for (int c = 0; c < m.C; ++c) {
            for (int d = 0; d < m.C; ++d) {
                const double eta_cd = (c == d) ? capped_mul(state.eta_within[static_cast<std::size_t>(c)],
                                                            state.eta_between[static_cast<std::size_t>(c)])
                                               : capped_mul(state.eta_between[static_cast<std::size_t>(c)],
                                                            state.eta_between[static_cast<std::size_t>(d)]);
                for (int r = 0; r < m.R; ++r) {
                    const std::size_t idx = m.core_index(c, d, k, r);
                    l += tables[idx];
                    rate += capped_mul(capped_mul(eta_cd, state.rho[static_cast<std::size_t>(r)]), q[idx]);
                }
            }
        }
        state.nu[static_cast<std::size_t>(k)] =
            rng.gamma(g0 / m.K + static_cast<double>(l), state.zeta + guard_exposure(rate, "nu rate"));
    }

    // rho: every cell with regime r.
    for (int r = 0; r < m.R; ++r) {
        std::int64_t l = 0;
        double rate = 0.0;
        for (int c = 0; c < m.C; ++c) {
            for (int d = 0; d < m.C; ++d) {
                const double eta_cd = (c == d) ? capped_mul(state.eta_within[static_cast<std::size_t>(c)],
                                                            state.eta_between[static_cast<std::size_t>(c)])
                                               : capped_mul(state.eta_between[static_cast<std::size_t>(c)],
                                                            state.eta_between[static_cast<std::size_t>(d)]);
                for (int k = 0; k < m.K; ++k) {
                    const std::size_t idx = m.core_index(c, d, k, r);
                    l += tables[idx];
                    rate += capped_mul(capped_mul(eta_cd, state.nu[static_cast<std::size_t>(k)]), q[idx]);
                }
            }
        }
        state.rho[static_cast<std::size_t>(r)] =
            rng.gamma(g0 / m.R + static_cast<double>(l), state.zeta + guard_exposure(rate, "rho rate"));
    }

    // zeta | shrinkage weights.
    {
        double weight_sum = 0.0;
        for (double w : state.eta_between) weight_sum += w;
        for (double w : state.nu) weight_sum += w;
        for (double w : state.rho) weight_sum += w;
        GammaParams zpost = zeta_posterior(e0, g0, guard_exposure(weight_sum, "weight sum"));
        state.zeta = rng.gamma(zpost.shape, zpost.rate);
    }

    // The collapse marginalized the core; redraw it under the new shapes
    // before anything else conditions on it.
    update_core(state, sources, rng);
}

LatentSources gibbs_sweep(BPTDState& state, std::span<const Token> tokens,
                          std::vector<TokenAssignment>& assignments, RngStream& rng,
                          const SweepOptions& options) {
    LatentSources sources(state.dims);
    if (options.alloc == AllocationMode::Joint) {
        sources = (options.workers > 1)
                      ? allocate_joint_parallel(state, tokens, assignments, rng, options.workers)
                      : allocate_joint(state, tokens, assignments, rng);
    } else {
        sources = (options.workers > 1)
                      ? allocate_compositional_parallel(state, tokens, assignments, rng, options.workers)
                      : allocate_compositional(state, tokens, assignments, rng);
    }
    if (!options.clamp.theta) update_theta(state, sources, rng, options.update);
    if (!options.clamp.alpha_beta) update_alpha_beta(state, sources, rng, options.update);
    if (!options.clamp.phi) update_phi(state, sources, rng);
    if (!options.clamp.psi) update_psi(state, sources, rng);
    if (!options.clamp.core) update_core(state, sources, rng);
    if (!options.clamp.weights) update_weights(state, sources, rng);
    return sources;
}

double log_likelihood(const BPTDState& state, const CountTensor& tensor) {
    const ModelDims& m = state.dims;
    double loglik = -total_rate(state);
    // Per-(a,t) mixing matrices keep the nonzero-cell rates at C^2 each.
    std::vector<double> M(static_cast<std::size_t>(m.C) * m.C);
    int cur_a = -1, cur_t = -1;
    auto entries = tensor.sorted_entries();
    std::sort(entries.begin(), entries.end(), [](const CountTensor::Entry& x, const CountTensor::Entry& y) {
        return std::tie(x.a, x.t, x.i, x.j) < std::tie(y.a, y.t, y.i, y.j);
    });
    for (const auto& e : entries) {
        if (static_cast<int>(e.a) != cur_a || static_cast<int>(e.t) != cur_t) {
            cur_a = static_cast<int>(e.a);
            cur_t = static_cast<int>(e.t);
            for (int c = 0; c < m.C; ++c) {
                for (int d = 0; d < m.C; ++d) {
                    double acc = 0.0;
                    for (int k = 0; k < m.K; ++k) {
                        const double* cell = &state.core[m.core_index(c, d, k, 0)];
                        for (int r = 0; r < m.R; ++r) {
                            acc += state.phi_at(cur_a, k) * state.psi_at(cur_t, r) * cell[r];
                        }
                    }
                    M[static_cast<std::size_t>(c) * m.C + d] = acc;
                }
            }
        }
        double rate = 0.0;
        for (int c = 0; c < m.C; ++c) {
            const double th_i = state.theta_at(static_cast<int>(e.i), c);
            double acc = 0.0;
            for (int d = 0; d < m.C; ++d) {
                acc += M[static_cast<std::size_t>(c) * m.C + d] * state.theta_at(static_cast<int>(e.j), d);
            }
            rate += th_i * acc;
        }
        loglik += static_cast<double>(e.count) * std::log(rate) - std::lgamma(static_cast<double>(e.count) + 1.0);
    }
    return loglik;
}

std::string trace_header() {
    return "model\titeration\tloglik\tc_eff\tk_eff\tr_eff\tdelta\tzeta";
}

std::string trace_row(const std::string& model_tag, long long iteration, double loglik,
                      const EffectiveDims& eff, double delta, double zeta) {
    std::ostringstream out;
    out.precision(17);
    out << model_tag << '\t' << iteration << '\t' << loglik << '\t' << eff.c_eff << '\t' << eff.k_eff << '\t'
        << eff.r_eff << '\t' << delta << '\t' << zeta;
    return out.str();
}

}  // namespace bptd
