#include "bptd/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bptd {

double BPTFState::rate(int i, int j, int a, int t) const {
    double acc = 0.0;
    for (int q = 0; q < Q; ++q) {
        acc += theta_send[static_cast<std::size_t>(i) * Q + q] *
               theta_recv[static_cast<std::size_t>(j) * Q + q] * phi[static_cast<std::size_t>(a) * Q + q] *
               psi[static_cast<std::size_t>(t) * Q + q] * lambda[static_cast<std::size_t>(q)];
    }
    return acc;
}

int bptf_q_for_parity(int V, int A, int T, int C, int K, int R) {
    if (V < 1 || A < 1 || T < 1 || C < 1 || K < 1 || R < 1) {
        throw std::invalid_argument("bptf_q_for_parity: dims must be positive");
    }
    const long long tucker_factors = static_cast<long long>(V) * C + static_cast<long long>(A) * K +
                                     static_cast<long long>(T) * R +
                                     static_cast<long long>(C) * C * K * R;
    const long long per_class = static_cast<long long>(V) + V + A + T + 1;
    return static_cast<int>((tucker_factors + per_class - 1) / per_class);
}

BPTFState bptf_sample_prior(int V, int A, int T, int Q, const Hyperparams& hyper, RngStream& rng) {
    if (V < 1 || A < 1 || T < 1 || Q < 1) throw std::invalid_argument("bptf_sample_prior: bad dims");
    hyper.validate();
    const double e0 = hyper.eps0;
    BPTFState s;
    s.V = V;
    s.A = A;
    s.T = T;
    s.Q = Q;
    s.hyper = hyper;
    s.theta_send.resize(static_cast<std::size_t>(V) * Q);
    for (auto& x : s.theta_send) x = rng.gamma(e0, e0);
    s.theta_recv.resize(static_cast<std::size_t>(V) * Q);
    for (auto& x : s.theta_recv) x = rng.gamma(e0, e0);
    s.phi.resize(static_cast<std::size_t>(A) * Q);
    for (auto& x : s.phi) x = rng.gamma(e0, e0);
    s.psi.resize(static_cast<std::size_t>(T) * Q);
    for (auto& x : s.psi) x = rng.gamma(e0, e0);
    s.zeta = rng.gamma(e0, e0);
    s.lambda.resize(static_cast<std::size_t>(Q));
    for (auto& x : s.lambda) x = rng.gamma(hyper.gamma0 / Q, s.zeta);
    return s;
}

CountTensor bptf_simulate(const BPTFState& state, RngStream& rng) {
    CountTensor tensor(state.V, state.A, state.T);
    for (int a = 0; a < state.A; ++a) {
        for (int t = 0; t < state.T; ++t) {
            for (int i = 0; i < state.V; ++i) {
                for (int j = 0; j < state.V; ++j) {
                    if (i == j) continue;
                    long long y = rng.poisson(state.rate(i, j, a, t));
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

BPTFSources bptf_allocate(const BPTFState& state, std::span<const Token> tokens,
                          std::vector<std::uint16_t>& assignments, RngStream& rng) {
    const int Q = state.Q;
    BPTFSources src;
    src.send.assign(static_cast<std::size_t>(state.V) * Q, 0);
    src.recv.assign(static_cast<std::size_t>(state.V) * Q, 0);
    src.topic.assign(static_cast<std::size_t>(state.A) * Q, 0);
    src.regime.assign(static_cast<std::size_t>(state.T) * Q, 0);
    src.cls.assign(static_cast<std::size_t>(Q), 0);
    assignments.resize(tokens.size());
    std::vector<double> w(static_cast<std::size_t>(Q));
    for (std::size_t n = 0; n < tokens.size(); ++n) {
        const Token& e = tokens[n];
        double max_w = 0.0;
        for (int q = 0; q < Q; ++q) {
            w[static_cast<std::size_t>(q)] = state.theta_send[e.i * static_cast<std::size_t>(Q) + q] *
                                             state.theta_recv[e.j * static_cast<std::size_t>(Q) + q] *
                                             state.phi[e.a * static_cast<std::size_t>(Q) + q] *
                                             state.psi[e.t * static_cast<std::size_t>(Q) + q] *
                                             state.lambda[static_cast<std::size_t>(q)];
            max_w = std::max(max_w, w[static_cast<std::size_t>(q)]);
        }
        if (max_w <= 0.0 || !std::isfinite(max_w)) {
            // products under- or overflowed; recompute in log space
            double max_lw = -std::numeric_limits<double>::infinity();
            for (int q = 0; q < Q; ++q) {
                w[static_cast<std::size_t>(q)] =
                    std::log(state.theta_send[e.i * static_cast<std::size_t>(Q) + q]) +
                    std::log(state.theta_recv[e.j * static_cast<std::size_t>(Q) + q]) +
                    std::log(state.phi[e.a * static_cast<std::size_t>(Q) + q]) +
                    std::log(state.psi[e.t * static_cast<std::size_t>(Q) + q]) +
                    std::log(state.lambda[static_cast<std::size_t>(q)]);
                max_lw = std::max(max_lw, w[static_cast<std::size_t>(q)]);
            }
            for (double& x : w) x = std::exp(x - max_lw);
        } else if (max_w > 1e300 || max_w < 1e-300) {
            for (double& x : w) x /= max_w;
        }
        const int q = static_cast<int>(rng.categorical(w));
        assignments[n] = static_cast<std::uint16_t>(q);
        src.send[e.i * static_cast<std::size_t>(Q) + static_cast<std::size_t>(q)] += 1;
        src.recv[e.j * static_cast<std::size_t>(Q) + static_cast<std::size_t>(q)] += 1;
        src.topic[e.a * static_cast<std::size_t>(Q) + static_cast<std::size_t>(q)] += 1;
        src.regime[e.t * static_cast<std::size_t>(Q) + static_cast<std::size_t>(q)] += 1;
        src.cls[static_cast<std::size_t>(q)] += 1;
        src.total += 1;
    }
    return src;
}

namespace {

struct BPTFAgg {
    std::vector<double> F, P, Ssend, Srecv, cross;  // per class

    BPTFAgg(const BPTFState& s) {
        const int Q = s.Q;
        F.assign(static_cast<std::size_t>(Q), 0.0);
        P.assign(static_cast<std::size_t>(Q), 0.0);
        Ssend.assign(static_cast<std::size_t>(Q), 0.0);
        Srecv.assign(static_cast<std::size_t>(Q), 0.0);
        cross.assign(static_cast<std::size_t>(Q), 0.0);
        for (int a = 0; a < s.A; ++a)
            for (int q = 0; q < Q; ++q) F[static_cast<std::size_t>(q)] += s.phi[a * static_cast<std::size_t>(Q) + q];
        for (int t = 0; t < s.T; ++t)
            for (int q = 0; q < Q; ++q) P[static_cast<std::size_t>(q)] += s.psi[t * static_cast<std::size_t>(Q) + q];
        for (int i = 0; i < s.V; ++i) {
            for (int q = 0; q < Q; ++q) {
                const double snd = s.theta_send[i * static_cast<std::size_t>(Q) + q];
                const double rcv = s.theta_recv[i * static_cast<std::size_t>(Q) + q];
                Ssend[static_cast<std::size_t>(q)] += snd;
                Srecv[static_cast<std::size_t>(q)] += rcv;
                cross[static_cast<std::size_t>(q)] += snd * rcv;
            }
        }
    }

    double X(int q) const {
        return std::max(Ssend[static_cast<std::size_t>(q)] * Srecv[static_cast<std::size_t>(q)] -
                            cross[static_cast<std::size_t>(q)],
                        0.0);
    }
};

}  // namespace

void bptf_sweep(BPTFState& state, std::span<const Token> tokens,
                std::vector<std::uint16_t>& assignments, RngStream& rng) {
    const int Q = state.Q;
    const double e0 = state.hyper.eps0;
    BPTFSources src = bptf_allocate(state, tokens, assignments, rng);

    // Senders; the exposure is free of theta_send, so the matrix updates as a block.
    {
        BPTFAgg agg(state);
        for (int i = 0; i < state.V; ++i) {
            for (int q = 0; q < Q; ++q) {
                const double others = std::max(agg.Srecv[static_cast<std::size_t>(q)] -
                                                   state.theta_recv[i * static_cast<std::size_t>(Q) + q],
                                               0.0);
                const double expo = state.lambda[static_cast<std::size_t>(q)] *
                                    agg.F[static_cast<std::size_t>(q)] * agg.P[static_cast<std::size_t>(q)] * others;
                state.theta_send[i * static_cast<std::size_t>(Q) + q] = rng.gamma(
                    e0 + static_cast<double>(src.send[i * static_cast<std::size_t>(Q) + q]), e0 + expo);
            }
        }
    }
    // Receivers, conditioned on the new senders.
    {
        BPTFAgg agg(state);
        for (int j = 0; j < state.V; ++j) {
            for (int q = 0; q < Q; ++q) {
                const double others = std::max(agg.Ssend[static_cast<std::size_t>(q)] -
                                                   state.theta_send[j * static_cast<std::size_t>(Q) + q],
                                               0.0);
                const double expo = state.lambda[static_cast<std::size_t>(q)] *
                                    agg.F[static_cast<std::size_t>(q)] * agg.P[static_cast<std::size_t>(q)] * others;
                state.theta_recv[j * static_cast<std::size_t>(Q) + q] = rng.gamma(
                    e0 + static_cast<double>(src.recv[j * static_cast<std::size_t>(Q) + q]), e0 + expo);
            }
        }
    }
    {
        BPTFAgg agg(state);
        for (int a = 0; a < state.A; ++a) {
            for (int q = 0; q < Q; ++q) {
                const double expo = state.lambda[static_cast<std::size_t>(q)] * agg.P[static_cast<std::size_t>(q)] *
                                    agg.X(q);
                state.phi[a * static_cast<std::size_t>(Q) + q] = rng.gamma(
                    e0 + static_cast<double>(src.topic[a * static_cast<std::size_t>(Q) + q]), e0 + expo);
            }
        }
    }
    {
        BPTFAgg agg(state);
        for (int t = 0; t < state.T; ++t) {
            for (int q = 0; q < Q; ++q) {
                const double expo = state.lambda[static_cast<std::size_t>(q)] * agg.F[static_cast<std::size_t>(q)] *
                                    agg.X(q);
                state.psi[t * static_cast<std::size_t>(Q) + q] = rng.gamma(
                    e0 + static_cast<double>(src.regime[t * static_cast<std::size_t>(Q) + q]), e0 + expo);
            }
        }
    }
    {
        BPTFAgg agg(state);
        for (int q = 0; q < Q; ++q) {
            const double expo = agg.X(q) * agg.F[static_cast<std::size_t>(q)] * agg.P[static_cast<std::size_t>(q)];
            state.lambda[static_cast<std::size_t>(q)] = rng.gamma(
                state.hyper.gamma0 / Q + static_cast<double>(src.cls[static_cast<std::size_t>(q)]),
                state.zeta + expo);
        }
        double lambda_sum = 0.0;
        for (double x : state.lambda) lambda_sum += x;
        state.zeta = rng.gamma(e0 + state.hyper.gamma0, e0 + lambda_sum);
    }
}

GewekeResult geweke_bptf(int V, int A, int T, int Q, const Hyperparams& hyper,
                         const GewekeConfig& config, RngStream& rng) {
    const std::vector<std::string> names = {"theta_send_mean", "phi_mean", "log1p_lambda_sum",
                                            "log1p_data_total"};
    auto stats_of = [](const BPTFState& s, const CountTensor& data) {
        auto mean_vec = [](const std::vector<double>& v) {
            double acc = 0.0;
            for (double x : v) acc += x;
            return acc / static_cast<double>(v.size());
        };
        double lambda_sum = 0.0;
        for (double x : s.lambda) lambda_sum += x;
        return std::vector<double>{mean_vec(s.theta_send), mean_vec(s.phi), std::log1p(lambda_sum),
                                   std::log1p(static_cast<double>(data.total()))};
    };

    std::vector<std::vector<double>> forward(names.size()), chain(names.size());
    RngStream fwd_rng = rng.next_substream();
    for (int n = 0; n < config.n_samples; ++n) {
        BPTFState s = bptf_sample_prior(V, A, T, Q, hyper, fwd_rng);
        CountTensor data = bptf_simulate(s, fwd_rng);
        auto st = stats_of(s, data);
        for (std::size_t k = 0; k < names.size(); ++k) forward[k].push_back(st[k]);
    }
    RngStream chain_rng = rng.next_substream();
    BPTFState s = bptf_sample_prior(V, A, T, Q, hyper, chain_rng);
    CountTensor data = bptf_simulate(s, chain_rng);
    std::vector<std::uint16_t> assignments;
    for (int n = 0; n < config.n_samples; ++n) {
        for (int step = 0; step < config.thin; ++step) {
            auto tokens = tokens_from_tensor(data);
            bptf_sweep(s, tokens, assignments, chain_rng);
            data = bptf_simulate(s, chain_rng);
        }
        auto st = stats_of(s, data);
        for (std::size_t k = 0; k < names.size(); ++k) chain[k].push_back(st[k]);
    }
    return geweke_compare(names, forward, chain, config.batches);
}

double bptf_log_likelihood(const BPTFState& state, const CountTensor& tensor) {
    BPTFAgg agg(state);
    double loglik = 0.0;
    for (int q = 0; q < state.Q; ++q) {
        loglik -= state.lambda[static_cast<std::size_t>(q)] * agg.F[static_cast<std::size_t>(q)] *
                  agg.P[static_cast<std::size_t>(q)] * agg.X(q);
    }
    for (const auto& e : tensor.sorted_entries()) {
        const double rate = state.rate(static_cast<int>(e.i), static_cast<int>(e.j), static_cast<int>(e.a),
                                       static_cast<int>(e.t));
        loglik += static_cast<double>(e.count) * std::log(rate) - std::lgamma(static_cast<double>(e.count) + 1.0);
    }
    return loglik;
}

double GPIRMState::rate(int i, int j, int a, int t) const {
    const std::size_t idx = dims.core_index(z_country[static_cast<std::size_t>(i)],
                                            z_country[static_cast<std::size_t>(j)],
                                            z_action[static_cast<std::size_t>(a)],
                                            z_time[static_cast<std::size_t>(t)]);
    double rate = core[idx];
    if (degree_corrected) {
        rate *= deg_country[static_cast<std::size_t>(i)] * deg_country[static_cast<std::size_t>(j)] *
                deg_action[static_cast<std::size_t>(a)] * deg_time[static_cast<std::size_t>(t)];
    }
    return rate;
}

GPIRMState gpirm_sample_prior(const ModelDims& dims, const Hyperparams& hyper, bool degree_corrected,
                              RngStream& rng) {
    dims.validate();
    hyper.validate();
    const double e0 = hyper.eps0;
    GPIRMState s;
    s.dims = dims;
    s.hyper = hyper;
    s.degree_corrected = degree_corrected;
    auto draw_assignment = [&rng](int n_values) {
        int z = static_cast<int>(rng.uniform() * n_values);
        return std::min(z, n_values - 1);
    };
    s.z_country.resize(static_cast<std::size_t>(dims.V));
    for (auto& z : s.z_country) z = draw_assignment(dims.C);
    s.z_action.resize(static_cast<std::size_t>(dims.A));
    for (auto& z : s.z_action) z = draw_assignment(dims.K);
    s.z_time.resize(static_cast<std::size_t>(dims.T));
    for (auto& z : s.z_time) z = draw_assignment(dims.R);
    s.core.resize(dims.core_size());
    for (auto& x : s.core) x = rng.gamma(e0, e0);
    s.deg_country.assign(static_cast<std::size_t>(dims.V), 1.0);
    s.deg_action.assign(static_cast<std::size_t>(dims.A), 1.0);
    s.deg_time.assign(static_cast<std::size_t>(dims.T), 1.0);
    if (degree_corrected) {
        for (auto& x : s.deg_country) x = rng.gamma(e0, e0);
        for (auto& x : s.deg_action) x = rng.gamma(e0, e0);
        for (auto& x : s.deg_time) x = rng.gamma(e0, e0);
    }
    return s;
}

CountTensor gpirm_simulate(const GPIRMState& state, RngStream& rng) {
    const ModelDims& m = state.dims;
    CountTensor tensor(m.V, m.A, m.T);
    for (int a = 0; a < m.A; ++a) {
        for (int t = 0; t < m.T; ++t) {
            for (int i = 0; i < m.V; ++i) {
                for (int j = 0; j < m.V; ++j) {
                    if (i == j) continue;
                    long long y = rng.poisson(state.rate(i, j, a, t));
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

struct GPIRMAgg {
    std::vector<double> country_mass;  // C: sum of degrees by community (all ones when plain)
    std::vector<double> country_sq;    // C: sum of squared degrees by community
    std::vector<double> action_mass;   // K
    std::vector<double> time_mass;     // R

    GPIRMAgg(const GPIRMState& s) {
        const ModelDims& m = s.dims;
        country_mass.assign(static_cast<std::size_t>(m.C), 0.0);
        country_sq.assign(static_cast<std::size_t>(m.C), 0.0);
        action_mass.assign(static_cast<std::size_t>(m.K), 0.0);
        time_mass.assign(static_cast<std::size_t>(m.R), 0.0);
        for (int i = 0; i < m.V; ++i) {
            const double deg = s.deg_country[static_cast<std::size_t>(i)];
            country_mass[static_cast<std::size_t>(s.z_country[static_cast<std::size_t>(i)])] += deg;
            country_sq[static_cast<std::size_t>(s.z_country[static_cast<std::size_t>(i)])] += deg * deg;
        }
        for (int a = 0; a < m.A; ++a) {
            action_mass[static_cast<std::size_t>(s.z_action[static_cast<std::size_t>(a)])] +=
                s.deg_action[static_cast<std::size_t>(a)];
        }
        for (int t = 0; t < m.T; ++t) {
            time_mass[static_cast<std::size_t>(s.z_time[static_cast<std::size_t>(t)])] +=
                s.deg_time[static_cast<std::size_t>(t)];
        }
    }

    // Self-pair-excluded community pair mass.
    double pair_mass(int c, int d) const {
        double x = country_mass[static_cast<std::size_t>(c)] * country_mass[static_cast<std::size_t>(d)];
        if (c == d) x -= country_sq[static_cast<std::size_t>(c)];
        return std::max(x, 0.0);
    }
};

// Gumbel-free categorical draw from unnormalized log weights.
int categorical_from_log(std::span<const double> logw, RngStream& rng) {
    double max_lw = logw[0];
    for (double lw : logw) max_lw = std::max(max_lw, lw);
    std::vector<double> w(logw.size());
    for (std::size_t k = 0; k < logw.size(); ++k) w[k] = std::exp(logw[k] - max_lw);
    return static_cast<int>(rng.categorical(w));
}

}  // namespace

void gpirm_sweep(GPIRMState& state, const CountTensor& tensor, RngStream& rng) {
    const ModelDims& m = state.dims;
    const double e0 = state.hyper.eps0;
    const auto entries = tensor.sorted_entries();

    // Country assignments, sequentially.
    {
        // Per-country aggregated observations grouped by partner/action/time class.
        const std::size_t block = static_cast<std::size_t>(m.C) * m.K * m.R;
        std::vector<double> y_out(block), y_in(block), w_out(block), w_in(block);
        for (int i = 0; i < m.V; ++i) {
            std::fill(y_out.begin(), y_out.end(), 0.0);
            std::fill(y_in.begin(), y_in.end(), 0.0);
            for (const auto& e : entries) {
                if (static_cast<int>(e.i) != i && static_cast<int>(e.j) != i) continue;
                const int other = static_cast<int>(e.i) == i ? static_cast<int>(e.j) : static_cast<int>(e.i);
                const std::size_t idx =
                    (static_cast<std::size_t>(state.z_country[static_cast<std::size_t>(other)]) * m.K +
                     static_cast<std::size_t>(state.z_action[e.a])) * m.R +
                    static_cast<std::size_t>(state.z_time[e.t]);
                if (static_cast<int>(e.i) == i) {
                    y_out[idx] += static_cast<double>(e.count);
                } else {
                    y_in[idx] += static_cast<double>(e.count);
                }
            }
            // Exposure masses over the other countries.
            GPIRMAgg agg(state);
            const double deg_i = state.deg_country[static_cast<std::size_t>(i)];
            const int zi = state.z_country[static_cast<std::size_t>(i)];
            for (int d = 0; d < m.C; ++d) {
                double others = agg.country_mass[static_cast<std::size_t>(d)];
                if (d == zi) others -= deg_i;
                for (int k = 0; k < m.K; ++k) {
                    for (int r = 0; r < m.R; ++r) {
                        const std::size_t idx = (static_cast<std::size_t>(d) * m.K + k) * m.R + r;
                        const double mass = others * agg.action_mass[static_cast<std::size_t>(k)] *
                                            agg.time_mass[static_cast<std::size_t>(r)];
                        w_out[idx] = mass;
                        w_in[idx] = mass;
                    }
                }
            }
            std::vector<double> logw(static_cast<std::size_t>(m.C), 0.0);
            for (int c = 0; c < m.C; ++c) {
                double ll = 0.0;
                for (int d = 0; d < m.C; ++d) {
                    for (int k = 0; k < m.K; ++k) {
                        for (int r = 0; r < m.R; ++r) {
                            const std::size_t idx = (static_cast<std::size_t>(d) * m.K + k) * m.R + r;
                            const double lam_out = state.core[m.core_index(c, d, k, r)];
                            const double lam_in = state.core[m.core_index(d, c, k, r)];
                            ll += y_out[idx] * std::log(lam_out) - deg_i * w_out[idx] * lam_out;
                            ll += y_in[idx] * std::log(lam_in) - deg_i * w_in[idx] * lam_in;
                        }
                    }
                }
                logw[static_cast<std::size_t>(c)] = ll;
            }
            state.z_country[static_cast<std::size_t>(i)] = categorical_from_log(logw, rng);
        }
    }

    // Action assignments.
    {
        const std::size_t block = static_cast<std::size_t>(m.C) * m.C * m.R;
        std::vector<double> y_a(block);
        for (int a = 0; a < m.A; ++a) {
            std::fill(y_a.begin(), y_a.end(), 0.0);
            for (const auto& e : entries) {
                if (static_cast<int>(e.a) != a) continue;
                const std::size_t idx =
                    (static_cast<std::size_t>(state.z_country[e.i]) * m.C +
                     static_cast<std::size_t>(state.z_country[e.j])) * m.R +
                    static_cast<std::size_t>(state.z_time[e.t]);
                y_a[idx] += static_cast<double>(e.count);
            }
            GPIRMAgg agg(state);
            const double deg_a = state.deg_action[static_cast<std::size_t>(a)];
            std::vector<double> logw(static_cast<std::size_t>(m.K), 0.0);
            for (int k = 0; k < m.K; ++k) {
                double ll = 0.0;
                for (int c = 0; c < m.C; ++c) {
                    for (int d = 0; d < m.C; ++d) {
                        const double pair = agg.pair_mass(c, d);
                        for (int r = 0; r < m.R; ++r) {
                            const std::size_t idx = (static_cast<std::size_t>(c) * m.C + d) * m.R + r;
                            const double lam = state.core[m.core_index(c, d, k, r)];
                            ll += y_a[idx] * std::log(lam) -
                                  deg_a * pair * agg.time_mass[static_cast<std::size_t>(r)] * lam;
                        }
                    }
                }
                logw[static_cast<std::size_t>(k)] = ll;
            }
            state.z_action[static_cast<std::size_t>(a)] = categorical_from_log(logw, rng);
        }
    }

    // Time-step assignments.
    {
        const std::size_t block = static_cast<std::size_t>(m.C) * m.C * m.K;
        std::vector<double> y_t(block);
        for (int t = 0; t < m.T; ++t) {
            std::fill(y_t.begin(), y_t.end(), 0.0);
            for (const auto& e : entries) {
                if (static_cast<int>(e.t) != t) continue;
                const std::size_t idx =
                    (static_cast<std::size_t>(state.z_country[e.i]) * m.C +
                     static_cast<std::size_t>(state.z_country[e.j])) * m.K +
                    static_cast<std::size_t>(state.z_action[e.a]);
                y_t[idx] += static_cast<double>(e.count);
            }
            GPIRMAgg agg(state);
            const double deg_t = state.deg_time[static_cast<std::size_t>(t)];
            std::vector<double> logw(static_cast<std::size_t>(m.R), 0.0);
            for (int r = 0; r < m.R; ++r) {
                double ll = 0.0;
                for (int c = 0; c < m.C; ++c) {
                    for (int d = 0; d < m.C; ++d) {
                        const double pair = agg.pair_mass(c, d);
                        for (int k = 0; k < m.K; ++k) {
                            const std::size_t idx = (static_cast<std::size_t>(c) * m.C + d) * m.K + k;
                            const double lam = state.core[m.core_index(c, d, k, r)];
                            ll += y_t[idx] * std::log(lam) -
                                  deg_t * pair * agg.action_mass[static_cast<std::size_t>(k)] * lam;
                        }
                    }
                }
                logw[static_cast<std::size_t>(r)] = ll;
            }
            state.z_time[static_cast<std::size_t>(t)] = categorical_from_log(logw, rng);
        }
    }

    // Degree scalars by conjugacy.
    if (state.degree_corrected) {
        // Countries, sequentially: the exposure depends on the other degrees.
        for (int i = 0; i < m.V; ++i) {
            GPIRMAgg agg(state);
            const int zi = state.z_country[static_cast<std::size_t>(i)];
            const double deg_i = state.deg_country[static_cast<std::size_t>(i)];
            double y_total = 0.0;
            for (const auto& e : entries) {
                if (static_cast<int>(e.i) == i || static_cast<int>(e.j) == i) {
                    y_total += static_cast<double>(e.count);
                }
            }
            double expo = 0.0;
            for (int d = 0; d < m.C; ++d) {
                double others = agg.country_mass[static_cast<std::size_t>(d)];
                if (d == zi) others -= deg_i;
                for (int k = 0; k < m.K; ++k) {
                    for (int r = 0; r < m.R; ++r) {
                        const double mass = agg.action_mass[static_cast<std::size_t>(k)] *
                                            agg.time_mass[static_cast<std::size_t>(r)];
                        expo += others * mass *
                                (state.core[m.core_index(zi, d, k, r)] + state.core[m.core_index(d, zi, k, r)]);
                    }
                }
            }
            state.deg_country[static_cast<std::size_t>(i)] = rng.gamma(e0 + y_total, e0 + expo);
        }
        // Actions: exposures are free of the action degrees.
        {
            GPIRMAgg agg(state);
            std::vector<double> expo_k(static_cast<std::size_t>(m.K), 0.0);
            for (int c = 0; c < m.C; ++c) {
                for (int d = 0; d < m.C; ++d) {
                    const double pair = agg.pair_mass(c, d);
                    for (int k = 0; k < m.K; ++k) {
                        for (int r = 0; r < m.R; ++r) {
                            expo_k[static_cast<std::size_t>(k)] +=
                                pair * agg.time_mass[static_cast<std::size_t>(r)] *
                                state.core[m.core_index(c, d, k, r)];
                        }
                    }
                }
            }
            std::vector<double> y_a(static_cast<std::size_t>(m.A), 0.0);
            for (const auto& e : entries) y_a[e.a] += static_cast<double>(e.count);
            for (int a = 0; a < m.A; ++a) {
                state.deg_action[static_cast<std::size_t>(a)] = rng.gamma(
                    e0 + y_a[static_cast<std::size_t>(a)],
                    e0 + expo_k[static_cast<std::size_t>(state.z_action[static_cast<std::size_t>(a)])]);
            }
        }
        {
            GPIRMAgg agg(state);
            std::vector<double> expo_r(static_cast<std::size_t>(m.R), 0.0);
            for (int c = 0; c < m.C; ++c) {
                for (int d = 0; d < m.C; ++d) {
                    const double pair = agg.pair_mass(c, d);
                    for (int k = 0; k < m.K; ++k) {
                        for (int r = 0; r < m.R; ++r) {
                            expo_r[static_cast<std::size_t>(r)] +=
                                pair * agg.action_mass[static_cast<std::size_t>(k)] *
                                state.core[m.core_index(c, d, k, r)];
                        }
                    }
                }
            }
            std::vector<double> y_t(static_cast<std::size_t>(m.T), 0.0);
            for (const auto& e : entries) y_t[e.t] += static_cast<double>(e.count);
            for (int t = 0; t < m.T; ++t) {
                state.deg_time[static_cast<std::size_t>(t)] = rng.gamma(
                    e0 + y_t[static_cast<std::size_t>(t)],
                    e0 + expo_r[static_cast<std::size_t>(state.z_time[static_cast<std::size_t>(t)])]);
            }
        }
    }

    // Core cells by gamma-Poisson conjugacy.
    {
        GPIRMAgg agg(state);
        std::vector<double> y_core(m.core_size(), 0.0);
        for (const auto& e : entries) {
            const std::size_t idx = m.core_index(state.z_country[e.i], state.z_country[e.j],
                                                 state.z_action[e.a], state.z_time[e.t]);
            y_core[idx] += static_cast<double>(e.count);
        }
        for (int c = 0; c < m.C; ++c) {
            for (int d = 0; d < m.C; ++d) {
                const double pair = agg.pair_mass(c, d);
                for (int k = 0; k < m.K; ++k) {
                    for (int r = 0; r < m.R; ++r) {
                        const std::size_t idx = m.core_index(c, d, k, r);
                        const double expo = pair * agg.action_mass[static_cast<std::size_t>(k)] *
                                            agg.time_mass[static_cast<std::size_t>(r)];
                        state.core[idx] = rng.gamma(e0 + y_core[idx], e0 + expo);
                    }
                }
            }
        }
    }
}

BPTDState gpirm_embed(const GPIRMState& state) {
    const ModelDims& m = state.dims;
    BPTDState s;
    s.dims = m;
    s.hyper = state.hyper;
    s.theta.assign(static_cast<std::size_t>(m.V) * m.C, 0.0);
    for (int i = 0; i < m.V; ++i) {
        s.theta[static_cast<std::size_t>(i) * m.C + state.z_country[static_cast<std::size_t>(i)]] =
            state.deg_country[static_cast<std::size_t>(i)];
    }
    s.phi.assign(static_cast<std::size_t>(m.A) * m.K, 0.0);
    for (int a = 0; a < m.A; ++a) {
        s.phi[static_cast<std::size_t>(a) * m.K + state.z_action[static_cast<std::size_t>(a)]] =
            state.deg_action[static_cast<std::size_t>(a)];
    }
    s.psi.assign(static_cast<std::size_t>(m.T) * m.R, 0.0);
    for (int t = 0; t < m.T; ++t) {
        s.psi[static_cast<std::size_t>(t) * m.R + state.z_time[static_cast<std::size_t>(t)]] =
            state.deg_time[static_cast<std::size_t>(t)];
    }
    s.core = state.core;
    s.eta_within.assign(static_cast<std::size_t>(m.C), 1.0);
    s.eta_between.assign(static_cast<std::size_t>(m.C), 1.0);
    s.nu.assign(static_cast<std::size_t>(m.K), 1.0);
    s.rho.assign(static_cast<std::size_t>(m.R), 1.0);
    s.alpha.assign(static_cast<std::size_t>(m.V), 1.0);
    s.beta.assign(static_cast<std::size_t>(m.V), 1.0);
    return s;
}

double gpirm_log_likelihood(const GPIRMState& state, const CountTensor& tensor) {
    const ModelDims& m = state.dims;
    GPIRMAgg agg(state);
    double loglik = 0.0;
    for (int c = 0; c < m.C; ++c) {
        for (int d = 0; d < m.C; ++d) {
            const double pair = agg.pair_mass(c, d);
            for (int k = 0; k < m.K; ++k) {
                for (int r = 0; r < m.R; ++r) {
                    loglik -= pair * agg.action_mass[static_cast<std::size_t>(k)] *
                              agg.time_mass[static_cast<std::size_t>(r)] * state.core[m.core_index(c, d, k, r)];
                }
            }
        }
    }
    for (const auto& e : tensor.sorted_entries()) {
        const double rate = state.rate(static_cast<int>(e.i), static_cast<int>(e.j), static_cast<int>(e.a),
                                       static_cast<int>(e.t));
        loglik += static_cast<double>(e.count) * std::log(rate) - std::lgamma(static_cast<double>(e.count) + 1.0);
    }
    return loglik;
}

GewekeResult geweke_gpirm(const ModelDims& dims, const Hyperparams& hyper, bool degree_corrected,
                          const GewekeConfig& config, RngStream& rng) {
    std::vector<std::string> names = {"core_mean", "community0_share", "log1p_data_total"};
    if (degree_corrected) names.push_back("deg_country_mean");
    auto stats_of = [&](const GPIRMState& s, const CountTensor& data) {
        double core_mean = 0.0;
        for (double x : s.core) core_mean += x;
        core_mean /= static_cast<double>(s.core.size());
        double share = 0.0;
        for (int z : s.z_country) share += (z == 0) ? 1.0 : 0.0;
        share /= static_cast<double>(s.z_country.size());
        std::vector<double> st = {core_mean, share, std::log1p(static_cast<double>(data.total()))};
        if (degree_corrected) {
            double deg = 0.0;
            for (double x : s.deg_country) deg += x;
            st.push_back(deg / static_cast<double>(s.deg_country.size()));
        }
        return st;
    };

    std::vector<std::vector<double>> forward(names.size()), chain(names.size());
    RngStream fwd_rng = rng.next_substream();
    for (int n = 0; n < config.n_samples; ++n) {
        GPIRMState s = gpirm_sample_prior(dims, hyper, degree_corrected, fwd_rng);
        CountTensor data = gpirm_simulate(s, fwd_rng);
        auto st = stats_of(s, data);
        for (std::size_t k = 0; k < names.size(); ++k) forward[k].push_back(st[k]);
    }
    RngStream chain_rng = rng.next_substream();
    GPIRMState s = gpirm_sample_prior(dims, hyper, degree_corrected, chain_rng);
    CountTensor data = gpirm_simulate(s, chain_rng);
    for (int n = 0; n < config.n_samples; ++n) {
        for (int step = 0; step < config.thin; ++step) {
            gpirm_sweep(s, data, chain_rng);
            data = gpirm_simulate(s, chain_rng);
        }
        auto st = stats_of(s, data);
        for (std::size_t k = 0; k < names.size(); ++k) chain[k].push_back(st[k]);
    }
    return geweke_compare(names, forward, chain, config.batches);
}

}  // namespace bptd
