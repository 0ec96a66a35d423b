#include "bptd/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace bptd {

std::int64_t HeldOutMask::held_dyads() const {
    std::int64_t n = 0;
    for (int i = 0; i < V_; ++i) {
        for (int j = 0; j < V_; ++j) {
            if (i != j && is_held(i, j)) ++n;
        }
    }
    return n;
}

HeldOutMask HeldOutMask::inverted() const {
    std::vector<std::uint8_t> flipped(held_.size());
    for (std::size_t n = 0; n < held_.size(); ++n) flipped[n] = held_[n] ? 0 : 1;
    return HeldOutMask(V_, std::move(flipped));
}

TrainTestSplit split_train_test(const CountTensor& tensor, int holdout_steps) {
    const int T = tensor.num_steps();
    if (holdout_steps < 1 || T <= holdout_steps) {
        throw std::invalid_argument("split_train_test: need T > holdout_steps >= 1");
    }
    const int t_train = T - holdout_steps;
    TrainTestSplit split{CountTensor(tensor.num_countries(), tensor.num_actions(), t_train),
                         CountTensor(tensor.num_countries(), tensor.num_actions(), holdout_steps)};
    for (const auto& e : tensor.sorted_entries()) {
        if (static_cast<int>(e.t) < t_train) {
            split.train.add(e.i, e.j, e.a, e.t, e.count);
        } else {
            split.test.add(e.i, e.j, e.a, e.t - static_cast<std::uint32_t>(t_train), e.count);
        }
    }
    return split;
}

HeldOutMask mask_top_active(const CountTensor& tensor, int n, bool invert) {
    const int V = tensor.num_countries();
    if (n < 1 || n >= V) throw std::invalid_argument("mask_top_active: need 1 <= n < V");
    std::vector<std::int64_t> involvement(static_cast<std::size_t>(V), 0);
    for (const auto& e : tensor.sorted_entries()) {
        involvement[e.i] += e.count;
        involvement[e.j] += e.count;
    }
    std::vector<int> order(static_cast<std::size_t>(V));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (involvement[static_cast<std::size_t>(a)] != involvement[static_cast<std::size_t>(b)]) {
            return involvement[static_cast<std::size_t>(a)] > involvement[static_cast<std::size_t>(b)];
        }
        return a < b;  // tie at the cutoff: lower vocabulary index wins
    });
    std::vector<std::uint8_t> top(static_cast<std::size_t>(V), 0);
    for (int k = 0; k < n; ++k) top[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = 1;
    std::vector<std::uint8_t> held(static_cast<std::size_t>(V) * V, 0);
    for (int i = 0; i < V; ++i) {
        for (int j = 0; j < V; ++j) {
            if (i == j) continue;
            const bool touches_top = top[static_cast<std::size_t>(i)] || top[static_cast<std::size_t>(j)];
            held[static_cast<std::size_t>(i) * V + j] = (touches_top != invert) ? 1 : 0;
        }
    }
    return HeldOutMask(V, std::move(held));
}

const char* model_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::BPTD: return "bptd";
        case ModelKind::BPTF: return "bptf";
        case ModelKind::GPIRM: return "gpirm";
        case ModelKind::DCGPIRM: return "dcgpirm";
    }
    return "?";
}

ModelKind model_from_name(const std::string& name) {
    if (name == "bptd") return ModelKind::BPTD;
    if (name == "bptf") return ModelKind::BPTF;
    if (name == "gpirm") return ModelKind::GPIRM;
    if (name == "dcgpirm") return ModelKind::DCGPIRM;
    throw std::invalid_argument("unknown model '" + name + "'");
}

double poisson_probability(std::int64_t observed, double mean_rate) {
    if (mean_rate < 0.0 || !std::isfinite(mean_rate)) {
        throw std::invalid_argument("poisson_probability: bad rate");
    }
    if (mean_rate == 0.0) return observed == 0 ? 1.0 : 0.0;
    const double y = static_cast<double>(observed);
    return std::exp(-mean_rate + y * std::log(mean_rate) - std::lgamma(y + 1.0));
}

double inverse_perplexity(const std::vector<double>& probabilities) {
    if (probabilities.empty()) throw std::invalid_argument("inverse_perplexity: no elements");
    double log_sum = 0.0;
    for (double p : probabilities) {
        if (p <= 0.0) return 0.0;
        log_sum += std::log(p);
    }
    return std::exp(log_sum / static_cast<double>(probabilities.size()));
}

namespace {

struct HeldCellSet {
    std::vector<PredictionResult::Cell> cells;
};

HeldCellSet enumerate_held_cells(const CountTensor& test, const HeldOutMask& mask, bool include_zero) {
    const int V = test.num_countries();
    const int A = test.num_actions();
    const int T = test.num_steps();
    HeldCellSet out;
    for (int i = 0; i < V; ++i) {
        for (int j = 0; j < V; ++j) {
            if (i == j || !mask.is_held(i, j)) continue;
            for (int a = 0; a < A; ++a) {
                for (int t = 0; t < T; ++t) {
                    const std::int64_t y = test.count(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                                                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(t));
                    if (!include_zero && y == 0) continue;
                    out.cells.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                                         static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(t), y, 0.0,
                                         0.0});
                }
            }
        }
    }
    if (out.cells.empty()) throw std::runtime_error("strong_generalization: empty held-out set");
    return out;
}

std::vector<Token> observed_test_tokens(const CountTensor& test, const HeldOutMask& mask) {
    std::vector<Token> tokens;
    for (const auto& e : test.sorted_entries()) {
        if (mask.is_held(static_cast<int>(e.i), static_cast<int>(e.j))) continue;
        for (std::int64_t n = 0; n < e.count; ++n) tokens.push_back({e.i, e.j, e.a, e.t});
    }
    return tokens;
}

PredictionResult finish_prediction(HeldCellSet& held, const std::vector<double>& rate_sums, int n_samples) {
    PredictionResult result;
    std::vector<double> probs(held.cells.size());
    for (std::size_t n = 0; n < held.cells.size(); ++n) {
        auto& cell = held.cells[n];
        cell.mean_rate = rate_sums[n] / static_cast<double>(n_samples);
        cell.probability = poisson_probability(cell.observed, cell.mean_rate);
        probs[n] = cell.probability;
    }
    result.inverse_perplexity = inverse_perplexity(probs);
    result.cells = std::move(held.cells);
    return result;
}

int saved_sample_count(const EvalProtocol& protocol) {
    int n = 0;
    for (int s = protocol.test_burnin + 1; s <= protocol.test_sweeps; ++s) {
        if ((s - protocol.test_burnin) % protocol.save_every == 0) ++n;
    }
    return n;
}

bool is_saved(int sweep, const EvalProtocol& protocol) {
    return sweep > protocol.test_burnin && (sweep - protocol.test_burnin) % protocol.save_every == 0;
}

// Community-pair mass over the observed dyads only.
std::vector<double> observed_pair_mass(const std::vector<double>& theta, int V, int C,
                                       const HeldOutMask& mask) {
    std::vector<double> x(static_cast<std::size_t>(C) * C, 0.0);
    for (int i = 0; i < V; ++i) {
        for (int j = 0; j < V; ++j) {
            if (i == j || mask.is_held(i, j)) continue;
            const double* ti = &theta[static_cast<std::size_t>(i) * C];
            const double* tj = &theta[static_cast<std::size_t>(j) * C];
            for (int c = 0; c < C; ++c) {
                for (int d = 0; d < C; ++d) {
                    x[static_cast<std::size_t>(c) * C + d] += ti[c] * tj[d];
                }
            }
        }
    }
    return x;
}

PredictionResult eval_bptd(const CountTensor& train, const CountTensor& test, const HeldOutMask& mask,
                           int C, int K, int R, const Hyperparams& hyper, const EvalProtocol& protocol,
                           RngStream& rng) {
    ModelDims dims{train.num_countries(), train.num_actions(), train.num_steps(), C, K, R};
    BPTDState state = sample_prior(dims, hyper, rng);
    auto train_tokens = tokens_from_tensor(train);
    std::vector<TokenAssignment> assignments;
    init_assignments_uniform(dims, train_tokens.size(), assignments, rng);
    SweepOptions sweep_options;
    sweep_options.alloc = protocol.alloc;
    sweep_options.workers = protocol.workers;
    for (int s = 0; s < protocol.train_sweeps; ++s) {
        gibbs_sweep(state, train_tokens, assignments, rng, sweep_options);
    }

    // Clamp everything but the time-step factors; fresh prior rows for the
    // test window.
    BPTDState test_state = state;
    test_state.dims.T = test.num_steps();
    test_state.psi.resize(static_cast<std::size_t>(test.num_steps()) * R);
    for (auto& x : test_state.psi) x = rng.gamma(hyper.eps0, hyper.eps0);

    auto obs_tokens = observed_test_tokens(test, mask);
    std::vector<TokenAssignment> obs_assignments;
    init_assignments_uniform(test_state.dims, obs_tokens.size(), obs_assignments, rng);

    // Time-factor exposure over the observed dyads, fixed through the test phase.
    const auto x_obs = observed_pair_mass(state.theta, dims.V, C, mask);
    Aggregates agg = compute_aggregates(state);
    std::vector<double> regime_exposure(static_cast<std::size_t>(R), 0.0);
    for (int c = 0; c < C; ++c) {
        for (int d = 0; d < C; ++d) {
            const double x = x_obs[static_cast<std::size_t>(c) * C + d];
            for (int k = 0; k < K; ++k) {
                const double* cell = &state.core[dims.core_index(c, d, k, 0)];
                for (int r = 0; r < R; ++r) {
                    regime_exposure[static_cast<std::size_t>(r)] += cell[r] * x * agg.F[k];
                }
            }
        }
    }

    auto held = enumerate_held_cells(test, mask, protocol.include_zero_cells);
    std::vector<double> rate_sums(held.cells.size(), 0.0);
    const int n_saved = saved_sample_count(protocol);
    std::vector<double> M(static_cast<std::size_t>(C) * C);

    for (int sweep = 1; sweep <= protocol.test_sweeps; ++sweep) {
        LatentSources src(test_state.dims);
        if (!obs_tokens.empty()) {
            src = (protocol.alloc == AllocationMode::Joint)
                      ? allocate_joint(test_state, obs_tokens, obs_assignments, rng)
                      : allocate_compositional(test_state, obs_tokens, obs_assignments, rng);
        }
        for (int t = 0; t < test_state.dims.T; ++t) {
            for (int r = 0; r < R; ++r) {
                const std::int64_t count = src.regime[static_cast<std::size_t>(t) * R + r];
                test_state.psi[static_cast<std::size_t>(t) * R + r] =
                    rng.gamma(hyper.eps0 + static_cast<double>(count),
                              hyper.eps0 + regime_exposure[static_cast<std::size_t>(r)]);
            }
        }
        if (!is_saved(sweep, protocol)) continue;
        // Accumulate held-cell rates via per-(a,t) mixing matrices.
        int cur_a = -1, cur_t = -1;
        std::vector<std::size_t> order(held.cells.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            const auto& cx = held.cells[x];
            const auto& cy = held.cells[y];
            return std::tie(cx.a, cx.t, cx.i, cx.j) < std::tie(cy.a, cy.t, cy.i, cy.j);
        });
        for (std::size_t idx : order) {
            const auto& cell = held.cells[idx];
            if (static_cast<int>(cell.a) != cur_a || static_cast<int>(cell.t) != cur_t) {
                cur_a = static_cast<int>(cell.a);
                cur_t = static_cast<int>(cell.t);
                for (int c = 0; c < C; ++c) {
                    for (int d = 0; d < C; ++d) {
                        double acc = 0.0;
                        for (int k = 0; k < K; ++k) {
                            const double* lam = &state.core[dims.core_index(c, d, k, 0)];
                            for (int r = 0; r < R; ++r) {
                                acc += state.phi_at(cur_a, k) *
                                       test_state.psi[static_cast<std::size_t>(cur_t) * R + r] * lam[r];
                            }
                        }
                        M[static_cast<std::size_t>(c) * C + d] = acc;
                    }
                }
            }
            double rate = 0.0;
            for (int c = 0; c < C; ++c) {
                const double th_i = state.theta_at(static_cast<int>(cell.i), c);
                double acc = 0.0;
                for (int d = 0; d < C; ++d) {
                    acc += M[static_cast<std::size_t>(c) * C + d] * state.theta_at(static_cast<int>(cell.j), d);
                }
                rate += th_i * acc;
            }
            rate_sums[idx] += rate;
        }
    }
    return finish_prediction(held, rate_sums, n_saved);
}

PredictionResult eval_bptf(const CountTensor& train, const CountTensor& test, const HeldOutMask& mask,
                           int C, int K, int R, const Hyperparams& hyper, const EvalProtocol& protocol,
                           RngStream& rng) {
    const int V = train.num_countries();
    const int A = train.num_actions();
    const int T_total = train.num_steps() + test.num_steps();
    const int Q = bptf_q_for_parity(V, A, T_total, C, K, R);
    BPTFState state = bptf_sample_prior(V, A, train.num_steps(), Q, hyper, rng);
    auto train_tokens = tokens_from_tensor(train);
    std::vector<std::uint16_t> assignments;
    for (int s = 0; s < protocol.train_sweeps; ++s) {
        bptf_sweep(state, train_tokens, assignments, rng);
    }

    BPTFState test_state = state;
    test_state.T = test.num_steps();
    test_state.psi.resize(static_cast<std::size_t>(test.num_steps()) * Q);
    for (auto& x : test_state.psi) x = rng.gamma(hyper.eps0, hyper.eps0);

    auto obs_tokens = observed_test_tokens(test, mask);
    std::vector<std::uint16_t> obs_assignments;

    // Per-class exposures over the observed dyads.
    std::vector<double> x_obs(static_cast<std::size_t>(Q), 0.0);
    for (int i = 0; i < V; ++i) {
        for (int j = 0; j < V; ++j) {
            if (i == j || mask.is_held(i, j)) continue;
            for (int q = 0; q < Q; ++q) {
                x_obs[static_cast<std::size_t>(q)] += state.theta_send[static_cast<std::size_t>(i) * Q + q] *
                                                      state.theta_recv[static_cast<std::size_t>(j) * Q + q];
            }
        }
    }
    std::vector<double> f_q(static_cast<std::size_t>(Q), 0.0);
    for (int a = 0; a < A; ++a) {
        for (int q = 0; q < Q; ++q) f_q[static_cast<std::size_t>(q)] += state.phi[static_cast<std::size_t>(a) * Q + q];
    }

    auto held = enumerate_held_cells(test, mask, protocol.include_zero_cells);
    std::vector<double> rate_sums(held.cells.size(), 0.0);
    const int n_saved = saved_sample_count(protocol);

    for (int sweep = 1; sweep <= protocol.test_sweeps; ++sweep) {
        std::vector<std::int64_t> regime(static_cast<std::size_t>(test_state.T) * Q, 0);
        if (!obs_tokens.empty()) {
            BPTFSources src = bptf_allocate(test_state, obs_tokens, obs_assignments, rng);
            regime = src.regime;
        }
        for (int t = 0; t < test_state.T; ++t) {
            for (int q = 0; q < Q; ++q) {
                const double expo = state.lambda[static_cast<std::size_t>(q)] * f_q[static_cast<std::size_t>(q)] *
                                    x_obs[static_cast<std::size_t>(q)];
                test_state.psi[static_cast<std::size_t>(t) * Q + q] =
                    rng.gamma(hyper.eps0 + static_cast<double>(regime[static_cast<std::size_t>(t) * Q + q]),
                              hyper.eps0 + expo);
            }
        }
        if (!is_saved(sweep, protocol)) continue;
        for (std::size_t n = 0; n < held.cells.size(); ++n) {
            const auto& cell = held.cells[n];
            rate_sums[n] += test_state.rate(static_cast<int>(cell.i), static_cast<int>(cell.j),
                                            static_cast<int>(cell.a), static_cast<int>(cell.t));
        }
    }
    return finish_prediction(held, rate_sums, n_saved);
}

PredictionResult eval_gpirm(const CountTensor& train, const CountTensor& test, const HeldOutMask& mask,
                            bool degree_corrected, int C, int K, int R, const Hyperparams& hyper,
                            const EvalProtocol& protocol, RngStream& rng) {
    ModelDims dims{train.num_countries(), train.num_actions(), train.num_steps(), C, K, R};
    GPIRMState state = gpirm_sample_prior(dims, hyper, degree_corrected, rng);
    for (int s = 0; s < protocol.train_sweeps; ++s) {
        gpirm_sweep(state, train, rng);
    }

    const int T_test = test.num_steps();
    GPIRMState test_state = state;
    test_state.dims.T = T_test;
    test_state.z_time.assign(static_cast<std::size_t>(T_test), 0);
    for (auto& z : test_state.z_time) {
        z = std::min(static_cast<int>(rng.uniform() * R), R - 1);
    }
    test_state.deg_time.assign(static_cast<std::size_t>(T_test), 1.0);
    if (degree_corrected) {
        for (auto& x : test_state.deg_time) x = rng.gamma(hyper.eps0, hyper.eps0);
    }

    // Observed-cell aggregates; country and action assignments are clamped.
    const int V = dims.V;
    std::vector<double> x_obs(static_cast<std::size_t>(C) * C, 0.0);
    for (int i = 0; i < V; ++i) {
        for (int j = 0; j < V; ++j) {
            if (i == j || mask.is_held(i, j)) continue;
            x_obs[static_cast<std::size_t>(state.z_country[static_cast<std::size_t>(i)]) * C +
                  static_cast<std::size_t>(state.z_country[static_cast<std::size_t>(j)])] +=
                state.deg_country[static_cast<std::size_t>(i)] * state.deg_country[static_cast<std::size_t>(j)];
        }
    }
    std::vector<double> action_mass(static_cast<std::size_t>(K), 0.0);
    for (int a = 0; a < dims.A; ++a) {
        action_mass[static_cast<std::size_t>(state.z_action[static_cast<std::size_t>(a)])] +=
            state.deg_action[static_cast<std::size_t>(a)];
    }
    // Per test step: observed counts grouped by clamped (z_i, z_j, z_a), and
    // the per-step observed total.
    const std::size_t block = static_cast<std::size_t>(C) * C * K;
    std::vector<std::vector<double>> y_step(static_cast<std::size_t>(T_test),
                                            std::vector<double>(block, 0.0));
    std::vector<double> y_step_total(static_cast<std::size_t>(T_test), 0.0);
    for (const auto& e : test.sorted_entries()) {
        if (mask.is_held(static_cast<int>(e.i), static_cast<int>(e.j))) continue;
        const std::size_t idx =
            (static_cast<std::size_t>(state.z_country[e.i]) * C + static_cast<std::size_t>(state.z_country[e.j])) *
                K +
            static_cast<std::size_t>(state.z_action[e.a]);
        y_step[e.t][idx] += static_cast<double>(e.count);
        y_step_total[e.t] += static_cast<double>(e.count);
    }
    // Exposure of one unit of time-degree for each candidate regime.
    std::vector<double> regime_exposure(static_cast<std::size_t>(R), 0.0);
    for (int c = 0; c < C; ++c) {
        for (int d = 0; d < C; ++d) {
            for (int k = 0; k < K; ++k) {
                for (int r = 0; r < R; ++r) {
                    regime_exposure[static_cast<std::size_t>(r)] +=
                        x_obs[static_cast<std::size_t>(c) * C + d] * action_mass[static_cast<std::size_t>(k)] *
                        state.core[dims.core_index(c, d, k, r)];
                }
            }
        }
    }

    auto held = enumerate_held_cells(test, mask, protocol.include_zero_cells);
    std::vector<double> rate_sums(held.cells.size(), 0.0);
    const int n_saved = saved_sample_count(protocol);

    for (int sweep = 1; sweep <= protocol.test_sweeps; ++sweep) {
        for (int t = 0; t < T_test; ++t) {
            const double deg_t = test_state.deg_time[static_cast<std::size_t>(t)];
            std::vector<double> logw(static_cast<std::size_t>(R), 0.0);
            for (int r = 0; r < R; ++r) {
                double ll = -deg_t * regime_exposure[static_cast<std::size_t>(r)];
                for (int c = 0; c < C; ++c) {
                    for (int d = 0; d < C; ++d) {
                        for (int k = 0; k < K; ++k) {
                            const std::size_t idx = (static_cast<std::size_t>(c) * C + d) * K + k;
                            const double y = y_step[static_cast<std::size_t>(t)][idx];
                            if (y > 0.0) ll += y * std::log(state.core[dims.core_index(c, d, k, r)]);
                        }
                    }
                }
                logw[static_cast<std::size_t>(r)] = ll;
            }
            double max_lw = logw[0];
            for (double lw : logw) max_lw = std::max(max_lw, lw);
            std::vector<double> w(static_cast<std::size_t>(R));
            for (int r = 0; r < R; ++r) w[static_cast<std::size_t>(r)] = std::exp(logw[static_cast<std::size_t>(r)] - max_lw);
            test_state.z_time[static_cast<std::size_t>(t)] = static_cast<int>(rng.categorical(w));
            if (degree_corrected) {
                const int zt = test_state.z_time[static_cast<std::size_t>(t)];
                test_state.deg_time[static_cast<std::size_t>(t)] =
                    rng.gamma(hyper.eps0 + y_step_total[static_cast<std::size_t>(t)],
                              hyper.eps0 + regime_exposure[static_cast<std::size_t>(zt)]);
            }
        }
        if (!is_saved(sweep, protocol)) continue;
        for (std::size_t n = 0; n < held.cells.size(); ++n) {
            const auto& cell = held.cells[n];
            double rate = state.core[dims.core_index(state.z_country[cell.i], state.z_country[cell.j],
                                                     state.z_action[cell.a],
                                                     test_state.z_time[cell.t])];
            if (degree_corrected) {
                rate *= state.deg_country[cell.i] * state.deg_country[cell.j] * state.deg_action[cell.a] *
                        test_state.deg_time[cell.t];
            }
            rate_sums[n] += rate;
        }
    }
    return finish_prediction(held, rate_sums, n_saved);
}

}  // namespace

PredictionResult strong_generalization(const CountTensor& train, const CountTensor& test,
                                       const HeldOutMask& mask, ModelKind model, int C, int K, int R,
                                       const Hyperparams& hyper, const EvalProtocol& protocol,
                                       std::uint64_t seed) {
    if (protocol.test_burnin >= protocol.test_sweeps) {
        throw std::invalid_argument("strong_generalization: test_burnin must be below test_sweeps");
    }
    RngStream rng(seed);
    switch (model) {
        case ModelKind::BPTD:
            return eval_bptd(train, test, mask, C, K, R, hyper, protocol, rng);
        case ModelKind::BPTF:
            return eval_bptf(train, test, mask, C, K, R, hyper, protocol, rng);
        case ModelKind::GPIRM:
            return eval_gpirm(train, test, mask, false, C, K, R, hyper, protocol, rng);
        case ModelKind::DCGPIRM:
            return eval_gpirm(train, test, mask, true, C, K, R, hyper, protocol, rng);
    }
    throw std::logic_error("strong_generalization: unreachable");
}

std::vector<ComparisonRow> compare_models(const CountTensor& tensor,
                                          const std::vector<std::pair<std::string, HeldOutMask>>& masks,
                                          const std::vector<ModelKind>& models,
                                          const std::vector<std::uint64_t>& seeds, int C, int K, int R,
                                          const Hyperparams& hyper, const EvalProtocol& protocol,
                                          int holdout_steps) {
    if (models.empty() || seeds.empty()) {
        throw std::invalid_argument("compare_models: need at least one model and one seed");
    }
    auto split = split_train_test(tensor, holdout_steps);
    std::vector<ComparisonRow> rows;
    for (const auto& [mask_name, mask] : masks) {
        const std::size_t first = rows.size();
        for (ModelKind model : models) {
            for (std::uint64_t seed : seeds) {
                const auto start = std::chrono::steady_clock::now();
                PredictionResult pred =
                    strong_generalization(split.train, split.test, mask, model, C, K, R, hyper, protocol, seed);
                const auto stop = std::chrono::steady_clock::now();
                ComparisonRow row;
                row.model = model;
                row.mask_name = mask_name;
                row.seed = seed;
                row.inverse_perplexity = pred.inverse_perplexity;
                row.wall_seconds = std::chrono::duration<double>(stop - start).count();
                rows.push_back(row);
            }
        }
        double best = 0.0;
        for (std::size_t n = first; n < rows.size(); ++n) best = std::max(best, rows[n].inverse_perplexity);
        for (std::size_t n = first; n < rows.size(); ++n) {
            rows[n].scaled = best > 0.0 ? rows[n].inverse_perplexity / best : 0.0;
        }
    }
    return rows;
}

std::string comparison_header() {
    return "model\tmask\tseed\tinverse_perplexity\tscaled_value\twall_clock_seconds";
}

std::string comparison_row_tsv(const ComparisonRow& row) {
    std::ostringstream out;
    out.precision(10);
    out << model_name(row.model) << '\t' << row.mask_name << '\t' << row.seed << '\t'
        << row.inverse_perplexity << '\t' << row.scaled << '\t' << row.wall_seconds;
    return out.str();
}

}  // namespace bptd
