#include <doctest.h>

#include <cmath>

#include "bptd/baselines.hpp"
#include "oracle_helpers.hpp"

using namespace bptd;

TEST_CASE("bptf class parity formula") {
    CHECK(bptf_q_for_parity(249, 20, 12, 20, 6, 3) == 24);
    CHECK(bptf_q_for_parity(1, 1, 1, 1, 1, 1) == 1);
    CHECK(bptf_q_for_parity(10, 5, 4, 2, 2, 2) == 2);
    CHECK_THROWS(bptf_q_for_parity(0, 1, 1, 1, 1, 1));
}

TEST_CASE("single-class bptf puts every token in class zero") {
    Hyperparams hyper{1.0, 1.0};
    RngStream rng(2);
    auto state = bptf_sample_prior(3, 2, 2, 1, hyper, rng);
    std::vector<Token> tokens = {{0, 1, 0, 0}, {1, 2, 1, 1}, {2, 0, 0, 1}};
    std::vector<std::uint16_t> assignments;
    auto src = bptf_allocate(state, tokens, assignments, rng);
    CHECK(src.cls[0] == 3);
    for (auto q : assignments) CHECK(q == 0);
}

TEST_CASE("bptf allocation preserves the token count across modes") {
    Hyperparams hyper{1.0, 2.0};
    RngStream rng(3);
    auto state = bptf_sample_prior(5, 3, 4, 4, hyper, rng);
    auto tensor = bptf_simulate(state, rng);
    auto tokens = tokens_from_tensor(tensor);
    std::vector<std::uint16_t> assignments;
    auto src = bptf_allocate(state, tokens, assignments, rng);
    std::int64_t cls_total = 0, send_total = 0;
    for (auto v : src.cls) cls_total += v;
    for (auto v : src.send) send_total += v;
    CHECK(cls_total == static_cast<std::int64_t>(tokens.size()));
    CHECK(send_total == static_cast<std::int64_t>(tokens.size()));
}

TEST_CASE("bptf sweeps are deterministic under a fixed seed") {
    Hyperparams hyper{0.5, 1.0};
    RngStream data_rng(4);
    auto gen = bptf_sample_prior(4, 2, 3, 3, hyper, data_rng);
    auto tensor = bptf_simulate(gen, data_rng);
    auto tokens = tokens_from_tensor(tensor);
    auto run = [&](std::uint64_t seed) {
        RngStream rng(seed);
        auto state = bptf_sample_prior(4, 2, 3, 3, hyper, rng);
        std::vector<std::uint16_t> assignments;
        for (int s = 0; s < 8; ++s) bptf_sweep(state, tokens, assignments, rng);
        return state;
    };
    auto a = run(7), b = run(7);
    CHECK(a.theta_send == b.theta_send);
    CHECK(a.lambda == b.lambda);
    CHECK(a.zeta == b.zeta);
}

TEST_CASE("a CP expansion with Q = C^2 K R reproduces any Tucker rate tensor") {
    ModelDims dims{4, 3, 3, 2, 2, 2};
    Hyperparams hyper{1.0, 2.0};
    RngStream rng(5);
    auto tucker = sample_prior(dims, hyper, rng);

    const int Q = dims.C * dims.C * dims.K * dims.R;
    BPTFState cp;
    cp.V = dims.V;
    cp.A = dims.A;
    cp.T = dims.T;
    cp.Q = Q;
    cp.hyper = hyper;
    cp.theta_send.resize(static_cast<std::size_t>(dims.V) * Q);
    cp.theta_recv.resize(static_cast<std::size_t>(dims.V) * Q);
    cp.phi.resize(static_cast<std::size_t>(dims.A) * Q);
    cp.psi.resize(static_cast<std::size_t>(dims.T) * Q);
    cp.lambda.resize(static_cast<std::size_t>(Q));
    for (int c = 0; c < dims.C; ++c) {
        for (int d = 0; d < dims.C; ++d) {
            for (int k = 0; k < dims.K; ++k) {
                for (int r = 0; r < dims.R; ++r) {
                    const std::size_t q = dims.core_index(c, d, k, r);
                    cp.lambda[q] = tucker.core[q];
                    for (int i = 0; i < dims.V; ++i) {
                        cp.theta_send[static_cast<std::size_t>(i) * Q + q] = tucker.theta_at(i, c);
                        cp.theta_recv[static_cast<std::size_t>(i) * Q + q] = tucker.theta_at(i, d);
                    }
                    for (int a = 0; a < dims.A; ++a) {
                        cp.phi[static_cast<std::size_t>(a) * Q + q] = tucker.phi_at(a, k);
                    }
                    for (int t = 0; t < dims.T; ++t) {
                        cp.psi[static_cast<std::size_t>(t) * Q + q] = tucker.psi_at(t, r);
                    }
                }
            }
        }
    }
    for (int i = 0; i < dims.V; ++i) {
        for (int j = 0; j < dims.V; ++j) {
            if (i == j) continue;
            for (int a = 0; a < dims.A; ++a) {
                for (int t = 0; t < dims.T; ++t) {
                    const double expected = poisson_rate(tucker, i, j, a, t);
                    CHECK(cp.rate(i, j, a, t) == doctest::Approx(expected).epsilon(1e-10));
                }
            }
        }
    }
}

TEST_CASE("one-hot embedding reproduces gpirm rates exactly") {
    ModelDims dims{5, 4, 3, 3, 2, 2};
    Hyperparams hyper{0.7, 1.0};
    for (int variant = 0; variant < 2; ++variant) {
        const bool dc = variant == 1;
        for (int seed = 0; seed < 100; ++seed) {
            RngStream rng(static_cast<std::uint64_t>(1000 + seed));
            auto gpirm = gpirm_sample_prior(dims, hyper, dc, rng);
            auto embedded = gpirm_embed(gpirm);
            for (int i = 0; i < dims.V; ++i) {
                for (int j = 0; j < dims.V; ++j) {
                    if (i == j) continue;
                    for (int a = 0; a < dims.A; ++a) {
                        for (int t = 0; t < dims.T; ++t) {
                            const double expected = gpirm.rate(i, j, a, t);
                            const double got = poisson_rate(embedded, i, j, a, t);
                            REQUIRE(std::fabs(got - expected) <= 1e-12 * std::fabs(expected));
                        }
                    }
                }
            }
        }
    }
}

TEST_CASE("single-cell gpirm reduces to one Poisson rate everywhere") {
    ModelDims dims{3, 2, 2, 1, 1, 1};
    Hyperparams hyper{1.0, 1.0};
    RngStream rng(6);
    auto state = gpirm_sample_prior(dims, hyper, false, rng);
    const double lam = state.core[0];
    for (int i = 0; i < dims.V; ++i) {
        for (int j = 0; j < dims.V; ++j) {
            if (i != j) CHECK(state.rate(i, j, 0, 0) == lam);
        }
    }
}

TEST_CASE("gpirm log likelihood matches brute force") {
    ModelDims dims{4, 3, 3, 2, 2, 2};
    Hyperparams hyper{1.0, 1.0};
    RngStream rng(8);
    auto state = gpirm_sample_prior(dims, hyper, true, rng);
    auto tensor = gpirm_simulate(state, rng);
    double brute = 0.0;
    for (int i = 0; i < dims.V; ++i) {
        for (int j = 0; j < dims.V; ++j) {
            if (i == j) continue;
            for (int a = 0; a < dims.A; ++a) {
                for (int t = 0; t < dims.T; ++t) {
                    const double mu = state.rate(i, j, a, t);
                    const double y = static_cast<double>(
                        tensor.count(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                                     static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(t)));
                    brute += y * std::log(mu) - mu - std::lgamma(y + 1.0);
                }
            }
        }
    }
    CHECK(gpirm_log_likelihood(state, tensor) == doctest::Approx(brute).epsilon(1e-9));
}

TEST_CASE("gpirm sweeps run deterministically and tolerate empty communities") {
    ModelDims dims{4, 2, 2, 3, 2, 2};
    Hyperparams hyper{1.0, 1.0};
    RngStream data_rng(9);
    auto gen = gpirm_sample_prior(dims, hyper, false, data_rng);
    auto tensor = gpirm_simulate(gen, data_rng);
    auto run = [&](std::uint64_t seed) {
        RngStream rng(seed);
        auto state = gpirm_sample_prior(dims, hyper, false, rng);
        // force an initially empty community
        for (auto& z : state.z_country) z = 0;
        for (int s = 0; s < 10; ++s) gpirm_sweep(state, tensor, rng);
        return state;
    };
    auto a = run(10), b = run(10);
    CHECK(a.z_country == b.z_country);
    CHECK(a.core == b.core);
}

TEST_CASE("baseline geweke harnesses pass at reduced size") {
    Hyperparams hyper{10.0, 0.8};
    GewekeConfig config;
    config.n_samples = 1500;
    config.thin = 100;
    config.batches = 50;
    {
        RngStream rng(1);
        auto result = geweke_bptf(3, 2, 2, 3, hyper, config, rng);
        CHECK(result.max_abs_z() < 5.0);
    }
    {
        ModelDims dims{3, 2, 2, 2, 2, 2};
        RngStream rng(2);
        GewekeConfig faster = config;
        faster.thin = 40;
        auto result = geweke_gpirm(dims, hyper, false, faster, rng);
        CHECK(result.max_abs_z() < 5.0);
        RngStream rng_dc(3);
        auto result_dc = geweke_gpirm(dims, hyper, true, faster, rng_dc);
        CHECK(result_dc.max_abs_z() < 5.0);
    }
}
