#include <doctest.h>

#include <cmath>

#include "bptd/checkpoint.hpp"
#include "bptd/model.hpp"
#include "oracle_helpers.hpp"

using namespace bptd;

namespace {

BPTDState unit_state(const ModelDims& dims) {
    BPTDState s;
    s.dims = dims;
    s.theta.assign(static_cast<std::size_t>(dims.V) * dims.C, 1.0);
    s.phi.assign(static_cast<std::size_t>(dims.A) * dims.K, 1.0);
    s.psi.assign(static_cast<std::size_t>(dims.T) * dims.R, 1.0);
    s.core.assign(dims.core_size(), 1.0);
    s.eta_within.assign(dims.C, 1.0);
    s.eta_between.assign(dims.C, 1.0);
    s.nu.assign(dims.K, 1.0);
    s.rho.assign(dims.R, 1.0);
    s.alpha.assign(dims.V, 1.0);
    s.beta.assign(dims.V, 1.0);
    return s;
}

}  // namespace

TEST_CASE("dims and hyper validation") {
    CHECK_THROWS(ModelDims{0, 1, 1, 1, 1, 1}.validate());
    CHECK_THROWS(Hyperparams{0.0, 1.0}.validate());
    CHECK_THROWS(Hyperparams{0.1, -1.0}.validate());
}

TEST_CASE("single-class core uses the within-community shape") {
    ModelDims dims{3, 2, 2, 1, 1, 1};
    Hyperparams hyper{1.0, 2.0};
    RngStream rng(1);
    auto s = sample_prior(dims, hyper, rng);
    CHECK(s.core.size() == 1);
    CHECK(s.core_shape(0, 0, 0, 0) ==
          doctest::Approx(s.eta_within[0] * s.eta_between[0] * s.nu[0] * s.rho[0]).epsilon(1e-12));
}

TEST_CASE("prior draws are strictly positive and finite across seeds") {
    ModelDims dims{3, 2, 2, 2, 2, 2};
    Hyperparams hyper{0.1, 1.0};
    for (int seed = 0; seed < 1000; ++seed) {
        RngStream rng(static_cast<std::uint64_t>(seed));
        auto s = sample_prior(dims, hyper, rng);
        REQUIRE(s.all_positive_finite());
    }
}

TEST_CASE("poisson_rate basics") {
    ModelDims dims{2, 1, 1, 1, 1, 1};
    auto s = unit_state(dims);
    CHECK(poisson_rate(s, 0, 1, 0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS(poisson_rate(s, 0, 0, 0, 0));
    CHECK_THROWS(poisson_rate(s, 0, 1, 1, 0));

    // doubling a theta row doubles every rate it senders
    ModelDims dims2{3, 2, 2, 2, 2, 2};
    RngStream rng(3);
    Hyperparams hyper{1.0, 2.0};
    auto s2 = sample_prior(dims2, hyper, rng);
    const double before = poisson_rate(s2, 0, 1, 1, 0);
    for (int c = 0; c < dims2.C; ++c) s2.theta[0 * dims2.C + c] *= 2.0;
    CHECK(poisson_rate(s2, 0, 1, 1, 0) == doctest::Approx(2.0 * before).epsilon(1e-12));
}

TEST_CASE("poisson_rate matches the brute-force oracle") {
    ModelDims dims{4, 3, 3, 3, 2, 2};
    Hyperparams hyper{0.5, 1.5};
    RngStream rng(17);
    auto s = sample_prior(dims, hyper, rng);
    for (int i = 0; i < dims.V; ++i) {
        for (int j = 0; j < dims.V; ++j) {
            if (i == j) continue;
            for (int a = 0; a < dims.A; ++a) {
                for (int t = 0; t < dims.T; ++t) {
                    const double expected = oracle::brute_force_rate(s, i, j, a, t);
                    CHECK(poisson_rate(s, i, j, a, t) == doctest::Approx(expected).epsilon(1e-12));
                }
            }
        }
    }
}

TEST_CASE("total_rate equals the sum of cell rates") {
    ModelDims dims{4, 2, 3, 2, 2, 2};
    Hyperparams hyper{0.7, 1.0};
    RngStream rng(23);
    auto s = sample_prior(dims, hyper, rng);
    double brute = 0.0;
    for (int i = 0; i < dims.V; ++i) {
        for (int j = 0; j < dims.V; ++j) {
            if (i == j) continue;
            for (int a = 0; a < dims.A; ++a) {
                for (int t = 0; t < dims.T; ++t) brute += oracle::brute_force_rate(s, i, j, a, t);
            }
        }
    }
    CHECK(total_rate(s) == doctest::Approx(brute).epsilon(1e-10));
}

TEST_CASE("directionality lives in the core") {
    ModelDims dims{3, 2, 2, 2, 1, 1};
    Hyperparams hyper{1.0, 2.0};
    RngStream rng(29);
    auto s = sample_prior(dims, hyper, rng);
    // symmetric core: swapping sender and receiver leaves the rate unchanged
    for (int c = 0; c < dims.C; ++c) {
        for (int d = c + 1; d < dims.C; ++d) {
            const double v = s.core[dims.core_index(c, d, 0, 0)];
            s.core[dims.core_index(d, c, 0, 0)] = v;
        }
    }
    CHECK(poisson_rate(s, 0, 1, 0, 0) == doctest::Approx(poisson_rate(s, 1, 0, 0, 0)).epsilon(1e-12));
    // asymmetric core: generally not
    s.core[dims.core_index(0, 1, 0, 0)] *= 7.0;
    CHECK(poisson_rate(s, 0, 1, 0, 0) != doctest::Approx(poisson_rate(s, 1, 0, 0, 0)).epsilon(1e-9));
}

TEST_CASE("expected core sum closed forms") {
    CHECK(expected_core_sum_limit(1.0, 1.0, 1.0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(expected_core_sum(1.0, 1.0, 1.0, 2) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(expected_core_sum(1.0, 1.0, 2.0, 2) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK_THROWS(expected_core_sum(0.0, 1.0, 1.0, 2));
    CHECK_THROWS(expected_core_sum_limit(1.0, -1.0, 1.0));

    // finite truncations increase monotonically toward the limit
    double prev = 0.0;
    for (int C : {1, 2, 5, 10, 50, 500}) {
        const double value = expected_core_sum(1.3, 0.9, 1.1, C);
        CHECK(value > prev);
        CHECK(value < expected_core_sum_limit(1.3, 0.9, 1.1));
        prev = value;
    }
}

TEST_CASE("prior Monte Carlo matches the expected core sum") {
    // gamma0 = zeta = delta = 1 held fixed; C=2, K=R=1.
    ModelDims dims{1, 1, 1, 2, 1, 1};
    Hyperparams hyper{1.0, 1.0};
    PriorOverrides fixed;
    fixed.delta = 1.0;
    fixed.zeta = 1.0;
    RngStream rng(31);
    const int n = 100000;
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
        auto s = sample_prior(dims, hyper, rng, fixed);
        for (double x : s.core) acc += x;
    }
    const double mc = acc / n;
    const double expected = expected_core_sum(1.0, 1.0, 1.0, 2);
    CHECK(std::fabs(mc - expected) / expected < 0.02);
}

TEST_CASE("simulate totals follow poisson additivity") {
    ModelDims dims{4, 2, 2, 2, 1, 1};
    Hyperparams hyper{1.0, 2.0};
    RngStream rng(37);
    auto s = sample_prior(dims, hyper, rng);
    const double expected_total = total_rate(s);
    const int n_sims = 100;
    double acc = 0.0;
    for (int k = 0; k < n_sims; ++k) {
        acc += static_cast<double>(simulate(s, rng).total());
    }
    const double se = std::sqrt(expected_total / n_sims);
    CHECK(std::fabs(acc / n_sims - expected_total) < 3.0 * se);

    // identical seeds give identical tensors
    RngStream a(5), b(5);
    auto ta = simulate(s, a);
    auto tb = simulate(s, b);
    CHECK(ta.total() == tb.total());
    CHECK(ta.sorted_entries().size() == tb.sorted_entries().size());
}

TEST_CASE("a zero-rate state simulates an empty tensor") {
    ModelDims dims{3, 2, 2, 2, 2, 2};
    auto s = unit_state(dims);
    const double tiny = std::numeric_limits<double>::min();
    for (auto& x : s.theta) x = tiny;
    for (auto& x : s.core) x = tiny;
    RngStream rng(41);
    CHECK(simulate(s, rng).total() == 0);
}

TEST_CASE("effective_dims thresholds against the largest weight") {
    ModelDims dims{2, 2, 2, 3, 2, 2};
    auto s = unit_state(dims);
    s.eta_between = {10.0, 9.0, 0.01};
    auto eff = effective_dims(s, 0.05);
    CHECK(eff.c_eff == 2);
    CHECK(eff.k_eff == 2);  // equal weights: everything counts
    CHECK(eff.r_eff == 2);
    CHECK_THROWS(effective_dims(s, 0.0));
    CHECK_THROWS(effective_dims(s, 1.0));
}

TEST_CASE("checkpoint round-trips the full state") {
    ModelDims dims{3, 2, 2, 2, 2, 2};
    Hyperparams hyper{0.1, 1.7};
    RngStream rng(43);
    auto s = sample_prior(dims, hyper, rng);
    write_checkpoint("/tmp/bptd_test.ckpt", to_checkpoint(s));
    auto loaded = bptd_from_checkpoint(read_checkpoint("/tmp/bptd_test.ckpt"));
    CHECK(loaded.theta == s.theta);
    CHECK(loaded.core == s.core);
    CHECK(loaded.alpha == s.alpha);
    CHECK(loaded.delta == s.delta);
    CHECK(loaded.hyper.gamma0 == s.hyper.gamma0);
    CHECK(loaded.dims.V == s.dims.V);
}
