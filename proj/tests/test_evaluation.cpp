#include <doctest.h>

#include <cmath>

#include "bptd/evaluation.hpp"
#include "oracle_helpers.hpp"

using namespace bptd;

namespace {

CountTensor tensor_with(const std::vector<CountTensor::Entry>& entries, int V, int A, int T) {
    CountTensor tensor(V, A, T);
    for (const auto& e : entries) tensor.add(e.i, e.j, e.a, e.t, e.count);
    return tensor;
}

}  // namespace

TEST_CASE("temporal split keeps the last three steps for testing") {
    CountTensor tensor(3, 2, 12);
    for (std::uint32_t t = 0; t < 12; ++t) tensor.add(0, 1, 0, t, static_cast<std::int64_t>(t) + 1);
    auto split = split_train_test(tensor);
    CHECK(split.train.num_steps() == 9);
    CHECK(split.test.num_steps() == 3);
    CHECK(split.train.total() + split.test.total() == tensor.total());
    CHECK(split.test.count(0, 1, 0, 0) == 10);  // original step 9, rebased

    CountTensor boundary(2, 1, 4);
    boundary.add(0, 1, 0, 0, 1);
    boundary.add(0, 1, 0, 3, 1);
    auto tight = split_train_test(boundary, 3);
    CHECK(tight.train.num_steps() == 1);
    CHECK(tight.test.num_steps() == 3);

    CHECK_THROWS(split_train_test(boundary, 4));
    CHECK_THROWS(split_train_test(boundary, 0));
}

TEST_CASE("top-active mask holds dyads touching the busiest countries") {
    auto tensor = tensor_with({{0, 1, 0, 0, 9}, {1, 0, 0, 0, 1}, {1, 2, 0, 0, 4}, {2, 1, 0, 0, 1}}, 3, 1, 1);
    // involvements: 0 -> 10, 1 -> 15, 2 -> 5; top-1 is country 1
    auto mask = mask_top_active(tensor, 1, false);
    CHECK(mask.is_held(0, 1));
    CHECK(mask.is_held(1, 2));
    CHECK(!mask.is_held(0, 2));
    CHECK(!mask.is_held(2, 0));

    auto inverse = mask_top_active(tensor, 1, true);
    std::int64_t covered = 0;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            if (i == j) continue;
            CHECK(mask.is_held(i, j) != inverse.is_held(i, j));
            covered += (mask.is_held(i, j) || inverse.is_held(i, j)) ? 1 : 0;
        }
    }
    CHECK(covered == 6);
    CHECK(mask.held_dyads() + inverse.held_dyads() == 6);
    CHECK_THROWS(mask_top_active(tensor, 3, false));
}

TEST_CASE("tie at the cutoff is broken by vocabulary index") {
    auto tensor = tensor_with({{0, 1, 0, 0, 5}, {2, 3, 0, 0, 5}}, 4, 1, 1);
    // all four countries have involvement 5; top-2 must be countries 0 and 1
    auto mask = mask_top_active(tensor, 2, false);
    CHECK(mask.is_held(0, 2));
    CHECK(mask.is_held(1, 3));
    CHECK(!mask.is_held(2, 3));
}

TEST_CASE("top fifteen of a heavy-tailed synthetic tensor captures about 30% of tokens") {
    const int V = 233;
    RngStream rng(33);
    std::vector<double> weight(static_cast<std::size_t>(V));
    for (int i = 0; i < V; ++i) weight[static_cast<std::size_t>(i)] = std::pow(i + 1.0, -0.55);
    double total_w = 0.0;
    for (double w : weight) total_w += w;
    CountTensor tensor(V, 1, 1);
    const int n_tokens = 200000;
    for (int n = 0; n < n_tokens; ++n) {
        const double u = rng.uniform() * total_w;
        double acc = 0.0;
        int i = 0;
        for (; i < V - 1; ++i) {
            acc += weight[static_cast<std::size_t>(i)];
            if (u <= acc) break;
        }
        int j = std::min(static_cast<int>(rng.uniform() * V), V - 1);
        if (j == i) j = (j + 1) % V;
        tensor.add(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), 0, 0, 1);
    }
    auto mask = mask_top_active(tensor, 15, false);
    std::int64_t held_tokens = 0;
    for (const auto& e : tensor.sorted_entries()) {
        if (mask.is_held(static_cast<int>(e.i), static_cast<int>(e.j))) held_tokens += e.count;
    }
    const double share = static_cast<double>(held_tokens) / static_cast<double>(tensor.total());
    CHECK(share > 0.20);
    CHECK(share < 0.40);
}

TEST_CASE("inverse perplexity is the geometric mean of probabilities") {
    CHECK(inverse_perplexity({1.0, 1.0, 1.0}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(inverse_perplexity({0.1, 0.9}) == doctest::Approx(0.3).epsilon(1e-12));
    // permutation invariance
    CHECK(inverse_perplexity({0.2, 0.5, 0.8}) == doctest::Approx(inverse_perplexity({0.8, 0.2, 0.5})).epsilon(1e-14));
    CHECK_THROWS(inverse_perplexity({}));
}

TEST_CASE("poisson probability under an averaged rate") {
    const double mu = 1.7;
    for (std::int64_t y : {0LL, 1LL, 2LL, 5LL}) {
        double fact = 1.0;
        for (std::int64_t k = 2; k <= y; ++k) fact *= static_cast<double>(k);
        const double expected = std::exp(-mu) * std::pow(mu, static_cast<double>(y)) / fact;
        CHECK(poisson_probability(y, mu) == doctest::Approx(expected).epsilon(1e-12));
    }
    CHECK(poisson_probability(0, 0.0) == 1.0);
    CHECK(poisson_probability(2, 0.0) == 0.0);
    CHECK_THROWS(poisson_probability(1, -0.5));
}

TEST_CASE("strong generalization scores held-out cells for every model") {
    // quick smoke run on a small simulated tensor
    ModelDims dims{8, 3, 6, 2, 2, 1};
    Hyperparams hyper{1.0, 1.5};
    RngStream rng(44);
    auto gen = sample_prior(dims, hyper, rng);
    auto tensor = simulate(gen, rng);
    if (tensor.total() < 50) {
        // rare low-activity draw: rescale the core for a denser tensor
        for (auto& x : gen.core) x *= 50.0;
        tensor = simulate(gen, rng);
    }
    auto split = split_train_test(tensor, 3);
    auto mask = mask_top_active(tensor, 3, false);

    EvalProtocol protocol;
    protocol.train_sweeps = 30;
    protocol.test_sweeps = 20;
    protocol.test_burnin = 10;
    protocol.save_every = 2;
    for (ModelKind model : {ModelKind::BPTD, ModelKind::BPTF, ModelKind::GPIRM, ModelKind::DCGPIRM}) {
        auto result = strong_generalization(split.train, split.test, mask, model, 2, 2, 1, hyper, protocol, 5);
        CHECK(result.inverse_perplexity > 0.0);
        CHECK(result.inverse_perplexity <= 1.0);
        for (const auto& cell : result.cells) {
            CHECK(cell.mean_rate > 0.0);
            CHECK(cell.probability > 0.0);
            CHECK(cell.probability <= 1.0);
        }
        // zero cells are scored: there must be more cells than nonzero test entries
        CHECK(result.cells.size() ==
              static_cast<std::size_t>(mask.held_dyads()) * static_cast<std::size_t>(split.test.num_actions()) *
                  static_cast<std::size_t>(split.test.num_steps()));
    }

    // empty held-out set is an error
    HeldOutMask empty(tensor.num_countries(),
                      std::vector<std::uint8_t>(static_cast<std::size_t>(tensor.num_countries()) *
                                                    tensor.num_countries(),
                                                0));
    CHECK_THROWS(strong_generalization(split.train, split.test, empty, ModelKind::BPTD, 2, 2, 1, hyper,
                                       protocol, 5));
}

TEST_CASE("compare_models rescales within each mask and is seed-deterministic") {
    ModelDims dims{6, 2, 5, 2, 1, 1};
    Hyperparams hyper{1.0, 1.0};
    RngStream rng(55);
    auto gen = sample_prior(dims, hyper, rng);
    for (auto& x : gen.core) x *= 20.0;
    auto tensor = simulate(gen, rng);

    EvalProtocol protocol;
    protocol.train_sweeps = 20;
    protocol.test_sweeps = 10;
    protocol.test_burnin = 5;
    protocol.save_every = 1;

    std::vector<std::pair<std::string, HeldOutMask>> masks = {
        {"top", mask_top_active(tensor, 2, false)}};
    {
        auto rows = compare_models(tensor, masks, {ModelKind::BPTD}, {3}, 2, 1, 1, hyper, protocol, 2);
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].scaled == doctest::Approx(1.0).epsilon(1e-12));
    }
    {
        auto rows = compare_models(tensor, masks, {ModelKind::GPIRM, ModelKind::GPIRM}, {3}, 2, 1, 1, hyper,
                                   protocol, 2);
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].inverse_perplexity == rows[1].inverse_perplexity);
    }
    CHECK_THROWS(compare_models(tensor, masks, {}, {1}, 2, 1, 1, hyper, protocol, 2));
}
