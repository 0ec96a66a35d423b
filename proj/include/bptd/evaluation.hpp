#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bptd/baselines.hpp"
#include "bptd/gibbs.hpp"
#include "bptd/model.hpp"

namespace bptd {

/// Dyad-level held-out mask: a held dyad is held for every action and every
/// test step. Held and observed dyads partition all i != j pairs.
class HeldOutMask {
  public:
    HeldOutMask() = default;
    HeldOutMask(int V, std::vector<std::uint8_t> held) : V_(V), held_(std::move(held)) {}

    bool is_held(int i, int j) const { return held_[static_cast<std::size_t>(i) * V_ + j] != 0; }
    int num_countries() const { return V_; }
    std::int64_t held_dyads() const;
    HeldOutMask inverted() const;

  private:
    int V_ = 0;
    std::vector<std::uint8_t> held_;  // V*V, diagonal ignored
};

/// Temporal split: train keeps steps 0..T-holdout-1, test holds the last
/// `holdout_steps` steps rebased to 0. Throws unless T > holdout_steps.
struct TrainTestSplit {
    CountTensor train;
    CountTensor test;
};
TrainTestSplit split_train_test(const CountTensor& tensor, int holdout_steps = 3);

/// Rank countries by total token involvement (sender plus receiver) and hold
/// out every dyad touching one of the top n (ties broken by index); invert
/// holds the complement instead.
HeldOutMask mask_top_active(const CountTensor& tensor, int n = 15, bool invert = false);

struct PredictionResult {
    struct Cell {
        std::uint32_t i, j, a, t;
        std::int64_t observed;
        double mean_rate;
        double probability;
    };
    std::vector<Cell> cells;
    double inverse_perplexity = 0.0;
};

enum class ModelKind { BPTD, BPTF, GPIRM, DCGPIRM };
const char* model_name(ModelKind kind);
ModelKind model_from_name(const std::string& name);

struct EvalProtocol {
    int train_sweeps = 5000;
    int test_sweeps = 1000;
    int test_burnin = 500;   // test samples saved every save_every after this
    int save_every = 10;
    AllocationMode alloc = AllocationMode::Compositional;
    int workers = 1;
    bool include_zero_cells = true;  // score zero cells under held dyads
};

/// Strong generalization: fit on the training tensor, clamp everything but
/// the time-step factors, infer those on the observed portion of the test
/// tensor, average the held-out Poisson rates across saved samples, and score
/// each held-out element by its Poisson probability under the averaged rate.
PredictionResult strong_generalization(const CountTensor& train, const CountTensor& test,
                                       const HeldOutMask& mask, ModelKind model, int C, int K, int R,
                                       const Hyperparams& hyper, const EvalProtocol& protocol,
                                       std::uint64_t seed);

struct ComparisonRow {
    ModelKind model;
    std::string mask_name;
    std::uint64_t seed;
    double inverse_perplexity = 0.0;
    double scaled = 0.0;  // rescaled to (0, 1] within each mask
    double wall_seconds = 0.0;
};

/// One run per (model, mask, seed); rescales inverse perplexities within each
/// mask by the best value.
std::vector<ComparisonRow> compare_models(const CountTensor& tensor,
                                          const std::vector<std::pair<std::string, HeldOutMask>>& masks,
                                          const std::vector<ModelKind>& models,
                                          const std::vector<std::uint64_t>& seeds, int C, int K, int R,
                                          const Hyperparams& hyper, const EvalProtocol& protocol,
                                          int holdout_steps = 3);

std::string comparison_header();
std::string comparison_row_tsv(const ComparisonRow& row);

/// Geometric mean of element probabilities, exp(mean log p).
double inverse_perplexity(const std::vector<double>& probabilities);

/// Poisson pmf at an averaged rate: exp(-mu) mu^y / y!.
double poisson_probability(std::int64_t observed, double mean_rate);

}  // namespace bptd
