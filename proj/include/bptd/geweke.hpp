#pragma once

#include <string>
#include <vector>

#include "bptd/gibbs.hpp"

namespace bptd {

struct GewekeStat {
    std::string name;
    double forward_mean = 0.0;
    double forward_se = 0.0;
    double chain_mean = 0.0;
    double chain_se = 0.0;
    double z = 0.0;
};

struct GewekeResult {
    std::vector<GewekeStat> stats;
    double max_abs_z() const;
};

struct GewekeConfig {
    int n_samples = 10000;  // recorded per side
    int thin = 5;           // chain sweeps between recorded samples
    int batches = 100;      // batch-means SE for the chain side
};

/// Joint-distribution sampler check: marginal-conditional (prior + simulate)
/// draws vs successive-conditional draws (sweep, then re-simulate the data).
/// A correct sampler gives z-scores of order 1 on every tracked statistic.
GewekeResult geweke_bptd(const ModelDims& dims, const Hyperparams& hyper, const GewekeConfig& config,
                         RngStream& rng, const UpdateOptions& update = {});

/// Mean/SE/z bookkeeping shared by the baseline harnesses.
GewekeResult geweke_compare(const std::vector<std::string>& names,
                            const std::vector<std::vector<double>>& forward,
                            const std::vector<std::vector<double>>& chain, int batches);

}  // namespace bptd
