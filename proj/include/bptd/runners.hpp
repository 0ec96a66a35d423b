#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bptd/evaluation.hpp"

namespace bptd {

/// gamma0 such that (gamma0/C)^2 (gamma0/K)(gamma0/R) equals the target.
double resolve_gamma0(int C, int K, int R, double product_target = 0.01);

struct RunConfig {
    std::string data;        // tensor dump (fit/evaluate) or event TSV (ingest)
    std::string out;         // output path or prefix
    std::string state_path;  // checkpoint (simulate/export)
    std::string model = "bptd";
    int C = 20, K = 6, R = 3;
    int V = 10, A = 5, T = 6;  // simulate-from-prior dims
    double eps0 = 0.1;
    double gamma0 = 0.0;  // 0: resolve from gamma0_target
    double gamma0_target = 0.01;
    long long sweeps = 1000;
    int save_every = 10;
    std::uint64_t seed = 1;
    std::string alloc = "compositional";
    int workers = 1;
    // ingest
    std::string binning = "monthly";
    std::string anchor;
    bool strict = false;
    bool canonical = false;
    // evaluate
    std::string mask = "top15";
    int mask_n = 15;
    int holdout_steps = 3;
    int train_sweeps = 5000;
    int test_sweeps = 1000;
    int test_burnin = 500;
    std::vector<std::uint64_t> seeds;  // evaluate: one run per seed
    std::vector<std::string> models;   // evaluate: models to compare
    bool score_zero_cells = true;
    // geweke
    int geweke_samples = 10000;
    int geweke_thin = 150;
    bool geweke_broken = false;
    double geweke_eps0 = 10.0;
    double geweke_gamma0 = 0.8;
    // export
    std::string labels_countries;
    std::string labels_actions;
    double eff_threshold = 0.05;

    double resolved_gamma0() const;
    AllocationMode allocation_mode() const;
};

void run_ingest(const RunConfig& config);
void run_simulate(const RunConfig& config);
void run_fit(const RunConfig& config);
void run_evaluate(const RunConfig& config);
void run_benchmark_alloc(const RunConfig& config);
void run_export(const RunConfig& config);
void run_geweke(const RunConfig& config);

}  // namespace bptd
