#include <cstdlib>
#include <iostream>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>

#include "bptd/runners.hpp"

namespace {

// Exit codes: 0 success, 2 usage, 3 data error, 4 numerical failure.
constexpr int kUsageError = 2;
constexpr int kDataError = 3;
constexpr int kNumericalError = 4;

int default_workers() {
    if (const char* env = std::getenv("BPTD_WORKERS")) {
        const int w = std::atoi(env);
        if (w >= 1) return w;
    }
    return 1;
}

void split_csv_u64(const std::string& text, std::vector<std::uint64_t>& out) {
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t comma = text.find(',', start);
        if (comma == std::string::npos) comma = text.size();
        out.push_back(std::stoull(text.substr(start, comma - start)));
        start = comma + 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian Poisson Tucker decomposition for dyadic event tensors"};
    app.require_subcommand(1);
    app.set_config("--config");

    bptd::RunConfig config;
    config.workers = default_workers();
    std::string dims_text, latent_text, seeds_text, models_text;

    auto add_latent = [&](CLI::App* cmd) {
        cmd->add_option("--dims", latent_text, "latent dims C,K,R (e.g. 20,6,3)");
        cmd->add_option("--eps0", config.eps0, "gamma hyperparameter eps0");
        cmd->add_option("--gamma0", config.gamma0, "gamma0 (default: resolved from --gamma0-target)");
        cmd->add_option("--gamma0-target", config.gamma0_target, "core sparsity product target");
    };
    auto add_seed = [&](CLI::App* cmd) { cmd->add_option("--seed", config.seed, "random seed"); };

    auto* ingest = app.add_subcommand("ingest", "parse an event TSV into a count tensor dump");
    ingest->add_option("--data", config.data, "event TSV path")->required();
    ingest->add_option("--out", config.out, "tensor dump path")->required();
    ingest->add_option("--binning", config.binning, "monthly or integer time binning");
    ingest->add_option("--anchor", config.anchor, "anchor month YYYY-MM for monthly binning");
    ingest->add_flag("--strict", config.strict, "abort on malformed lines");
    ingest->add_flag("--canonical", config.canonical, "lexicographic vocabulary order");

    auto* simulate = app.add_subcommand("simulate", "forward-sample a count tensor");
    simulate->add_option("--out", config.out, "tensor dump path")->required();
    simulate->add_option("--state", config.state_path, "checkpoint to simulate from (default: prior draw)");
    simulate->add_option("--data-dims", dims_text, "data dims V,A,T for prior draws");
    add_latent(simulate);
    add_seed(simulate);

    auto* fit = app.add_subcommand("fit", "run Gibbs sweeps, writing a trace and checkpoint");
    fit->add_option("--data", config.data, "tensor dump path")->required();
    fit->add_option("--out", config.out, "output prefix")->required();
    fit->add_option("--model", config.model, "bptd, bptf, gpirm, or dcgpirm");
    fit->add_option("--sweeps", config.sweeps, "number of Gibbs sweeps");
    fit->add_option("--save-every", config.save_every, "trace cadence");
    fit->add_option("--alloc", config.alloc, "joint or compositional allocation");
    fit->add_option("--workers", config.workers, "worker count for within-sweep allocation");
    add_latent(fit);
    add_seed(fit);

    auto* evaluate = app.add_subcommand("evaluate", "held-out predictive comparison");
    evaluate->add_option("--data", config.data, "tensor dump path")->required();
    evaluate->add_option("--out", config.out, "comparison table path");
    evaluate->add_option("--model", models_text, "comma-separated models to compare");
    evaluate->add_option("--mask", config.mask, "top15, inverse-top15, or both");
    evaluate->add_option("--mask-n", config.mask_n, "countries in the active set");
    evaluate->add_option("--holdout-steps", config.holdout_steps, "test window length");
    evaluate->add_option("--train-sweeps", config.train_sweeps, "training sweeps");
    evaluate->add_option("--test-sweeps", config.test_sweeps, "clamp-and-infer sweeps");
    evaluate->add_option("--test-burnin", config.test_burnin, "test sweeps before saving");
    evaluate->add_option("--save-every", config.save_every, "test sample cadence");
    evaluate->add_option("--seeds", seeds_text, "comma-separated seeds");
    evaluate->add_option("--alloc", config.alloc, "joint or compositional allocation");
    evaluate->add_option("--workers", config.workers, "worker count");
    evaluate->add_flag("!--no-zero-cells", config.score_zero_cells, "score only nonzero held-out cells");
    add_latent(evaluate);
    add_seed(evaluate);

    auto* bench = app.add_subcommand("benchmark-alloc", "allocation cost table and wall-clock ratios");
    bench->add_option("--workers", config.workers, "worker count for the parallel column");
    add_seed(bench);

    auto* exp = app.add_subcommand("export", "write factor matrices and network slices from a checkpoint");
    exp->add_option("--state", config.state_path, "checkpoint path")->required();
    exp->add_option("--out", config.out, "output prefix")->required();
    exp->add_option("--labels-countries", config.labels_countries, "country label file");
    exp->add_option("--labels-actions", config.labels_actions, "action label file");
    exp->add_option("--threshold", config.eff_threshold, "effective-dimension threshold fraction");

    auto* geweke = app.add_subcommand("geweke", "joint-distribution sampler validation");
    geweke->add_option("--model", config.model, "bptd, bptf, gpirm, or dcgpirm");
    geweke->add_option("--samples", config.geweke_samples, "recorded samples per side");
    geweke->add_option("--thin", config.geweke_thin, "chain sweeps between samples");
    geweke->add_flag("--broken", config.geweke_broken, "run the deliberately broken control");
    geweke->add_option("--eps0", config.geweke_eps0, "harness gamma hyperparameter eps0");
    geweke->add_option("--gamma0", config.geweke_gamma0, "harness gamma0");
    add_seed(geweke);

    CLI11_PARSE(app, argc, argv);

    try {
        if (!dims_text.empty()) {
            if (std::sscanf(dims_text.c_str(), "%d,%d,%d", &config.V, &config.A, &config.T) != 3) {
                std::cerr << "bad --data-dims '" << dims_text << "'\n";
                return kUsageError;
            }
        }
        if (!latent_text.empty()) {
            if (std::sscanf(latent_text.c_str(), "%d,%d,%d", &config.C, &config.K, &config.R) != 3) {
                std::cerr << "bad --dims '" << latent_text << "'\n";
                return kUsageError;
            }
        }
        if (!seeds_text.empty()) split_csv_u64(seeds_text, config.seeds);
        if (!models_text.empty()) {
            std::size_t start = 0;
            while (start < models_text.size()) {
                std::size_t comma = models_text.find(',', start);
                if (comma == std::string::npos) comma = models_text.size();
                config.models.push_back(models_text.substr(start, comma - start));
                start = comma + 1;
            }
        }

        if (app.got_subcommand(ingest)) {
            bptd::run_ingest(config);
        } else if (app.got_subcommand(simulate)) {
            bptd::run_simulate(config);
        } else if (app.got_subcommand(fit)) {
            bptd::run_fit(config);
        } else if (app.got_subcommand(evaluate)) {
            bptd::run_evaluate(config);
        } else if (app.got_subcommand(bench)) {
            bptd::run_benchmark_alloc(config);
        } else if (app.got_subcommand(exp)) {
            bptd::run_export(config);
        } else if (app.got_subcommand(geweke)) {
            bptd::run_geweke(config);
        }
    } catch (const std::invalid_argument& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kNumericalError;
    } catch (const std::domain_error& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kNumericalError;
    } catch (const std::out_of_range& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kDataError;
    } catch (const std::runtime_error& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kDataError;
    }
    return 0;
}
