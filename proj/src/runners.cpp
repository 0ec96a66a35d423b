#include "bptd/runners.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "bptd/checkpoint.hpp"
#include "bptd/geweke.hpp"

namespace bptd {

double resolve_gamma0(int C, int K, int R, double product_target) {
    if (C < 1 || K < 1 || R < 1 || !(product_target > 0.0)) {
        throw std::invalid_argument("resolve_gamma0: positive arguments required");
    }
    return std::pow(product_target * static_cast<double>(C) * C * K * R, 0.25);
}

double RunConfig::resolved_gamma0() const {
    return gamma0 > 0.0 ? gamma0 : resolve_gamma0(C, K, R, gamma0_target);
}

AllocationMode RunConfig::allocation_mode() const {
    if (alloc == "joint") return AllocationMode::Joint;
    if (alloc == "compositional") return AllocationMode::Compositional;
    throw std::invalid_argument("unknown allocation mode '" + alloc + "'");
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    return out;
}

void write_vocab(const std::string& path, const Vocabulary& vocab) {
    auto out = open_out(path);
    for (const auto& label : vocab.labels()) out << label << '\n';
}

std::vector<std::string> load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open label file " + path);
    std::vector<std::string> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        labels.push_back(line);
    }
    return labels;
}

}  // namespace

void run_ingest(const RunConfig& config) {
    ParseOptions options;
    options.binning = (config.binning == "integer") ? TimeBinning::Integer : TimeBinning::Monthly;
    options.anchor_month = config.anchor;
    options.strict = config.strict;
    options.canonicalize_vocab = config.canonical;
    ParsedEvents events = parse_events_file(config.data, options);
    CountTensor tensor = build_tensor(events.tokens, events.countries.size(), events.actions.size(),
                                      static_cast<int>(events.num_time_steps));
    auto out = open_out(config.out);
    tensor.dump_tsv(out);
    write_vocab(config.out + ".countries.tsv", events.countries);
    write_vocab(config.out + ".actions.tsv", events.actions);
    std::cout << "lines\t" << events.report.lines << "\nparsed\t" << events.report.parsed << "\nself_loops\t"
              << events.report.self_loops << "\nmalformed\t" << events.report.malformed << "\ncomments\t"
              << events.report.comments << "\ncountries\t" << events.countries.size() << "\nactions\t"
              << events.actions.size() << "\ntime_steps\t" << events.num_time_steps << "\ntokens\t"
              << tensor.total() << '\n';
}

void run_simulate(const RunConfig& config) {
    RngStream rng(config.seed);
    BPTDState state;
    if (!config.state_path.empty()) {
        state = bptd_from_checkpoint(read_checkpoint(config.state_path));
    } else {
        ModelDims dims{config.V, config.A, config.T, config.C, config.K, config.R};
        Hyperparams hyper{config.eps0, config.resolved_gamma0()};
        state = sample_prior(dims, hyper, rng);
    }
    const double expected_tokens = total_rate(state);
    if (expected_tokens > 1e7) {
        std::cerr << "warning: expected token count is about " << expected_tokens
                  << "; prior states can be extreme, consider another seed or a saved state\n";
    }
    CountTensor tensor = simulate(state, rng);
    auto out = open_out(config.out);
    tensor.dump_tsv(out);
    if (config.state_path.empty()) {
        write_checkpoint(config.out + ".state.ckpt", to_checkpoint(state));
    }
    std::cerr << "simulated " << tensor.total() << " tokens over " << tensor.num_entries()
              << " nonzero cells\n";
}

namespace {

EffectiveDims bptf_effective(const BPTFState& state, double threshold) {
    double max_w = 0.0;
    for (double w : state.lambda) max_w = std::max(max_w, w);
    EffectiveDims eff;
    for (double w : state.lambda) {
        if (w > threshold * max_w) ++eff.c_eff;
    }
    return eff;
}

EffectiveDims gpirm_effective(const GPIRMState& state) {
    auto distinct = [](const std::vector<int>& z, int bound) {
        std::vector<char> seen(static_cast<std::size_t>(bound), 0);
        int n = 0;
        for (int v : z) {
            if (!seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = 1;
                ++n;
            }
        }
        return n;
    };
    EffectiveDims eff;
    eff.c_eff = distinct(state.z_country, state.dims.C);
    eff.k_eff = distinct(state.z_action, state.dims.K);
    eff.r_eff = distinct(state.z_time, state.dims.R);
    return eff;
}

Checkpoint bptf_to_checkpoint(const BPTFState& state) {
    Checkpoint ckpt;
    ckpt.model_tag = "bptf";
    ckpt.dims = ModelDims{state.V, state.A, state.T, state.Q, 1, 1};
    ckpt.arrays = {
        {"theta_send", state.theta_send},
        {"theta_recv", state.theta_recv},
        {"phi", state.phi},
        {"psi", state.psi},
        {"lambda", state.lambda},
        {"scalars", {state.zeta, state.hyper.eps0, state.hyper.gamma0}},
    };
    return ckpt;
}

Checkpoint gpirm_to_checkpoint(const GPIRMState& state) {
    Checkpoint ckpt;
    ckpt.model_tag = state.degree_corrected ? "dcgpirm" : "gpirm";
    ckpt.dims = state.dims;
    auto as_doubles = [](const std::vector<int>& z) {
        std::vector<double> out(z.size());
        for (std::size_t n = 0; n < z.size(); ++n) out[n] = static_cast<double>(z[n]);
        return out;
    };
    ckpt.arrays = {
        {"z_country", as_doubles(state.z_country)},
        {"z_action", as_doubles(state.z_action)},
        {"z_time", as_doubles(state.z_time)},
        {"core", state.core},
        {"deg_country", state.deg_country},
        {"deg_action", state.deg_action},
        {"deg_time", state.deg_time},
        {"scalars", {state.hyper.eps0, state.hyper.gamma0}},
    };
    return ckpt;
}

}  // namespace

void run_fit(const RunConfig& config) {
    CountTensor tensor = CountTensor::load_tsv_file(config.data);
    RngStream rng(config.seed);
    Hyperparams hyper{config.eps0, config.resolved_gamma0()};
    auto trace = open_out(config.out + ".trace.tsv");
    trace << trace_header() << '\n';
    trace.precision(17);

    const long long sweeps = config.sweeps;
    auto should_trace = [&](long long s) {
        return s % config.save_every == 0 || s == sweeps;
    };

    if (config.model == "bptd") {
        ModelDims dims{tensor.num_countries(), tensor.num_actions(), tensor.num_steps(), config.C, config.K,
                       config.R};
        BPTDState state = sample_prior(dims, hyper, rng);
        auto tokens = tokens_from_tensor(tensor);
        std::vector<TokenAssignment> assignments;
        init_assignments_uniform(dims, tokens.size(), assignments, rng);
        SweepOptions options;
        options.alloc = config.allocation_mode();
        options.workers = config.workers;
        for (long long s = 1; s <= sweeps; ++s) {
            gibbs_sweep(state, tokens, assignments, rng, options);
            if (should_trace(s)) {
                trace << trace_row("bptd", s, log_likelihood(state, tensor), effective_dims(state),
                                   state.delta, state.zeta)
                      << '\n';
            }
        }
        write_checkpoint(config.out + ".ckpt", to_checkpoint(state));
    } else if (config.model == "bptf") {
        const int Q = bptf_q_for_parity(tensor.num_countries(), tensor.num_actions(), tensor.num_steps(),
                                        config.C, config.K, config.R);
        BPTFState state =
            bptf_sample_prior(tensor.num_countries(), tensor.num_actions(), tensor.num_steps(), Q, hyper, rng);
        auto tokens = tokens_from_tensor(tensor);
        std::vector<std::uint16_t> assignments;
        for (long long s = 1; s <= sweeps; ++s) {
            bptf_sweep(state, tokens, assignments, rng);
            if (should_trace(s)) {
                trace << trace_row("bptf", s, bptf_log_likelihood(state, tensor),
                                   bptf_effective(state, config.eff_threshold), 0.0, state.zeta)
                      << '\n';
            }
        }
        write_checkpoint(config.out + ".ckpt", bptf_to_checkpoint(state));
    } else if (config.model == "gpirm" || config.model == "dcgpirm") {
        ModelDims dims{tensor.num_countries(), tensor.num_actions(), tensor.num_steps(), config.C, config.K,
                       config.R};
        GPIRMState state = gpirm_sample_prior(dims, hyper, config.model == "dcgpirm", rng);
        for (long long s = 1; s <= sweeps; ++s) {
            gpirm_sweep(state, tensor, rng);
            if (should_trace(s)) {
                trace << trace_row(config.model, s, gpirm_log_likelihood(state, tensor),
                                   gpirm_effective(state), 0.0, 0.0)
                      << '\n';
            }
        }
        write_checkpoint(config.out + ".ckpt", gpirm_to_checkpoint(state));
    } else {
        throw std::invalid_argument("unknown model '" + config.model + "'");
    }
}

void run_evaluate(const RunConfig& config) {
    CountTensor tensor = CountTensor::load_tsv_file(config.data);
    Hyperparams hyper{config.eps0, config.resolved_gamma0()};
    EvalProtocol protocol;
    protocol.train_sweeps = config.train_sweeps;
    protocol.test_sweeps = config.test_sweeps;
    protocol.test_burnin = config.test_burnin;
    protocol.save_every = config.save_every;
    protocol.alloc = config.allocation_mode();
    protocol.workers = config.workers;
    protocol.include_zero_cells = config.score_zero_cells;

    std::vector<std::pair<std::string, HeldOutMask>> masks;
    if (config.mask == "top15" || config.mask == "both") {
        masks.emplace_back("top15", mask_top_active(tensor, config.mask_n, false));
    }
    if (config.mask == "inverse-top15" || config.mask == "both") {
        masks.emplace_back("inverse-top15", mask_top_active(tensor, config.mask_n, true));
    }
    if (masks.empty()) throw std::invalid_argument("unknown mask '" + config.mask + "'");

    std::vector<ModelKind> models;
    if (config.models.empty()) {
        models.push_back(model_from_name(config.model));
    } else {
        for (const auto& name : config.models) models.push_back(model_from_name(name));
    }
    std::vector<std::uint64_t> seeds = config.seeds.empty() ? std::vector<std::uint64_t>{config.seed}
                                                            : config.seeds;

    auto rows = compare_models(tensor, masks, models, seeds, config.C, config.K, config.R, hyper, protocol,
                               config.holdout_steps);
    std::ostringstream table;
    table << comparison_header() << '\n';
    for (const auto& row : rows) table << comparison_row_tsv(row) << '\n';
    std::cout << table.str();
    if (!config.out.empty()) {
        auto out = open_out(config.out);
        out << table.str();
    }
}

void run_benchmark_alloc(const RunConfig& config) {
    struct GridPoint {
        int C, K, R;
    };
    const std::vector<GridPoint> grid = {{5, 2, 2}, {20, 6, 3}, {50, 8, 3}, {50, 10, 5}};
    const int n_tokens = 2000;
    const int V = 40, A = 10, T = 6;
    RngStream rng(config.seed);

    std::cout << "C\tK\tR\tjoint_classes\tcompositional_weights\tcost_ratio\tt_joint_ms\tt_comp_ms\t"
                 "wall_ratio\tt_comp_parallel_ms\tworkers\n";
    for (const auto& point : grid) {
        ModelDims dims{V, A, T, point.C, point.K, point.R};
        Hyperparams hyper{1.0, resolve_gamma0(point.C, point.K, point.R)};
        BPTDState state = sample_prior(dims, hyper, rng);
        std::vector<Token> tokens(static_cast<std::size_t>(n_tokens));
        for (auto& tok : tokens) {
            tok.i = static_cast<std::uint32_t>(rng.uniform() * V);
            tok.j = static_cast<std::uint32_t>(rng.uniform() * V);
            if (tok.j == tok.i) tok.j = (tok.j + 1) % V;
            tok.a = static_cast<std::uint32_t>(rng.uniform() * A);
            tok.t = static_cast<std::uint32_t>(rng.uniform() * T);
            tok.i = std::min(tok.i, static_cast<std::uint32_t>(V - 1));
            tok.a = std::min(tok.a, static_cast<std::uint32_t>(A - 1));
            tok.t = std::min(tok.t, static_cast<std::uint32_t>(T - 1));
        }
        AllocationCost cost = allocation_cost(dims);

        std::vector<TokenAssignment> assignments;
        auto time_ms = [](auto&& fn) {
            const auto start = std::chrono::steady_clock::now();
            fn();
            const auto stop = std::chrono::steady_clock::now();
            return std::chrono::duration<double, std::milli>(stop - start).count();
        };
        // Warm-up plus timed passes; compositional gets extra reps for stable numbers.
        allocate_joint(state, tokens, assignments, rng);
        const double t_joint = time_ms([&] { allocate_joint(state, tokens, assignments, rng); });
        init_assignments_uniform(dims, tokens.size(), assignments, rng);
        allocate_compositional(state, tokens, assignments, rng);
        const int comp_reps = 20;
        const double t_comp = time_ms([&] {
                                  for (int rep = 0; rep < comp_reps; ++rep) {
                                      allocate_compositional(state, tokens, assignments, rng);
                                  }
                              }) /
                              comp_reps;
        const int workers = std::max(config.workers, 2);
        const double t_comp_par = time_ms([&] {
                                      for (int rep = 0; rep < comp_reps; ++rep) {
                                          allocate_compositional_parallel(state, tokens, assignments, rng,
                                                                          workers);
                                      }
                                  }) /
                                  comp_reps;
        std::cout << point.C << '\t' << point.K << '\t' << point.R << '\t' << cost.joint_classes << '\t'
                  << cost.compositional_weights << '\t' << cost.ratio << '\t' << t_joint << '\t' << t_comp
                  << '\t' << (t_joint / t_comp) << '\t' << t_comp_par << '\t' << workers << '\n';
    }
    std::cerr << "note: cost_ratio counts enumerated classes vs per-coordinate weights; other\n"
                 "op-counting conventions give different constants for the same dims.\n";
}

void run_export(const RunConfig& config) {
    Checkpoint ckpt = read_checkpoint(config.state_path.empty() ? config.data : config.state_path);
    BPTDState state = bptd_from_checkpoint(ckpt);
    const ModelDims& m = state.dims;

    std::vector<std::string> country_labels, action_labels;
    if (!config.labels_countries.empty()) country_labels = load_labels(config.labels_countries);
    if (!config.labels_actions.empty()) action_labels = load_labels(config.labels_actions);

    auto label_or_index = [](const std::vector<std::string>& labels, int idx) {
        return idx < static_cast<int>(labels.size()) ? labels[static_cast<std::size_t>(idx)]
                                                     : std::to_string(idx);
    };

    {
        auto out = open_out(config.out + ".theta.tsv");
        out.precision(10);
        for (int i = 0; i < m.V; ++i) {
            out << label_or_index(country_labels, i);
            for (int c = 0; c < m.C; ++c) out << '\t' << state.theta_at(i, c);
            out << '\n';
        }
    }
    {
        auto out = open_out(config.out + ".phi.tsv");
        out.precision(10);
        for (int a = 0; a < m.A; ++a) {
            out << label_or_index(action_labels, a);
            for (int k = 0; k < m.K; ++k) out << '\t' << state.phi_at(a, k);
            out << '\n';
        }
    }
    {
        auto out = open_out(config.out + ".psi.tsv");
        out.precision(10);
        for (int t = 0; t < m.T; ++t) {
            out << t;
            for (int r = 0; r < m.R; ++r) out << '\t' << state.psi_at(t, r);
            out << '\n';
        }
    }
    {
        auto out = open_out(config.out + ".core.tsv");
        out.precision(10);
        out << "c\td\tk\tr\tvalue\n";
        for (int c = 0; c < m.C; ++c) {
            for (int d = 0; d < m.C; ++d) {
                for (int k = 0; k < m.K; ++k) {
                    for (int r = 0; r < m.R; ++r) {
                        out << c << '\t' << d << '\t' << k << '\t' << r << '\t' << state.core_at(c, d, k, r)
                            << '\n';
                    }
                }
            }
        }
    }
    // Per-topic community-community interaction networks, one file per (k, r).
    for (int k = 0; k < m.K; ++k) {
        for (int r = 0; r < m.R; ++r) {
            std::ostringstream name;
            name << config.out << ".network.k" << k << ".r" << r << ".tsv";
            auto out = open_out(name.str());
            out.precision(10);
            for (int c = 0; c < m.C; ++c) {
                for (int d = 0; d < m.C; ++d) {
                    out << state.core_at(c, d, k, r) << (d + 1 < m.C ? '\t' : '\n');
                }
            }
        }
    }
    {
        EffectiveDims eff = effective_dims(state, config.eff_threshold);
        auto out = open_out(config.out + ".effective_dims.tsv");
        out.precision(10);
        out << "threshold\t" << config.eff_threshold << "\nc_eff\t" << eff.c_eff << "\nk_eff\t" << eff.k_eff
            << "\nr_eff\t" << eff.r_eff << '\n';
        out << "eta_between";
        for (double w : state.eta_between) out << '\t' << w;
        out << "\nnu";
        for (double w : state.nu) out << '\t' << w;
        out << "\nrho";
        for (double w : state.rho) out << '\t' << w;
        out << '\n';
    }
}

void run_geweke(const RunConfig& config) {
    RngStream rng(config.seed);
    GewekeConfig gconfig;
    gconfig.n_samples = config.geweke_samples;
    gconfig.thin = config.geweke_thin;
    // Light-tailed hypers and a small per-cell exposure keep the tracked
    // statistics well behaved and the chain's autocorrelation time short.
    Hyperparams hyper{config.geweke_eps0, config.geweke_gamma0};
    ModelDims dims{3, 2, 2, 2, 2, 2};

    GewekeResult result;
    if (config.model == "bptd") {
        UpdateOptions update;
        update.theta_shape_perturb = config.geweke_broken ? 1.0 : 0.0;
        result = geweke_bptd(dims, hyper, gconfig, rng, update);
    } else if (config.model == "bptf") {
        result = geweke_bptf(dims.V, dims.A, dims.T, 3, hyper, gconfig, rng);
    } else if (config.model == "gpirm") {
        result = geweke_gpirm(dims, hyper, false, gconfig, rng);
    } else if (config.model == "dcgpirm") {
        result = geweke_gpirm(dims, hyper, true, gconfig, rng);
    } else {
        throw std::invalid_argument("unknown model '" + config.model + "'");
    }
    std::cout << "statistic\tforward_mean\tchain_mean\tz\n";
    std::cout.precision(8);
    for (const auto& stat : result.stats) {
        std::cout << stat.name << '\t' << stat.forward_mean << '\t' << stat.chain_mean << '\t' << stat.z
                  << '\n';
    }
    std::cout << "max_abs_z\t\t\t" << result.max_abs_z() << '\n';
}

}  // namespace bptd
