#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "blockrec/algorithms.hpp"
#include "blockrec/eval.hpp"
#include "blockrec/io.hpp"
#include "blockrec/rng.hpp"
#include "blockrec/synthetic.hpp"

using namespace blockrec;

namespace {

struct FormatOptions {
    std::string delimiter = "\t";
    std::size_t col_user = 0, col_item = 1, col_rating = 2;
    std::size_t skip_lines = 0;
    std::vector<double> scale_values;  // empty -> auto-infer
};

void add_format_flags(CLI::App* cmd, FormatOptions& fmt) {
    cmd->add_option("--delim", fmt.delimiter, "Field delimiter (single char, default tab)");
    cmd->add_option("--col-user", fmt.col_user, "Zero-based user column");
    cmd->add_option("--col-item", fmt.col_item, "Zero-based item column");
    cmd->add_option("--col-rating", fmt.col_rating, "Zero-based rating column");
    cmd->add_option("--skip-lines", fmt.skip_lines, "Header lines to skip");
    cmd->add_option("--scale", fmt.scale_values,
                    "Explicit rating scale values (default: inferred from data)");
}

io::DatasetSpec make_spec(const std::string& path, const FormatOptions& fmt) {
    io::DatasetSpec spec;
    spec.path = path;
    if (fmt.delimiter.size() != 1)
        throw CLI::ValidationError("--delim must be a single character");
    spec.delimiter = fmt.delimiter[0];
    spec.col_user = fmt.col_user;
    spec.col_item = fmt.col_item;
    spec.col_rating = fmt.col_rating;
    spec.skip_lines = fmt.skip_lines;
    if (!fmt.scale_values.empty()) spec.scale = RatingScale(fmt.scale_values);
    return spec;
}

io::Dataset load_dataset(const std::string& path, const FormatOptions& fmt) {
    auto ds = io::parse_dataset(make_spec(path, fmt));
    if (ds.n_duplicates)
        std::cerr << "warning: " << ds.n_duplicates
                  << " duplicate (user,item) pairs resolved last-wins\n";
    return ds;
}

std::uint32_t lookup_id(const std::vector<std::string>& ids, const std::string& raw,
                        bool* cold) {
    for (std::uint32_t j = 0; j < ids.size(); ++j)
        if (ids[j] == raw) return j;
    *cold = true;
    return static_cast<std::uint32_t>(ids.size());
}

std::vector<std::pair<std::string, std::string>> read_queries(const std::string& path,
                                                              char delim) {
    std::ifstream in(path);
    if (!in) throw io::ParseError("cannot open query file " + path);
    std::vector<std::pair<std::string, std::string>> queries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto pos = line.find(delim);
        if (pos == std::string::npos)
            throw io::ParseError("query needs user and item fields", line_no);
        std::string item = line.substr(pos + 1);
        auto extra = item.find(delim);
        if (extra != std::string::npos) item = item.substr(0, extra);
        queries.emplace_back(line.substr(0, pos), item);
    }
    return queries;
}

void write_text(const std::string& path, const std::string& contents) {
    std::ofstream os(path);
    if (!os) throw io::ParseError("cannot write " + path);
    os << contents;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Network-based recommender toolkit: SBM/MMSBM engines, "
                 "baselines and a cross-validation benchmark"};
    app.set_config("--config", "", "Config file with key=value lines");
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = 1234;
    int n_threads = 0;  // 0 -> all available
    app.add_option("--seed", seed, "Master RNG seed")->capture_default_str();
    app.add_option("--threads", n_threads, "Worker threads (0 = all cores)");

    FormatOptions fmt;
    std::string dataset_path, out_path, model_path, queries_path;

    // ingest-check
    auto* ingest = app.add_subcommand("ingest-check", "Parse a dataset and report its shape");
    ingest->add_option("--dataset", dataset_path, "Ratings file")->required();
    add_format_flags(ingest, fmt);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a planted-model synthetic dataset");
    std::size_t sy_users = 300, sy_items = 300, sy_K = 2, sy_L = 2, sy_labels = 5;
    double sy_density = 0.1;
    std::string planted_out;
    synth->add_option("--users", sy_users, "User count")->capture_default_str();
    synth->add_option("--items", sy_items, "Item count")->capture_default_str();
    synth->add_option("--K", sy_K, "Planted user groups")->capture_default_str();
    synth->add_option("--L", sy_L, "Planted item groups")->capture_default_str();
    synth->add_option("--labels", sy_labels, "Scale size")->capture_default_str();
    synth->add_option("--density", sy_density, "Observation density in (0,1]")
        ->capture_default_str();
    synth->add_option("--out", out_path, "Output ratings file")->required();
    synth->add_option("--planted-out", planted_out, "Optional path for the planted parameters");

    // train
    auto* train = app.add_subcommand("train", "Train one algorithm and persist the model");
    std::string algo = "mmsbm";
    std::size_t em_K = 10, em_L = 10, em_runs = 1, em_max_iters = 500, em_check_every = 10;
    double em_tol = 1e-6;
    std::size_t ii_k = 50;
    std::size_t mf_K = 50, mf_epochs = 30;
    double mf_lr = 0.002, mf_reg = 0.0;
    auto add_algo_flags = [&](CLI::App* cmd) {
        cmd->add_option("--algo", algo, "mmsbm|sbm|itemitem|mf|naive")->capture_default_str();
        cmd->add_option("--K", em_K, "MMSBM user groups")->capture_default_str();
        cmd->add_option("--L", em_L, "MMSBM item groups")->capture_default_str();
        cmd->add_option("--runs", em_runs, "MMSBM independent runs")->capture_default_str();
        cmd->add_option("--max-iters", em_max_iters, "MMSBM EM iteration cap")
            ->capture_default_str();
        cmd->add_option("--tol", em_tol, "MMSBM relative logL convergence threshold")
            ->capture_default_str();
        cmd->add_option("--check-every", em_check_every, "Iterations between checks")
            ->capture_default_str();
        cmd->add_option("--k-neighbors", ii_k, "Item-Item neighborhood size")
            ->capture_default_str();
        cmd->add_option("--mf-k", mf_K, "MF latent dimension")->capture_default_str();
        cmd->add_option("--mf-lr", mf_lr, "MF learning rate")->capture_default_str();
        cmd->add_option("--mf-reg", mf_reg, "MF penalty coefficient")->capture_default_str();
        cmd->add_option("--mf-epochs", mf_epochs, "MF epochs")->capture_default_str();
    };
    train->add_option("--dataset", dataset_path, "Ratings file")->required();
    train->add_option("--out", out_path, "Model output path")->required();
    add_format_flags(train, fmt);
    add_algo_flags(train);

    // predict
    auto* predict = app.add_subcommand("predict", "Predict ratings for (user,item) queries");
    std::size_t mc_burn_in = 200, mc_samples = 100, mc_stride = 5, mc_chains = 1;
    std::size_t mc_max_gu = 0, mc_max_gi = 0;
    predict->add_option("--model", model_path, "Trained model file (not used for --algo sbm)");
    predict->add_option("--dataset", dataset_path, "Ratings file (required for --algo sbm)");
    predict->add_option("--algo", algo, "Set to 'sbm' to sample instead of loading a model");
    predict->add_option("--queries", queries_path, "Query file: user<delim>item per line")
        ->required();
    predict->add_option("--out", out_path, "Predictions output path")->required();
    predict->add_option("--burn-in", mc_burn_in, "SBM burn-in sweeps")->capture_default_str();
    predict->add_option("--samples", mc_samples, "SBM samples")->capture_default_str();
    predict->add_option("--stride", mc_stride, "SBM sweeps between samples")
        ->capture_default_str();
    predict->add_option("--chains", mc_chains, "SBM independent chains")->capture_default_str();
    predict->add_option("--max-groups-users", mc_max_gu, "SBM user-group cap (0 = sqrt(N))");
    predict->add_option("--max-groups-items", mc_max_gi, "SBM item-group cap (0 = sqrt(M))");
    add_format_flags(predict, fmt);

    // benchmark
    auto* bench = app.add_subcommand("benchmark", "Five-fold cross-validation benchmark");
    std::vector<std::string> algos = {"naive", "itemitem", "mf", "mmsbm"};
    std::size_t n_folds = 5;
    bench->add_option("--dataset", dataset_path, "Ratings file")->required();
    bench->add_option("--algos", algos, "Algorithms to benchmark")->capture_default_str();
    bench->add_option("--folds", n_folds, "Fold count")->capture_default_str();
    bench->add_option("--out", out_path, "Report path prefix (.txt and .tsv)")->required();
    add_format_flags(bench, fmt);
    add_algo_flags(bench);
    bench->add_option("--burn-in", mc_burn_in, "SBM burn-in sweeps")->capture_default_str();
    bench->add_option("--samples", mc_samples, "SBM samples")->capture_default_str();
    bench->add_option("--stride", mc_stride, "SBM sweeps between samples")
        ->capture_default_str();
    bench->add_option("--chains", mc_chains, "SBM independent chains")->capture_default_str();
    bench->add_option("--max-groups-users", mc_max_gu, "SBM user-group cap (0 = sqrt(N))");
    bench->add_option("--max-groups-items", mc_max_gi, "SBM item-group cap (0 = sqrt(M))");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            auto ds = load_dataset(dataset_path, fmt);
            std::cout << "users\t" << ds.table.n_users() << "\nitems\t" << ds.table.n_items()
                      << "\nratings\t" << ds.table.n_observations() << "\nduplicates\t"
                      << ds.n_duplicates << "\nscale";
            for (double v : ds.table.scale().values()) std::cout << ' ' << io::render_double(v);
            std::cout << '\n';
            return 0;
        }

        if (*synth) {
            RatingScale scale = RatingScale::integers(1, static_cast<int>(sy_labels));
            auto planted = mmsbm::random_init(
                RatingsTable(sy_users, sy_items, scale, {}), sy_K, sy_L, mix64(seed) ^ 0x11);
            auto data = generate_synthetic(planted, scale, sy_density, seed);
            std::ostringstream os;
            for (const auto& o : data.observations())
                os << o.user << '\t' << o.item << '\t'
                   << io::render_double(scale.value(o.rating)) << '\n';
            write_text(out_path, os.str());
            if (!planted_out.empty()) {
                io::ModelFile file;
                file.kind = "mmsbm";
                file.scale = scale;
                for (std::size_t u = 0; u < sy_users; ++u)
                    file.user_ids.push_back(std::to_string(u));
                for (std::size_t i = 0; i < sy_items; ++i)
                    file.item_ids.push_back(std::to_string(i));
                file.mmsbm_models = {planted};
                io::save_model(file, planted_out);
            }
            std::cerr << "wrote " << data.n_observations() << " ratings to " << out_path << '\n';
            return 0;
        }

        if (*train) {
            auto ds = load_dataset(dataset_path, fmt);
            io::ModelFile file;
            file.scale = ds.table.scale();
            file.user_ids = ds.user_ids;
            file.item_ids = ds.item_ids;
            if (algo == "mmsbm") {
                mmsbm::EmConfig cfg;
                cfg.K = em_K;
                cfg.L = em_L;
                cfg.n_runs = em_runs;
                cfg.max_iters = em_max_iters;
                cfg.tol = em_tol;
                cfg.check_every = em_check_every;
                cfg.seed = seed;
                auto results = mmsbm::train_runs(ds.table, cfg, n_threads);
                file.kind = "mmsbm";
                for (auto& r : results) {
                    std::cerr << "run logL trace:";
                    for (double ll : r.loglik_trace) std::cerr << ' ' << ll;
                    std::cerr << (r.converged ? " (converged, " : " (iteration cap, ")
                              << io::render_double(r.seconds_per_iteration) << " s/iter)\n";
                    file.mmsbm_models.push_back(std::move(r.model));
                }
            } else if (algo == "mf") {
                baselines::MfConfig cfg;
                cfg.K = mf_K;
                cfg.learning_rate = mf_lr;
                cfg.regularization = mf_reg;
                cfg.n_epochs = mf_epochs;
                cfg.seed = seed;
                baselines::MfModel model(ds.table, cfg);
                std::cerr << "epoch RMSE trace:";
                for (double e : model.epoch_rmse()) std::cerr << ' ' << e;
                std::cerr << '\n';
                file.kind = "mf";
                file.mf = std::move(model);
            } else if (algo == "itemitem") {
                file.kind = "itemitem";
                file.itemitem.emplace(ds.table, ii_k, n_threads);
            } else if (algo == "naive") {
                file.kind = "naive";
                file.naive.emplace(ds.table);
            } else if (algo == "sbm") {
                std::cerr << "error: the bipartite SBM has no parametric model to persist; "
                             "use 'predict --algo sbm' or 'benchmark' instead\n";
                return 1;
            } else {
                std::cerr << "error: unknown algorithm '" << algo << "'\n";
                return 1;
            }
            io::save_model(file, out_path);
            std::cerr << "model written to " << out_path << '\n';
            return 0;
        }

        if (*predict) {
            char delim = fmt.delimiter.empty() ? '\t' : fmt.delimiter[0];
            auto raw_queries = read_queries(queries_path, delim);
            std::ostringstream os;
            os << "user\titem\tvalue\tmode\tmedian\tmean\tcold\tdistribution\n";
            os.precision(10);

            auto emit_dist = [&](const std::string& user, const std::string& item,
                                 const RatingDistribution& d, const RatingScale& scale,
                                 bool cold) {
                os << user << '\t' << item << '\t' << '\t'
                   << io::render_double(scale.value(estimator_mode(d))) << '\t'
                   << io::render_double(scale.value(estimator_median(d))) << '\t'
                   << io::render_double(estimator_mean(d, scale)) << '\t' << (cold ? 1 : 0)
                   << '\t';
                for (std::size_t r = 0; r < d.probs.size(); ++r)
                    os << (r ? " " : "") << io::render_double(d.probs[r]);
                os << '\n';
            };
            auto emit_value = [&](const std::string& user, const std::string& item, double v,
                                  bool cold) {
                os << user << '\t' << item << '\t' << io::render_double(v)
                   << "\t\t\t\t" << (cold ? 1 : 0) << "\t\n";
            };

            if (algo == "sbm") {
                if (dataset_path.empty())
                    throw CLI::ValidationError("--dataset is required with --algo sbm");
                auto ds = load_dataset(dataset_path, fmt);
                std::vector<std::pair<std::uint32_t, std::uint32_t>> queries;
                std::vector<bool> cold_flags;
                for (const auto& [user, item] : raw_queries) {
                    bool cold = false;
                    std::uint32_t u = lookup_id(ds.user_ids, user, &cold);
                    std::uint32_t i = lookup_id(ds.item_ids, item, &cold);
                    queries.emplace_back(u, i);
                    cold_flags.push_back(cold);
                }
                sbm::McmcConfig cfg;
                cfg.max_groups_users = mc_max_gu;
                cfg.max_groups_items = mc_max_gi;
                cfg.burn_in_sweeps = mc_burn_in;
                cfg.n_samples = mc_samples;
                cfg.sample_stride_sweeps = mc_stride;
                cfg.n_chains = mc_chains;
                cfg.seed = seed;
                sbm::McmcDiagnostics diag;
                auto dists = sbm::sample_predictive(ds.table, queries, cfg, &diag);
                std::cerr << "acceptance rate " << diag.acceptance_rate << ", final energy "
                          << (diag.energy_trace.empty() ? 0.0 : diag.energy_trace.back())
                          << '\n';
                for (std::size_t qn = 0; qn < queries.size(); ++qn)
                    emit_dist(raw_queries[qn].first, raw_queries[qn].second, dists[qn],
                              ds.table.scale(), cold_flags[qn]);
            } else {
                if (model_path.empty())
                    throw CLI::ValidationError("--model is required unless --algo sbm");
                auto file = io::load_model(model_path);
                for (const auto& [user, item] : raw_queries) {
                    bool cold_u = false, cold_i = false;
                    std::uint32_t u = lookup_id(file.user_ids, user, &cold_u);
                    std::uint32_t i = lookup_id(file.item_ids, item, &cold_i);
                    if (file.kind == "mmsbm") {
                        std::vector<double> hist(file.scale.size(),
                                                 1.0 / static_cast<double>(file.scale.size()));
                        auto d = mmsbm::predict(file.mmsbm_models, u, i, hist, cold_u, cold_i);
                        emit_dist(user, item, d, file.scale, cold_u || cold_i);
                    } else if (file.kind == "mf") {
                        emit_value(user, item, file.mf->predict(u, i, file.scale),
                                   cold_u || cold_i);
                    } else if (file.kind == "naive") {
                        emit_value(user, item, file.naive->predict(i), cold_u || cold_i);
                    } else {
                        // Item-item needs the ratings context for the
                        // neighborhood average.
                        if (dataset_path.empty())
                            throw CLI::ValidationError(
                                "--dataset is required for item-item prediction");
                        auto ds = load_dataset(dataset_path, fmt);
                        bool fb = false;
                        double v = file.itemitem->predict(ds.table, u, i, &fb);
                        emit_value(user, item, v, cold_u || cold_i || fb);
                    }
                }
            }
            write_text(out_path, os.str());
            std::cerr << "predictions written to " << out_path << '\n';
            return 0;
        }

        if (*bench) {
            auto ds = load_dataset(dataset_path, fmt);
            std::vector<std::shared_ptr<eval::Algorithm>> selected;
            for (const auto& name : algos) {
                if (name == "naive") {
                    selected.push_back(std::make_shared<algorithms::Naive>());
                } else if (name == "itemitem") {
                    selected.push_back(std::make_shared<algorithms::ItemItem>(ii_k, n_threads));
                } else if (name == "mf") {
                    baselines::MfConfig cfg;
                    cfg.K = mf_K;
                    cfg.learning_rate = mf_lr;
                    cfg.regularization = mf_reg;
                    cfg.n_epochs = mf_epochs;
                    selected.push_back(std::make_shared<algorithms::MatrixFactorization>(cfg));
                } else if (name == "mmsbm") {
                    mmsbm::EmConfig cfg;
                    cfg.K = em_K;
                    cfg.L = em_L;
                    cfg.n_runs = em_runs;
                    cfg.max_iters = em_max_iters;
                    cfg.tol = em_tol;
                    cfg.check_every = em_check_every;
                    selected.push_back(std::make_shared<algorithms::Mmsbm>(cfg, n_threads));
                } else if (name == "sbm") {
                    sbm::McmcConfig cfg;
                    cfg.max_groups_users = mc_max_gu;
                    cfg.max_groups_items = mc_max_gi;
                    cfg.burn_in_sweeps = mc_burn_in;
                    cfg.n_samples = mc_samples;
                    cfg.sample_stride_sweeps = mc_stride;
                    cfg.n_chains = mc_chains;
                    selected.push_back(std::make_shared<algorithms::Sbm>(cfg));
                } else {
                    std::cerr << "error: unknown algorithm '" << name << "'\n";
                    return 1;
                }
            }
            auto plan = eval::make_folds(ds.table, n_folds, seed);
            auto reports = eval::run_benchmark(ds.table, selected, plan, seed);
            auto table = eval::format_report_table(reports);

            // Relative improvements against every other algorithm that
            // produced a result, mirroring the accuracy comparison.
            std::ostringstream extra;
            for (const auto& a : reports)
                for (const auto& b : reports)
                    if (&a != &b && a.error.empty() && b.error.empty() &&
                        b.mean_accuracy > 0.0)
                        extra << "relative improvement " << a.algorithm << " over "
                              << b.algorithm << ": "
                              << eval::relative_improvement(a.mean_accuracy, b.mean_accuracy)
                              << "%\n";
            table += extra.str();
            std::cout << table;
            write_text(out_path + ".txt", table);
            write_text(out_path + ".tsv", eval::format_report_tsv(reports));
            bool any_error = false;
            for (const auto& r : reports) any_error = any_error || !r.error.empty();
            return any_error ? 1 : 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
