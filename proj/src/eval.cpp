#include "blockrec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <iomanip>

#include "blockrec/rng.hpp"

namespace blockrec::eval {

FoldPlan make_folds(const RatingsTable& data, std::size_t n_folds, std::uint64_t seed) {
    if (data.n_observations() < n_folds)
        throw std::invalid_argument("fewer observations than folds");
    std::vector<std::uint32_t> order(data.n_observations());
    std::iota(order.begin(), order.end(), 0);
    auto rng = split_rng(seed, /*stream=*/0xF0);
    std::shuffle(order.begin(), order.end(), rng);
    FoldPlan plan;
    plan.n_folds = n_folds;
    plan.seed = seed;
    plan.assignments.resize(data.n_observations());
    for (std::size_t pos = 0; pos < order.size(); ++pos)
        plan.assignments[order[pos]] = static_cast<std::uint32_t>(pos % n_folds);
    return plan;
}

std::pair<RatingsTable, std::vector<Observation>> split_fold(const RatingsTable& data,
                                                             const FoldPlan& plan,
                                                             std::size_t fold) {
    std::vector<Observation> train, test;
    for (std::size_t n = 0; n < data.n_observations(); ++n) {
        if (plan.assignments[n] == fold)
            test.push_back(data.observations()[n]);
        else
            train.push_back(data.observations()[n]);
    }
    return {RatingsTable(data.n_users(), data.n_items(), data.scale(), std::move(train)),
            std::move(test)};
}

double accuracy(const std::vector<std::size_t>& predicted, const std::vector<std::size_t>& actual) {
    if (predicted.size() != actual.size() || predicted.empty())
        throw std::invalid_argument("accuracy: length mismatch or empty");
    std::size_t hits = 0;
    for (std::size_t n = 0; n < predicted.size(); ++n) hits += predicted[n] == actual[n];
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double mae(const std::vector<double>& predicted, const std::vector<double>& actual) {
    if (predicted.size() != actual.size() || predicted.empty())
        throw std::invalid_argument("mae: length mismatch or empty");
    double s = 0.0;
    for (std::size_t n = 0; n < predicted.size(); ++n) s += std::fabs(predicted[n] - actual[n]);
    return s / static_cast<double>(predicted.size());
}

double relative_improvement(double acc_a, double acc_b) {
    if (acc_b <= 0.0) throw std::invalid_argument("relative_improvement: zero denominator");
    return (acc_a - acc_b) / acc_b * 100.0;
}

namespace {
std::pair<double, double> mean_stderr(const std::vector<double>& xs) {
    double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    return {mean, sd / std::sqrt(static_cast<double>(xs.size()))};
}
}  // namespace

std::vector<EvalReport> run_benchmark(const RatingsTable& data,
                                      const std::vector<std::shared_ptr<Algorithm>>& algorithms,
                                      const FoldPlan& plan, std::uint64_t seed) {
    std::vector<EvalReport> reports;
    const RatingScale& scale = data.scale();

    for (std::size_t ai = 0; ai < algorithms.size(); ++ai) {
        Algorithm& algo = *algorithms[ai];
        EvalReport report;
        report.algorithm = algo.name();
        std::size_t n_fallback = 0, n_cold = 0, n_queries = 0;
        double iter_seconds = 0.0;
        try {
            for (std::size_t fold = 0; fold < plan.n_folds; ++fold) {
                auto [train, test] = split_fold(data, plan, fold);
                algo.fit(train, mix64(seed ^ mix64(ai * 1000 + fold)));
                iter_seconds += algo.seconds_per_iteration();

                std::vector<std::pair<std::uint32_t, std::uint32_t>> queries;
                queries.reserve(test.size());
                for (const auto& o : test) queries.emplace_back(o.user, o.item);
                algo.prepare(queries);

                std::vector<std::size_t> pred_labels, true_labels;
                std::vector<double> pred_values, true_values;
                for (const auto& o : test) {
                    bool cold = train.degree_user(o.user) == 0 || train.degree_item(o.item) == 0;
                    n_cold += cold;
                    ++n_queries;
                    Prediction p = algo.predict(o.user, o.item);
                    n_fallback += p.fallback;
                    if (algo.probabilistic()) {
                        pred_labels.push_back(estimator_mode(*p.dist));
                        pred_values.push_back(scale.value(estimator_median(*p.dist)));
                    } else {
                        pred_labels.push_back(scale.nearest_index(p.value));
                        pred_values.push_back(p.value);
                    }
                    true_labels.push_back(o.rating);
                    true_values.push_back(scale.value(o.rating));
                }
                report.fold_accuracy.push_back(accuracy(pred_labels, true_labels));
                report.fold_mae.push_back(mae(pred_values, true_values));
            }
            std::tie(report.mean_accuracy, report.stderr_accuracy) =
                mean_stderr(report.fold_accuracy);
            std::tie(report.mean_mae, report.stderr_mae) = mean_stderr(report.fold_mae);
            report.fallback_rate =
                n_queries ? static_cast<double>(n_fallback) / n_queries : 0.0;
            report.cold_fraction = n_queries ? static_cast<double>(n_cold) / n_queries : 0.0;
            report.seconds_per_iteration = iter_seconds / static_cast<double>(plan.n_folds);
        } catch (const std::exception& e) {
            report.error = e.what();
        }
        reports.push_back(std::move(report));
    }
    return reports;
}

std::string format_report_table(const std::vector<EvalReport>& reports) {
    std::ostringstream os;
    os << std::left << std::setw(12) << "algorithm" << std::right << std::setw(10) << "accuracy"
       << std::setw(10) << "stderr" << std::setw(10) << "mae" << std::setw(10) << "stderr"
       << std::setw(10) << "fallback" << std::setw(10) << "cold" << '\n';
    os << std::string(72, '-') << '\n';
    os << std::fixed << std::setprecision(4);
    for (const auto& r : reports) {
        if (!r.error.empty()) {
            os << std::left << std::setw(12) << r.algorithm << "  FAILED: " << r.error << '\n';
            continue;
        }
        os << std::left << std::setw(12) << r.algorithm << std::right << std::setw(10)
           << r.mean_accuracy << std::setw(10) << r.stderr_accuracy << std::setw(10) << r.mean_mae
           << std::setw(10) << r.stderr_mae << std::setw(10) << r.fallback_rate << std::setw(10)
           << r.cold_fraction << '\n';
    }
    return os.str();
}

std::string format_report_tsv(const std::vector<EvalReport>& reports) {
    std::ostringstream os;
    os << "algorithm\tfold\taccuracy\tmae\tfallback_rate\tcold_fraction\tsec_per_iter\terror\n";
    os << std::setprecision(10);
    for (const auto& r : reports) {
        for (std::size_t f = 0; f < r.fold_accuracy.size(); ++f)
            os << r.algorithm << '\t' << f << '\t' << r.fold_accuracy[f] << '\t' << r.fold_mae[f]
               << "\t\t\t\t\n";
        os << r.algorithm << "\taggregate\t" << r.mean_accuracy << '\t' << r.mean_mae << '\t'
           << r.fallback_rate << '\t' << r.cold_fraction << '\t' << r.seconds_per_iteration << '\t'
           << r.error << '\n';
    }
    return os.str();
}

}  // namespace blockrec::eval
