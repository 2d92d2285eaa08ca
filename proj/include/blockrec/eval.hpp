#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "blockrec/distribution.hpp"
#include "blockrec/ratings_table.hpp"

namespace blockrec::eval {

struct FoldPlan {
    std::size_t n_folds = 5;
    std::vector<std::uint32_t> assignments;  // fold index per observation
    std::uint64_t seed = 0;
};

FoldPlan make_folds(const RatingsTable& data, std::size_t n_folds, std::uint64_t seed);

// Train table (all folds != fold) and the test observations (fold).
std::pair<RatingsTable, std::vector<Observation>> split_fold(const RatingsTable& data,
                                                             const FoldPlan& plan,
                                                             std::size_t fold);

double accuracy(const std::vector<std::size_t>& predicted, const std::vector<std::size_t>& actual);
double mae(const std::vector<double>& predicted, const std::vector<double>& actual);
double relative_improvement(double acc_a, double acc_b);

struct Prediction {
    std::optional<RatingDistribution> dist;  // network models
    double value = 0.0;                      // point-valued models
    bool fallback = false;                   // e.g. no-overlap item-item
    bool cold = false;
};

// One benchmarked algorithm: fit on a training split, predict queries.
class Algorithm {
public:
    virtual ~Algorithm() = default;
    virtual std::string name() const = 0;
    virtual bool probabilistic() const = 0;
    // seed is already split per (algorithm, fold).
    virtual void fit(const RatingsTable& train, std::uint64_t seed) = 0;
    // Batch hint for transductive models; called with the fold's test
    // queries before any predict call.
    virtual void prepare(const std::vector<std::pair<std::uint32_t, std::uint32_t>>&) {}
    virtual Prediction predict(std::size_t u, std::size_t i) const = 0;
    virtual double seconds_per_iteration() const { return 0.0; }
};

struct EvalReport {
    std::string algorithm;
    std::vector<double> fold_accuracy;
    std::vector<double> fold_mae;
    double mean_accuracy = 0.0, stderr_accuracy = 0.0;
    double mean_mae = 0.0, stderr_mae = 0.0;
    double fallback_rate = 0.0;   // fraction of test queries served by fallback
    double cold_fraction = 0.0;   // test queries whose user or item is train-cold
    double seconds_per_iteration = 0.0;
    std::string error;  // nonempty when this algorithm failed
};

// Five-fold protocol: probabilistic algorithms are scored with the mode
// estimator for accuracy and the median estimator for MAE; point-valued
// ones with nearest-label rounding for accuracy and the raw value for
// MAE. A failing algorithm is reported and the others continue.
std::vector<EvalReport> run_benchmark(const RatingsTable& data,
                                      const std::vector<std::shared_ptr<Algorithm>>& algorithms,
                                      const FoldPlan& plan, std::uint64_t seed);

std::string format_report_table(const std::vector<EvalReport>& reports);
std::string format_report_tsv(const std::vector<EvalReport>& reports);

}  // namespace blockrec::eval
