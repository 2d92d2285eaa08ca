#pragma once

#include <memory>
#include <optional>
#include <unordered_map>

#include "blockrec/baselines.hpp"
#include "blockrec/eval.hpp"
#include "blockrec/mmsbm.hpp"
#include "blockrec/sbm.hpp"

namespace blockrec::algorithms {

// Benchmark adapters wrapping each engine behind the eval::Algorithm
// surface.

class Naive final : public eval::Algorithm {
public:
    std::string name() const override { return "naive"; }
    bool probabilistic() const override { return false; }
    void fit(const RatingsTable& train, std::uint64_t) override {
        model_.emplace(train);
    }
    eval::Prediction predict(std::size_t /*u*/, std::size_t i) const override {
        return {.value = model_->predict(i)};
    }

private:
    std::optional<baselines::NaiveModel> model_;
};

class ItemItem final : public eval::Algorithm {
public:
    explicit ItemItem(std::size_t k = 50, int n_threads = 1) : k_(k), n_threads_(n_threads) {}
    std::string name() const override { return "itemitem"; }
    bool probabilistic() const override { return false; }
    void fit(const RatingsTable& train, std::uint64_t) override {
        train_ = &train;
        model_.emplace(train, k_, n_threads_);
    }
    eval::Prediction predict(std::size_t u, std::size_t i) const override {
        bool fallback = false;
        double v = model_->predict(*train_, u, i, &fallback);
        return {.value = v, .fallback = fallback};
    }

private:
    std::size_t k_;
    int n_threads_;
    const RatingsTable* train_ = nullptr;
    std::optional<baselines::ItemItemModel> model_;
};

class MatrixFactorization final : public eval::Algorithm {
public:
    explicit MatrixFactorization(baselines::MfConfig config = {}) : config_(config) {}
    std::string name() const override { return "mf"; }
    bool probabilistic() const override { return false; }
    void fit(const RatingsTable& train, std::uint64_t seed) override {
        scale_ = train.scale();
        config_.seed = seed;
        model_.emplace(train, config_);
    }
    eval::Prediction predict(std::size_t u, std::size_t i) const override {
        return {.value = model_->predict(u, i, *scale_)};
    }

private:
    baselines::MfConfig config_;
    std::optional<RatingScale> scale_;
    std::optional<baselines::MfModel> model_;
};

class Mmsbm final : public eval::Algorithm {
public:
    explicit Mmsbm(mmsbm::EmConfig config = {}, int n_threads = 1)
        : config_(config), n_threads_(n_threads) {}
    std::string name() const override { return "mmsbm"; }
    bool probabilistic() const override { return true; }

    void fit(const RatingsTable& train, std::uint64_t seed) override {
        config_.seed = seed;
        results_ = mmsbm::train_runs(train, config_, n_threads_);
        models_.clear();
        for (auto& r : results_) models_.push_back(std::move(r.model));
        histogram_ = train.rating_histogram();
        user_degree_.assign(train.n_users(), 0);
        item_degree_.assign(train.n_items(), 0);
        for (const auto& o : train.observations()) {
            ++user_degree_[o.user];
            ++item_degree_[o.item];
        }
        seconds_per_iter_ = 0.0;
        for (const auto& r : results_) seconds_per_iter_ += r.seconds_per_iteration;
        seconds_per_iter_ /= static_cast<double>(results_.size());
    }

    eval::Prediction predict(std::size_t u, std::size_t i) const override {
        bool cold_u = u >= user_degree_.size() || user_degree_[u] == 0;
        bool cold_i = i >= item_degree_.size() || item_degree_[i] == 0;
        auto dist = mmsbm::predict(models_, u, i, histogram_, cold_u, cold_i);
        return {.dist = std::move(dist), .cold = cold_u || cold_i};
    }

    double seconds_per_iteration() const override { return seconds_per_iter_; }
    const std::vector<mmsbm::TrainResult>& train_results() const { return results_; }
    const std::vector<mmsbm::MmsbmModel>& models() const { return models_; }

private:
    mmsbm::EmConfig config_;
    int n_threads_;
    std::vector<mmsbm::TrainResult> results_;
    std::vector<mmsbm::MmsbmModel> models_;
    std::vector<double> histogram_;
    std::vector<std::uint32_t> user_degree_, item_degree_;
    double seconds_per_iter_ = 0.0;
};

// Transductive: the sampler needs the test queries up front, so fit
// stores the training table and predictions are gathered lazily in one
// batch on first use.
class Sbm final : public eval::Algorithm {
public:
    explicit Sbm(sbm::McmcConfig config = {}) : config_(config) {}
    std::string name() const override { return "sbm"; }
    bool probabilistic() const override { return true; }

    void fit(const RatingsTable& train, std::uint64_t seed) override {
        config_.seed = seed;
        train_ = &train;
        cache_.clear();
    }

    eval::Prediction predict(std::size_t u, std::size_t i) const override {
        auto key = std::make_pair(static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(i));
        auto it = cache_.find(key);
        if (it == cache_.end()) {
            auto dists = sbm::sample_predictive(*train_, {key}, config_);
            it = cache_.emplace(key, std::move(dists[0])).first;
        }
        return {.dist = it->second};
    }

    void prepare(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& queries) override {
        auto dists = sbm::sample_predictive(*train_, queries, config_, &diagnostics_);
        for (std::size_t qi = 0; qi < queries.size(); ++qi)
            cache_[queries[qi]] = std::move(dists[qi]);
    }

    const sbm::McmcDiagnostics& diagnostics() const { return diagnostics_; }

private:
    struct PairHash {
        std::size_t operator()(const std::pair<std::uint32_t, std::uint32_t>& p) const {
            return (static_cast<std::size_t>(p.first) << 32) | p.second;
        }
    };
    sbm::McmcConfig config_;
    const RatingsTable* train_ = nullptr;
    mutable std::unordered_map<std::pair<std::uint32_t, std::uint32_t>, RatingDistribution,
                               PairHash>
        cache_;
    sbm::McmcDiagnostics diagnostics_;
};

}  // namespace blockrec::algorithms
