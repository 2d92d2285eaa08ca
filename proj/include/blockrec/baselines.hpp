#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "blockrec/ratings_table.hpp"

namespace blockrec::baselines {

// Per-item mean of observed ratings; unseen items fall back to the
// global mean.
class NaiveModel {
public:
    explicit NaiveModel(const RatingsTable& data);
    NaiveModel(std::vector<double> item_means, double global_mean)
        : item_mean_(std::move(item_means)), global_mean_(global_mean) {}
    double predict(std::size_t i) const;
    double global_mean() const { return global_mean_; }
    const std::vector<double>& item_means() const { return item_mean_; }

private:
    std::vector<double> item_mean_;  // NaN where the item has no ratings
    double global_mean_ = 0.0;
};

double cosine_similarity(const RatingsTable& data, std::size_t i, std::size_t j);

// Top-k most similar items per item under binary-vector cosine
// similarity. Similarity ties break by ascending item index.
class ItemItemModel {
public:
    ItemItemModel(const RatingsTable& data, std::size_t k, int n_threads = 1);
    ItemItemModel(std::size_t k,
                  std::vector<std::vector<std::pair<std::uint32_t, double>>> neighbors,
                  NaiveModel naive)
        : k_(k), neighbors_(std::move(neighbors)), naive_(std::move(naive)) {}

    std::size_t k() const { return k_; }
    const NaiveModel& naive() const { return naive_; }
    const std::vector<std::pair<std::uint32_t, double>>& neighbors(std::size_t i) const {
        return neighbors_[i];
    }

    // Similarity-weighted average over neighbors rated by u; falls back
    // to the item mean when no neighbor overlaps. Sets *fallback when
    // the fallback path was taken.
    double predict(const RatingsTable& data, std::size_t u, std::size_t i,
                   bool* fallback = nullptr) const;

private:
    std::size_t k_;
    std::vector<std::vector<std::pair<std::uint32_t, double>>> neighbors_;
    NaiveModel naive_;
};

struct MfConfig {
    std::size_t K = 50;
    double learning_rate = 0.002;
    double regularization = 0.0;
    double init_value = 0.1;
    std::size_t n_epochs = 30;
    std::uint64_t seed = 0;
};

struct MfDivergenceError : std::runtime_error {
    explicit MfDivergenceError(std::size_t epoch)
        : std::runtime_error("matrix factorization diverged at epoch " + std::to_string(epoch)),
          epoch(epoch) {}
    std::size_t epoch;
};

// Plain unbiased SGD matrix factorization over observed ratings only.
class MfModel {
public:
    MfModel(const RatingsTable& data, const MfConfig& config);
    MfModel(std::size_t K, std::size_t n_users, std::size_t n_items, std::vector<double> P,
            std::vector<double> Q, std::vector<bool> user_seen, std::vector<bool> item_seen,
            double global_mean)
        : K_(K),
          n_users_(n_users),
          n_items_(n_items),
          P_(std::move(P)),
          Q_(std::move(Q)),
          user_seen_(std::move(user_seen)),
          item_seen_(std::move(item_seen)),
          global_mean_(global_mean) {}

    std::size_t K() const { return K_; }
    const std::vector<double>& P() const { return P_; }
    const std::vector<double>& Q() const { return Q_; }
    const std::vector<bool>& user_seen() const { return user_seen_; }
    const std::vector<bool>& item_seen() const { return item_seen_; }
    double global_mean() const { return global_mean_; }

    // Raw inner product, unclamped.
    double dot(std::size_t u, std::size_t i) const;
    // Clamped to the scale range; cold-start rows use the global mean.
    double predict(std::size_t u, std::size_t i, const RatingScale& scale) const;

    const std::vector<double>& epoch_rmse() const { return epoch_rmse_; }

    // Squared-error gradient for one observation; used by the
    // finite-difference check.
    static void gradient_single(const std::vector<double>& p_u, const std::vector<double>& q_i,
                                double rating, double regularization,
                                std::vector<double>& grad_p, std::vector<double>& grad_q);

private:
    std::size_t K_;
    std::size_t n_users_, n_items_;
    std::vector<double> P_;  // n_users x K
    std::vector<double> Q_;  // K x n_items, stored item-major
    std::vector<bool> user_seen_, item_seen_;
    double global_mean_ = 0.0;
    std::vector<double> epoch_rmse_;
};

}  // namespace blockrec::baselines
