#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "blockrec/distribution.hpp"
#include "blockrec/ratings_table.hpp"

namespace blockrec::mmsbm {

struct DegenerateModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mixed-membership model: per-user group memberships theta (N x K),
// per-item memberships eta (M x L) and the rating-probability tensor
// q (|S| x K x L). Rows of theta/eta and q fibers over r are simplices.
struct MmsbmModel {
    std::size_t n_users = 0;
    std::size_t n_items = 0;
    std::size_t K = 0;
    std::size_t L = 0;
    std::size_t n_labels = 0;

    std::vector<double> theta;  // n_users * K
    std::vector<double> eta;    // n_items * L
    std::vector<double> q;      // n_labels * K * L

    MmsbmModel() = default;
    MmsbmModel(std::size_t n_users_, std::size_t n_items_, std::size_t K_, std::size_t L_,
               std::size_t n_labels_)
        : n_users(n_users_),
          n_items(n_items_),
          K(K_),
          L(L_),
          n_labels(n_labels_),
          theta(n_users_ * K_, 0.0),
          eta(n_items_ * L_, 0.0),
          q(n_labels_ * K_ * L_, 0.0) {}

    double& th(std::size_t u, std::size_t k) { return theta[u * K + k]; }
    double th(std::size_t u, std::size_t k) const { return theta[u * K + k]; }
    double& et(std::size_t i, std::size_t l) { return eta[i * L + l]; }
    double et(std::size_t i, std::size_t l) const { return eta[i * L + l]; }
    double& qr(std::size_t r, std::size_t k, std::size_t l) { return q[(r * K + k) * L + l]; }
    double qr(std::size_t r, std::size_t k, std::size_t l) const { return q[(r * K + k) * L + l]; }

    // Largest violation across all three normalization families.
    double max_normalization_error() const;

    // p(r | u, i) = sum_{k,l} theta_uk eta_il q^r_kl for one in-range pair.
    RatingDistribution predict_single(std::size_t u, std::size_t i) const;
};

struct EmConfig {
    std::size_t K = 10;
    std::size_t L = 10;
    std::size_t max_iters = 500;
    double tol = 1e-6;
    std::size_t check_every = 10;
    std::size_t n_runs = 1;
    std::uint64_t seed = 0;
};

// M-step numerators gathered during the streaming expectation pass.
// omega is folded in observation by observation, never stored.
struct EmAccumulators {
    std::vector<double> theta_num;  // n_users * K
    std::vector<double> eta_num;    // n_items * L
    std::vector<double> q_num;      // n_labels * K * L

    void resize(const MmsbmModel& m) {
        theta_num.assign(m.n_users * m.K, 0.0);
        eta_num.assign(m.n_items * m.L, 0.0);
        q_num.assign(m.n_labels * m.K * m.L, 0.0);
    }
    void clear() {
        theta_num.assign(theta_num.size(), 0.0);
        eta_num.assign(eta_num.size(), 0.0);
        q_num.assign(q_num.size(), 0.0);
    }
    void add(const EmAccumulators& o) {
        for (std::size_t i = 0; i < theta_num.size(); ++i) theta_num[i] += o.theta_num[i];
        for (std::size_t i = 0; i < eta_num.size(); ++i) eta_num[i] += o.eta_num[i];
        for (std::size_t i = 0; i < q_num.size(); ++i) q_num[i] += o.q_num[i];
    }
};

struct TrainResult {
    MmsbmModel model;
    std::vector<double> loglik_trace;  // value at every convergence check
    bool converged = false;
    std::size_t iterations = 0;
    double seconds_per_iteration = 0.0;
};

double log_likelihood(const MmsbmModel& model, const RatingsTable& data);

// Streams observations [begin, end), folding each omega into the
// accumulators. Throws DegenerateModelError on a zero-probability
// observation.
void expectation_step(const MmsbmModel& model, const RatingsTable& data, EmAccumulators& acc,
                      std::size_t begin, std::size_t end);

// Normalizes the accumulators into a fresh model. Zero-degree users and
// items get uniform rows; an empty (k,l) block gets a uniform q fiber.
MmsbmModel maximization_step(const EmAccumulators& acc, const RatingsTable& data,
                             const MmsbmModel& dims);

// One fused E+M iteration. The serial version is the reference; the
// parallel version partitions observations across OpenMP threads with
// per-thread accumulators merged in thread order.
void em_iteration_serial(MmsbmModel& model, const RatingsTable& data);
void em_iteration_parallel(MmsbmModel& model, const RatingsTable& data, int n_threads);

MmsbmModel random_init(const RatingsTable& data, std::size_t K, std::size_t L,
                       std::uint64_t seed);

TrainResult train(const RatingsTable& data, const EmConfig& config, std::uint64_t run_index = 0,
                  int n_threads = 1);

// Independent restarts run_index = 0..n_runs-1, predictions averaged.
std::vector<TrainResult> train_runs(const RatingsTable& data, const EmConfig& config,
                                    int n_threads = 1);

// Averaged prediction over trained models. Cold users get uniform theta,
// cold items uniform eta, both cold the global training histogram.
RatingDistribution predict(std::span<const MmsbmModel> models, std::size_t u, std::size_t i,
                           const std::vector<double>& global_histogram,
                           bool user_cold = false, bool item_cold = false);

}  // namespace blockrec::mmsbm
