#include "blockrec/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "blockrec/rng.hpp"

namespace blockrec::baselines {

NaiveModel::NaiveModel(const RatingsTable& data)
    : item_mean_(data.n_items(), std::numeric_limits<double>::quiet_NaN()) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.n_items(); ++i) {
        const auto& adj = data.by_item(i);
        if (adj.empty()) continue;
        double s = 0.0;
        for (const auto& [u, r] : adj) s += data.scale().value(r);
        item_mean_[i] = s / static_cast<double>(adj.size());
        total += s;
    }
    global_mean_ = data.n_observations()
                       ? total / static_cast<double>(data.n_observations())
                       : 0.5 * (data.scale().min_value() + data.scale().max_value());
}

double NaiveModel::predict(std::size_t i) const {
    if (i >= item_mean_.size() || std::isnan(item_mean_[i])) return global_mean_;
    return item_mean_[i];
}

double cosine_similarity(const RatingsTable& data, std::size_t i, std::size_t j) {
    const auto& ai = data.by_item(i);
    const auto& aj = data.by_item(j);
    if (ai.empty() || aj.empty()) return 0.0;
    // Binary rater-indicator vectors: dot product = co-rater count.
    std::vector<bool> seen(data.n_users(), false);
    for (const auto& [u, r] : ai) seen[u] = true;
    std::size_t overlap = 0;
    for (const auto& [u, r] : aj) overlap += seen[u];
    return static_cast<double>(overlap) /
           (std::sqrt(static_cast<double>(ai.size())) * std::sqrt(static_cast<double>(aj.size())));
}

ItemItemModel::ItemItemModel(const RatingsTable& data, std::size_t k, int n_threads)
    : k_(k), neighbors_(data.n_items()), naive_(data) {
    const std::size_t n_items = data.n_items();
#ifdef _OPENMP
#pragma omp parallel num_threads(n_threads > 0 ? n_threads : omp_get_max_threads())
#endif
    {
        // Co-rater counting via the user adjacency: for every co-rated
        // pair (i, j) the overlap grows by one.
        std::vector<std::uint32_t> overlap(n_items, 0);
        std::vector<std::uint32_t> touched;
#ifdef _OPENMP
#pragma omp for schedule(dynamic, 16)
#endif
        for (long long i = 0; i < static_cast<long long>(n_items); ++i) {
            const auto& raters = data.by_item(i);
            if (raters.empty()) continue;
            touched.clear();
            for (const auto& [u, ru] : raters) {
                for (const auto& [j, rj] : data.by_user(u)) {
                    if (j == static_cast<std::uint32_t>(i)) continue;
                    if (overlap[j] == 0) touched.push_back(j);
                    ++overlap[j];
                }
            }
            double norm_i = std::sqrt(static_cast<double>(raters.size()));
            std::vector<std::pair<std::uint32_t, double>> sims;
            sims.reserve(touched.size());
            for (std::uint32_t j : touched) {
                double sim = static_cast<double>(overlap[j]) /
                             (norm_i * std::sqrt(static_cast<double>(data.degree_item(j))));
                sims.emplace_back(j, sim);
                overlap[j] = 0;
            }
            std::size_t keep = std::min(k_, sims.size());
            std::partial_sort(sims.begin(), sims.begin() + keep, sims.end(),
                              [](const auto& a, const auto& b) {
                                  if (a.second != b.second) return a.second > b.second;
                                  return a.first < b.first;
                              });
            sims.resize(keep);
            neighbors_[i] = std::move(sims);
        }
    }
}

double ItemItemModel::predict(const RatingsTable& data, std::size_t u, std::size_t i,
                              bool* fallback) const {
    if (fallback) *fallback = false;
    if (i < neighbors_.size() && u < data.n_users()) {
        const auto& adj = data.by_user(u);
        double num = 0.0, den = 0.0;
        for (const auto& [j, sim] : neighbors_[i]) {
            for (const auto& [ju, r] : adj) {
                if (ju == j) {
                    num += sim * data.scale().value(r);
                    den += std::fabs(sim);
                    break;
                }
            }
        }
        if (den > 0.0) return num / den;
    }
    if (fallback) *fallback = true;
    return naive_.predict(i);
}

void MfModel::gradient_single(const std::vector<double>& p_u, const std::vector<double>& q_i,
                              double rating, double regularization, std::vector<double>& grad_p,
                              std::vector<double>& grad_q) {
    double pred = std::inner_product(p_u.begin(), p_u.end(), q_i.begin(), 0.0);
    double err = pred - rating;
    grad_p.resize(p_u.size());
    grad_q.resize(q_i.size());
    for (std::size_t k = 0; k < p_u.size(); ++k) {
        grad_p[k] = 2.0 * err * q_i[k] + 2.0 * regularization * p_u[k];
        grad_q[k] = 2.0 * err * p_u[k] + 2.0 * regularization * q_i[k];
    }
}

MfModel::MfModel(const RatingsTable& data, const MfConfig& config)
    : K_(config.K),
      n_users_(data.n_users()),
      n_items_(data.n_items()),
      P_(data.n_users() * config.K, config.init_value),
      Q_(data.n_items() * config.K, config.init_value),
      user_seen_(data.n_users(), false),
      item_seen_(data.n_items(), false) {
    double total = 0.0;
    for (const auto& o : data.observations()) {
        user_seen_[o.user] = true;
        item_seen_[o.item] = true;
        total += data.scale().value(o.rating);
    }
    global_mean_ = data.n_observations()
                       ? total / static_cast<double>(data.n_observations())
                       : 0.5 * (data.scale().min_value() + data.scale().max_value());

    std::vector<std::uint32_t> order(data.n_observations());
    std::iota(order.begin(), order.end(), 0);
    auto rng = split_rng(config.seed, /*stream=*/0x3F);

    const double lr = config.learning_rate, reg = config.regularization;
    for (std::size_t epoch = 0; epoch < config.n_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double sq_err = 0.0;
        for (std::uint32_t idx : order) {
            const auto& o = data.observations()[idx];
            double* p = &P_[o.user * K_];
            double* q = &Q_[o.item * K_];
            double pred = 0.0;
            for (std::size_t k = 0; k < K_; ++k) pred += p[k] * q[k];
            double err = pred - data.scale().value(o.rating);
            sq_err += err * err;
            for (std::size_t k = 0; k < K_; ++k) {
                double pk = p[k];
                p[k] -= lr * (2.0 * err * q[k] + 2.0 * reg * pk);
                q[k] -= lr * (2.0 * err * pk + 2.0 * reg * q[k]);
            }
        }
        double rmse = std::sqrt(sq_err / static_cast<double>(data.n_observations()));
        if (!std::isfinite(rmse)) throw MfDivergenceError(epoch);
        epoch_rmse_.push_back(rmse);
    }
}

double MfModel::dot(std::size_t u, std::size_t i) const {
    const double* p = &P_[u * K_];
    const double* q = &Q_[i * K_];
    double s = 0.0;
    for (std::size_t k = 0; k < K_; ++k) s += p[k] * q[k];
    return s;
}

double MfModel::predict(std::size_t u, std::size_t i, const RatingScale& scale) const {
    bool cold_u = u >= n_users_ || !user_seen_[u];
    bool cold_i = i >= n_items_ || !item_seen_[i];
    double v = (cold_u || cold_i) ? global_mean_ : dot(u, i);
    return std::clamp(v, scale.min_value(), scale.max_value());
}

}  // namespace blockrec::baselines
