#include "blockrec/mmsbm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "blockrec/rng.hpp"

namespace blockrec::mmsbm {

namespace {
constexpr double kDenomFloor = 1e-300;

void fill_simplex_rows(std::vector<double>& rows, std::size_t width, std::mt19937_64& rng) {
    // Uniform on the simplex: normalized Exp(1) draws.
    std::exponential_distribution<double> exp1(1.0);
    for (std::size_t r = 0; r < rows.size() / width; ++r) {
        double sum = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
            double x = exp1(rng);
            rows[r * width + j] = x;
            sum += x;
        }
        for (std::size_t j = 0; j < width; ++j) rows[r * width + j] /= sum;
    }
}
}  // namespace

double MmsbmModel::max_normalization_error() const {
    double worst = 0.0;
    for (std::size_t u = 0; u < n_users; ++u) {
        double s = 0.0;
        for (std::size_t k = 0; k < K; ++k) s += th(u, k);
        worst = std::max(worst, std::fabs(s - 1.0));
    }
    for (std::size_t i = 0; i < n_items; ++i) {
        double s = 0.0;
        for (std::size_t l = 0; l < L; ++l) s += et(i, l);
        worst = std::max(worst, std::fabs(s - 1.0));
    }
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t l = 0; l < L; ++l) {
            double s = 0.0;
            for (std::size_t r = 0; r < n_labels; ++r) s += qr(r, k, l);
            worst = std::max(worst, std::fabs(s - 1.0));
        }
    return worst;
}

RatingDistribution MmsbmModel::predict_single(std::size_t u, std::size_t i) const {
    RatingDistribution d;
    d.probs.assign(n_labels, 0.0);
    for (std::size_t r = 0; r < n_labels; ++r) {
        double p = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            double tuk = th(u, k);
            if (tuk == 0.0) continue;
            double inner = 0.0;
            for (std::size_t l = 0; l < L; ++l) inner += et(i, l) * qr(r, k, l);
            p += tuk * inner;
        }
        d.probs[r] = p;
    }
    return d;
}

double log_likelihood(const MmsbmModel& model, const RatingsTable& data) {
    double ll = 0.0;
    const std::size_t K = model.K, L = model.L;
    for (const auto& o : data.observations()) {
        double p = 0.0;
        const double* trow = &model.theta[o.user * K];
        const double* erow = &model.eta[o.item * L];
        const double* qrow = &model.q[static_cast<std::size_t>(o.rating) * K * L];
        for (std::size_t k = 0; k < K; ++k) {
            double inner = 0.0;
            for (std::size_t l = 0; l < L; ++l) inner += erow[l] * qrow[k * L + l];
            p += trow[k] * inner;
        }
        if (p < kDenomFloor)
            throw DegenerateModelError("observation has zero model probability");
        ll += std::log(p);
    }
    return ll;
}

void expectation_step(const MmsbmModel& model, const RatingsTable& data, EmAccumulators& acc,
                      std::size_t begin, std::size_t end) {
    const std::size_t K = model.K, L = model.L;
    std::vector<double> omega(K * L);
    for (std::size_t n = begin; n < end; ++n) {
        const auto& o = data.observations()[n];
        const double* trow = &model.theta[o.user * K];
        const double* erow = &model.eta[o.item * L];
        const double* qrow = &model.q[static_cast<std::size_t>(o.rating) * K * L];
        double denom = 0.0;
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t l = 0; l < L; ++l) {
                double w = trow[k] * erow[l] * qrow[k * L + l];
                omega[k * L + l] = w;
                denom += w;
            }
        if (denom < kDenomFloor)
            throw DegenerateModelError("zero omega denominator (degenerate parameters)");
        double inv = 1.0 / denom;
        double* tacc = &acc.theta_num[o.user * K];
        double* eacc = &acc.eta_num[o.item * L];
        double* qacc = &acc.q_num[static_cast<std::size_t>(o.rating) * K * L];
        for (std::size_t k = 0; k < K; ++k) {
            double row_sum = 0.0;
            for (std::size_t l = 0; l < L; ++l) {
                double w = omega[k * L + l] * inv;
                row_sum += w;
                eacc[l] += w;
                qacc[k * L + l] += w;
            }
            tacc[k] += row_sum;
        }
    }
}

MmsbmModel maximization_step(const EmAccumulators& acc, const RatingsTable& data,
                             const MmsbmModel& dims) {
    MmsbmModel out(dims.n_users, dims.n_items, dims.K, dims.L, dims.n_labels);
    const std::size_t K = out.K, L = out.L, S = out.n_labels;

    for (std::size_t u = 0; u < out.n_users; ++u) {
        double d = static_cast<double>(data.degree_user(u));
        if (d == 0.0) {
            for (std::size_t k = 0; k < K; ++k) out.th(u, k) = 1.0 / static_cast<double>(K);
        } else {
            for (std::size_t k = 0; k < K; ++k) out.th(u, k) = acc.theta_num[u * K + k] / d;
        }
    }
    for (std::size_t i = 0; i < out.n_items; ++i) {
        double d = static_cast<double>(data.degree_item(i));
        if (d == 0.0) {
            for (std::size_t l = 0; l < L; ++l) out.et(i, l) = 1.0 / static_cast<double>(L);
        } else {
            for (std::size_t l = 0; l < L; ++l) out.et(i, l) = acc.eta_num[i * L + l] / d;
        }
    }
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t l = 0; l < L; ++l) {
            double total = 0.0;
            for (std::size_t r = 0; r < S; ++r) total += acc.q_num[(r * K + k) * L + l];
            if (total < kDenomFloor) {
                // Empty block: reset the fiber to uniform instead of NaN.
                for (std::size_t r = 0; r < S; ++r)
                    out.qr(r, k, l) = 1.0 / static_cast<double>(S);
            } else {
                for (std::size_t r = 0; r < S; ++r)
                    out.qr(r, k, l) = acc.q_num[(r * K + k) * L + l] / total;
            }
        }
    return out;
}

void em_iteration_serial(MmsbmModel& model, const RatingsTable& data) {
    EmAccumulators acc;
    acc.resize(model);
    expectation_step(model, data, acc, 0, data.n_observations());
    model = maximization_step(acc, data, model);
}

void em_iteration_parallel(MmsbmModel& model, const RatingsTable& data, int n_threads) {
#ifdef _OPENMP
    if (n_threads <= 0) n_threads = omp_get_max_threads();
#else
    n_threads = 1;
#endif
    if (n_threads == 1) {
        em_iteration_serial(model, data);
        return;
    }
    const std::size_t n = data.n_observations();
    std::vector<EmAccumulators> locals(static_cast<std::size_t>(n_threads));
    std::exception_ptr error;
#ifdef _OPENMP
#pragma omp parallel num_threads(n_threads)
    {
        int t = omp_get_thread_num();
        std::size_t chunk = (n + n_threads - 1) / n_threads;
        std::size_t begin = std::min(n, chunk * static_cast<std::size_t>(t));
        std::size_t end = std::min(n, begin + chunk);
        locals[t].resize(model);
        try {
            expectation_step(model, data, locals[t], begin, end);
        } catch (...) {
#pragma omp critical
            error = std::current_exception();
        }
    }
#endif
    if (error) std::rethrow_exception(error);
    // Merge in thread order so the result is deterministic for a fixed
    // thread count.
    for (int t = 1; t < n_threads; ++t) locals[0].add(locals[t]);
    model = maximization_step(locals[0], data, model);
}

MmsbmModel random_init(const RatingsTable& data, std::size_t K, std::size_t L,
                       std::uint64_t seed) {
    MmsbmModel m(data.n_users(), data.n_items(), K, L, data.scale().size());
    auto rng = split_rng(seed, /*stream=*/0xEE);
    fill_simplex_rows(m.theta, K, rng);
    fill_simplex_rows(m.eta, L, rng);
    // q fibers are simplices along r: draw K*L fibers.
    std::exponential_distribution<double> exp1(1.0);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t l = 0; l < L; ++l) {
            double sum = 0.0;
            std::vector<double> fiber(m.n_labels);
            for (std::size_t r = 0; r < m.n_labels; ++r) {
                fiber[r] = exp1(rng);
                sum += fiber[r];
            }
            for (std::size_t r = 0; r < m.n_labels; ++r) m.qr(r, k, l) = fiber[r] / sum;
        }
    return m;
}

TrainResult train(const RatingsTable& data, const EmConfig& config, std::uint64_t run_index,
                  int n_threads) {
    if (data.n_observations() == 0) throw std::invalid_argument("empty ratings table");
    TrainResult result;
    result.model = random_init(data, config.K, config.L, mix64(config.seed) ^ mix64(run_index));

    double prev_ll = log_likelihood(result.model, data);
    result.loglik_trace.push_back(prev_ll);

    auto t0 = std::chrono::steady_clock::now();
    std::size_t iter = 0;
    while (iter < config.max_iters) {
        std::size_t burst = std::min(config.check_every, config.max_iters - iter);
        for (std::size_t j = 0; j < burst; ++j)
            em_iteration_parallel(result.model, data, n_threads);
        iter += burst;
        double ll = log_likelihood(result.model, data);
        result.loglik_trace.push_back(ll);
        if (std::fabs(ll - prev_ll) < config.tol * std::fabs(ll)) {
            result.converged = true;
            prev_ll = ll;
            break;
        }
        prev_ll = ll;
    }
    auto t1 = std::chrono::steady_clock::now();
    result.iterations = iter;
    result.seconds_per_iteration =
        std::chrono::duration<double>(t1 - t0).count() / static_cast<double>(std::max<std::size_t>(iter, 1));
    return result;
}

std::vector<TrainResult> train_runs(const RatingsTable& data, const EmConfig& config,
                                    int n_threads) {
    std::vector<TrainResult> results(config.n_runs);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(n_threads > 0 ? n_threads : omp_get_max_threads())
#endif
    for (long long run = 0; run < static_cast<long long>(config.n_runs); ++run)
        results[run] = train(data, config, static_cast<std::uint64_t>(run), 1);
    return results;
}

RatingDistribution predict(std::span<const MmsbmModel> models, std::size_t u, std::size_t i,
                           const std::vector<double>& global_histogram, bool user_cold,
                           bool item_cold) {
    if (models.empty()) throw std::invalid_argument("predict needs at least one model");
    const MmsbmModel& m0 = models.front();
    const std::size_t S = m0.n_labels;
    user_cold = user_cold || u >= m0.n_users;
    item_cold = item_cold || i >= m0.n_items;

    RatingDistribution avg;
    avg.probs.assign(S, 0.0);
    if (user_cold && item_cold) {
        avg.probs = global_histogram;
        return avg;
    }
    for (const MmsbmModel& m : models) {
        RatingDistribution d;
        if (!user_cold && !item_cold) {
            d = m.predict_single(u, i);
        } else if (user_cold) {
            // Uniform membership over user groups.
            d.probs.assign(S, 0.0);
            for (std::size_t r = 0; r < S; ++r) {
                double p = 0.0;
                for (std::size_t k = 0; k < m.K; ++k)
                    for (std::size_t l = 0; l < m.L; ++l) p += m.et(i, l) * m.qr(r, k, l);
                d.probs[r] = p / static_cast<double>(m.K);
            }
        } else {
            d.probs.assign(S, 0.0);
            for (std::size_t r = 0; r < S; ++r) {
                double p = 0.0;
                for (std::size_t k = 0; k < m.K; ++k)
                    for (std::size_t l = 0; l < m.L; ++l) p += m.th(u, k) * m.qr(r, k, l);
                d.probs[r] = p / static_cast<double>(m.L);
            }
        }
        for (std::size_t r = 0; r < S; ++r) avg.probs[r] += d.probs[r];
    }
    for (double& p : avg.probs) p /= static_cast<double>(models.size());
    avg.normalize();
    return avg;
}

}  // namespace blockrec::mmsbm
