#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "blockrec/mmsbm.hpp"
#include "blockrec/synthetic.hpp"

using namespace blockrec;
using mmsbm::EmAccumulators;
using mmsbm::MmsbmModel;

namespace {

MmsbmModel random_valid_model(std::size_t n_users, std::size_t n_items, std::size_t K,
                              std::size_t L, std::size_t S, std::uint64_t seed) {
    MmsbmModel m(n_users, n_items, K, L, S);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.1, 1.0);
    auto norm_row = [](double* row, std::size_t n) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += row[j];
        for (std::size_t j = 0; j < n; ++j) row[j] /= s;
    };
    for (auto& x : m.theta) x = unif(rng);
    for (auto& x : m.eta) x = unif(rng);
    for (auto& x : m.q) x = unif(rng);
    for (std::size_t u = 0; u < n_users; ++u) norm_row(&m.theta[u * K], K);
    for (std::size_t i = 0; i < n_items; ++i) norm_row(&m.eta[i * L], L);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t l = 0; l < L; ++l) {
            double s = 0.0;
            for (std::size_t r = 0; r < S; ++r) s += m.qr(r, k, l);
            for (std::size_t r = 0; r < S; ++r) m.qr(r, k, l) /= s;
        }
    return m;
}

// Straightforward oracle: direct summation of the likelihood, nothing
// shared with the streaming implementation.
double oracle_log_likelihood(const MmsbmModel& m, const RatingsTable& data) {
    double ll = 0.0;
    for (const auto& o : data.observations()) {
        double p = 0.0;
        for (std::size_t k = 0; k < m.K; ++k)
            for (std::size_t l = 0; l < m.L; ++l)
                p += m.th(o.user, k) * m.et(o.item, l) * m.qr(o.rating, k, l);
        ll += std::log(p);
    }
    return ll;
}

// Dense oracle for one full EM iteration: materializes every omega and
// applies the update equations literally.
MmsbmModel oracle_em_iteration(const MmsbmModel& m, const RatingsTable& data) {
    std::size_t K = m.K, L = m.L, S = m.n_labels;
    std::vector<std::vector<double>> omega(data.n_observations(),
                                           std::vector<double>(K * L, 0.0));
    for (std::size_t n = 0; n < data.n_observations(); ++n) {
        const auto& o = data.observations()[n];
        double denom = 0.0;
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t l = 0; l < L; ++l) {
                omega[n][k * L + l] = m.th(o.user, k) * m.et(o.item, l) * m.qr(o.rating, k, l);
                denom += omega[n][k * L + l];
            }
        for (auto& w : omega[n]) w /= denom;
    }
    MmsbmModel out(m.n_users, m.n_items, K, L, S);
    for (std::size_t n = 0; n < data.n_observations(); ++n) {
        const auto& o = data.observations()[n];
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t l = 0; l < L; ++l) {
                out.th(o.user, k) += omega[n][k * L + l];
                out.et(o.item, l) += omega[n][k * L + l];
                out.qr(o.rating, k, l) += omega[n][k * L + l];
            }
    }
    for (std::size_t u = 0; u < m.n_users; ++u)
        for (std::size_t k = 0; k < K; ++k)
            out.th(u, k) /= data.degree_user(u) ? data.degree_user(u) : 1;
    for (std::size_t i = 0; i < m.n_items; ++i)
        for (std::size_t l = 0; l < L; ++l)
            out.et(i, l) /= data.degree_item(i) ? data.degree_item(i) : 1;
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t l = 0; l < L; ++l) {
            double total = 0.0;
            for (std::size_t r = 0; r < S; ++r) total += out.qr(r, k, l);
            for (std::size_t r = 0; r < S; ++r)
                out.qr(r, k, l) = total > 0 ? out.qr(r, k, l) / total : 1.0 / S;
        }
    return out;
}

RatingsTable toy_table() {
    // 3 users x 3 items, 6 observations on a 1..5 scale.
    return RatingsTable(3, 3, RatingScale::integers(1, 5),
                        {{0, 0, 0}, {0, 1, 4}, {1, 0, 2}, {1, 2, 4}, {2, 1, 1}, {2, 2, 3}});
}

}  // namespace

TEST_CASE("log likelihood: point mass gives zero") {
    RatingsTable data(1, 1, RatingScale::integers(1, 5), {{0, 0, 3}});
    MmsbmModel m(1, 1, 1, 1, 5);
    m.th(0, 0) = 1.0;
    m.et(0, 0) = 1.0;
    m.qr(3, 0, 0) = 1.0;
    CHECK(mmsbm::log_likelihood(m, data) == doctest::Approx(0.0));
}

TEST_CASE("log likelihood: uniform q forces n log(1/5)") {
    std::vector<Observation> obs;
    for (std::uint32_t n = 0; n < 10; ++n) obs.push_back({n % 3, n % 3, (std::uint16_t)(n % 5)});
    RatingsTable data(3, 3, RatingScale::integers(1, 5), obs);
    MmsbmModel m(3, 3, 1, 1, 5);
    for (std::size_t u = 0; u < 3; ++u) m.th(u, 0) = 1.0;
    for (std::size_t i = 0; i < 3; ++i) m.et(i, 0) = 1.0;
    for (std::size_t r = 0; r < 5; ++r) m.qr(r, 0, 0) = 0.2;
    CHECK(mmsbm::log_likelihood(m, data) == doctest::Approx(10.0 * std::log(0.2)));
}

TEST_CASE("log likelihood matches brute-force oracle") {
    auto data = toy_table();
    auto m = random_valid_model(3, 3, 2, 3, 5, 11);
    CHECK(mmsbm::log_likelihood(m, data) == doctest::Approx(oracle_log_likelihood(m, data)).epsilon(1e-12));
    CHECK(mmsbm::log_likelihood(m, data) <= 0.0);
}

TEST_CASE("log likelihood signals zero-probability observations") {
    RatingsTable data(1, 1, RatingScale::integers(1, 5), {{0, 0, 2}});
    MmsbmModel m(1, 1, 1, 1, 5);
    m.th(0, 0) = 1.0;
    m.et(0, 0) = 1.0;
    m.qr(0, 0, 0) = 1.0;  // all mass on the wrong label
    CHECK_THROWS_AS((void)mmsbm::log_likelihood(m, data), mmsbm::DegenerateModelError);
}

TEST_CASE("expectation step: K=L=1 gives omega = 1 per observation") {
    auto data = toy_table();
    MmsbmModel m(3, 3, 1, 1, 5);
    for (std::size_t u = 0; u < 3; ++u) m.th(u, 0) = 1.0;
    for (std::size_t i = 0; i < 3; ++i) m.et(i, 0) = 1.0;
    for (std::size_t r = 0; r < 5; ++r) m.qr(r, 0, 0) = 0.2;
    EmAccumulators acc;
    acc.resize(m);
    mmsbm::expectation_step(m, data, acc, 0, data.n_observations());
    // Each observation contributes omega = 1 to its user and item.
    CHECK(acc.theta_num[0] == doctest::Approx(2.0));  // user 0 has degree 2
    CHECK(acc.eta_num[0] == doctest::Approx(2.0));
    double total = 0.0;
    for (double x : acc.q_num) total += x;
    CHECK(total == doctest::Approx(6.0));
}

TEST_CASE("expectation step: omega proportional to theta*eta*q (2x2 closed form)") {
    RatingsTable data(1, 1, RatingScale::integers(1, 5), {{0, 0, 2}});
    MmsbmModel m(1, 1, 2, 2, 5);
    m.th(0, 0) = 0.5;
    m.th(0, 1) = 0.5;
    m.et(0, 0) = 0.5;
    m.et(0, 1) = 0.5;
    double q[2][2] = {{0.2, 0.4}, {0.1, 0.3}};
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t l = 0; l < 2; ++l) {
            m.qr(2, k, l) = q[k][l];
            m.qr(0, k, l) = 1.0 - q[k][l];  // keep fibers normalized
        }
    EmAccumulators acc;
    acc.resize(m);
    mmsbm::expectation_step(m, data, acc, 0, 1);
    // omega(k,l) = 0.25 q_kl / (0.25 * sum q) = q_kl / 1.0
    double total = 0.2 + 0.4 + 0.1 + 0.3;
    CHECK(acc.q_num[(2 * 2 + 0) * 2 + 1] == doctest::Approx(0.4 / total));
    CHECK(acc.q_num[(2 * 2 + 0) * 2 + 0] == doctest::Approx(0.2 / total));
    CHECK(acc.q_num[(2 * 2 + 1) * 2 + 0] == doctest::Approx(0.1 / total));
    CHECK(acc.q_num[(2 * 2 + 1) * 2 + 1] == doctest::Approx(0.3 / total));
    // Responsibilities for one observation sum to one.
    double s = acc.theta_num[0] + acc.theta_num[1];
    CHECK(s == doctest::Approx(1.0));
}

TEST_CASE("maximization step: K=L=1 collapses to global histogram") {
    auto data = toy_table();
    MmsbmModel m(3, 3, 1, 1, 5);
    for (std::size_t u = 0; u < 3; ++u) m.th(u, 0) = 1.0;
    for (std::size_t i = 0; i < 3; ++i) m.et(i, 0) = 1.0;
    for (std::size_t r = 0; r < 5; ++r) m.qr(r, 0, 0) = 0.2;
    EmAccumulators acc;
    acc.resize(m);
    mmsbm::expectation_step(m, data, acc, 0, data.n_observations());
    auto out = mmsbm::maximization_step(acc, data, m);
    auto hist = data.rating_histogram();
    for (std::size_t u = 0; u < 3; ++u) CHECK(out.th(u, 0) == doctest::Approx(1.0));
    for (std::size_t r = 0; r < 5; ++r) CHECK(out.qr(r, 0, 0) == doctest::Approx(hist[r]));
}

TEST_CASE("maximization step: theta is omega sum over degree") {
    // User 0 with degree 2 and per-k omega sums (1.5, 0.5).
    RatingsTable data(1, 2, RatingScale::integers(1, 2), {{0, 0, 0}, {0, 1, 1}});
    MmsbmModel dims(1, 2, 2, 1, 2);
    EmAccumulators acc;
    acc.resize(dims);
    acc.theta_num = {1.5, 0.5};
    acc.eta_num = {1.0, 1.0};
    acc.q_num = {0.9, 0.1, 0.6, 0.4};
    auto out = mmsbm::maximization_step(acc, data, dims);
    CHECK(out.th(0, 0) == doctest::Approx(0.75));
    CHECK(out.th(0, 1) == doctest::Approx(0.25));
}

TEST_CASE("one fused EM iteration matches the dense oracle") {
    auto data = RatingsTable(2, 2, RatingScale::integers(1, 5),
                             {{0, 0, 0}, {0, 1, 4}, {1, 0, 2}, {1, 1, 4}});
    auto m = random_valid_model(2, 2, 2, 2, 5, 3);
    auto expected = oracle_em_iteration(m, data);
    auto actual = m;
    mmsbm::em_iteration_serial(actual, data);
    for (std::size_t j = 0; j < expected.theta.size(); ++j)
        CHECK(actual.theta[j] == doctest::Approx(expected.theta[j]).epsilon(1e-12));
    for (std::size_t j = 0; j < expected.eta.size(); ++j)
        CHECK(actual.eta[j] == doctest::Approx(expected.eta[j]).epsilon(1e-12));
    for (std::size_t j = 0; j < expected.q.size(); ++j)
        CHECK(actual.q[j] == doctest::Approx(expected.q[j]).epsilon(1e-12));
}

TEST_CASE("parallel EM pass equals serial reference") {
    auto m = random_valid_model(30, 25, 3, 2, 5, 5);
    auto params = random_valid_model(30, 25, 2, 2, 5, 6);
    auto data = generate_synthetic(params, RatingScale::integers(1, 5), 0.5, 17);
    auto serial = m, parallel = m;
    mmsbm::em_iteration_serial(serial, data);
    mmsbm::em_iteration_parallel(parallel, data, 4);
    for (std::size_t j = 0; j < serial.theta.size(); ++j)
        CHECK(parallel.theta[j] == doctest::Approx(serial.theta[j]).epsilon(1e-12));
    for (std::size_t j = 0; j < serial.q.size(); ++j)
        CHECK(parallel.q[j] == doctest::Approx(serial.q[j]).epsilon(1e-12));
}

TEST_CASE("normalization families hold after every M-step") {
    auto params = random_valid_model(20, 20, 2, 2, 5, 8);
    auto data = generate_synthetic(params, RatingScale::integers(1, 5), 0.6, 21);
    auto m = mmsbm::random_init(data, 3, 3, 99);
    for (int iter = 0; iter < 10; ++iter) {
        mmsbm::em_iteration_serial(m, data);
        CHECK(m.max_normalization_error() < 1e-9);
    }
}

TEST_CASE("EM monotonicity on synthetic data") {
    auto params = random_valid_model(40, 40, 3, 3, 5, 1);
    auto data = generate_synthetic(params, RatingScale::integers(1, 5), 0.4, 33);
    mmsbm::EmConfig cfg;
    cfg.K = 4;
    cfg.L = 4;
    cfg.max_iters = 100;
    cfg.check_every = 5;
    cfg.seed = 4;
    auto result = mmsbm::train(data, cfg);
    for (std::size_t j = 1; j < result.loglik_trace.size(); ++j)
        CHECK(result.loglik_trace[j] >=
              result.loglik_trace[j - 1] - 1e-9 * std::fabs(result.loglik_trace[j - 1]));
}

TEST_CASE("training on a single-label dataset drives logL to zero") {
    std::vector<Observation> obs;
    for (std::uint32_t u = 0; u < 5; ++u)
        for (std::uint32_t i = 0; i < 5; ++i) obs.push_back({u, i, 2});
    RatingsTable data(5, 5, RatingScale::integers(1, 5), obs);
    mmsbm::EmConfig cfg;
    cfg.K = 2;
    cfg.L = 2;
    cfg.max_iters = 50;
    auto result = mmsbm::train(data, cfg);
    CHECK(result.loglik_trace.back() == doctest::Approx(0.0).epsilon(1e-9));
    auto d = result.model.predict_single(0, 0);
    CHECK(d.probs[2] == doctest::Approx(1.0));
}

TEST_CASE("group-label permutation leaves likelihood and predictions unchanged") {
    auto data = toy_table();
    auto m = random_valid_model(3, 3, 3, 2, 5, 14);
    // Permute user groups (0,1,2) -> (2,0,1) in theta and the k axis of q.
    std::size_t perm[3] = {2, 0, 1};
    MmsbmModel p = m;
    for (std::size_t u = 0; u < 3; ++u)
        for (std::size_t k = 0; k < 3; ++k) p.th(u, perm[k]) = m.th(u, k);
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t k = 0; k < 3; ++k)
            for (std::size_t l = 0; l < 2; ++l) p.qr(r, perm[k], l) = m.qr(r, k, l);
    CHECK(mmsbm::log_likelihood(p, data) ==
          doctest::Approx(mmsbm::log_likelihood(m, data)).epsilon(1e-12));
    for (std::size_t u = 0; u < 3; ++u)
        for (std::size_t i = 0; i < 3; ++i) {
            auto a = m.predict_single(u, i), b = p.predict_single(u, i);
            for (std::size_t r = 0; r < 5; ++r)
                CHECK(b.probs[r] == doctest::Approx(a.probs[r]).epsilon(1e-12));
        }
}

TEST_CASE("planted K=L=2 model is recovered up to group permutation") {
    std::size_t n = 300;
    MmsbmModel planted(n, n, 2, 2, 5);
    std::mt19937_64 rng(2);
    for (std::size_t u = 0; u < n; ++u) planted.th(u, u % 2) = 1.0;
    for (std::size_t i = 0; i < n; ++i) planted.et(i, i % 2) = 1.0;
    double q[2][2][5] = {{{0.8, 0.1, 0.05, 0.03, 0.02}, {0.05, 0.1, 0.7, 0.1, 0.05}},
                         {{0.02, 0.03, 0.05, 0.2, 0.7}, {0.25, 0.25, 0.2, 0.15, 0.15}}};
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t l = 0; l < 2; ++l)
            for (std::size_t r = 0; r < 5; ++r) planted.qr(r, k, l) = q[k][l][r];
    auto data = generate_synthetic(planted, RatingScale::integers(1, 5), 1.0, 55);

    mmsbm::EmConfig cfg;
    cfg.K = 2;
    cfg.L = 2;
    cfg.max_iters = 300;
    cfg.seed = 10;
    auto result = mmsbm::train(data, cfg);

    // Search all K! * L! = 4 simultaneous permutations.
    double best = 1e9;
    for (int pk = 0; pk < 2; ++pk)
        for (int pl = 0; pl < 2; ++pl) {
            double err = 0.0;
            for (std::size_t k = 0; k < 2; ++k)
                for (std::size_t l = 0; l < 2; ++l)
                    for (std::size_t r = 0; r < 5; ++r)
                        err += std::fabs(result.model.qr(r, pk ? 1 - k : k, pl ? 1 - l : l) -
                                         q[k][l][r]);
            best = std::min(best, err / 20.0);
        }
    CHECK(best < 0.05);
}

TEST_CASE("predict: K=L=1 returns the q fiber; averaging is uniform") {
    MmsbmModel a(2, 2, 1, 1, 5), b(2, 2, 1, 1, 5);
    for (auto* m : {&a, &b})
        for (std::size_t u = 0; u < 2; ++u) {
            m->th(u, 0) = 1.0;
            m->et(u, 0) = 1.0;
        }
    a.qr(0, 0, 0) = 1.0;
    b.qr(4, 0, 0) = 1.0;
    std::vector<double> hist(5, 0.2);

    std::vector<MmsbmModel> one = {a};
    auto d = mmsbm::predict(one, 0, 0, hist);
    CHECK(d.probs[0] == doctest::Approx(1.0));

    std::vector<MmsbmModel> two = {a, b};
    auto avg = mmsbm::predict(two, 0, 0, hist);
    CHECK(avg.probs[0] == doctest::Approx(0.5));
    CHECK(avg.probs[4] == doctest::Approx(0.5));
    CHECK(avg.valid());
}

TEST_CASE("predict: one-hot memberships select the q column") {
    MmsbmModel m(2, 2, 2, 2, 3);
    m.th(0, 1) = 1.0;
    m.th(1, 0) = 1.0;
    m.et(0, 0) = 1.0;
    m.et(1, 1) = 1.0;
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t l = 0; l < 2; ++l) {
            m.qr(0, k, l) = 0.1 * (k + 1);
            m.qr(1, k, l) = 0.2;
            m.qr(2, k, l) = 1.0 - 0.2 - 0.1 * (k + 1);
        }
    auto d = m.predict_single(0, 1);  // groups (1, 1)
    CHECK(d.probs[0] == doctest::Approx(m.qr(0, 1, 1)));
    CHECK(d.probs[2] == doctest::Approx(m.qr(2, 1, 1)));
}

TEST_CASE("predict: cold-start fallbacks are total and valid") {
    auto params = random_valid_model(10, 10, 2, 2, 5, 20);
    auto data = generate_synthetic(params, RatingScale::integers(1, 5), 0.8, 3);
    mmsbm::EmConfig cfg;
    cfg.K = 2;
    cfg.L = 2;
    cfg.max_iters = 20;
    auto result = mmsbm::train(data, cfg);
    std::vector<MmsbmModel> models;
    models.push_back(std::move(result.model));
    auto hist = data.rating_histogram();
    auto d1 = mmsbm::predict(models, 0, 0, hist, true, false);
    auto d2 = mmsbm::predict(models, 0, 0, hist, false, true);
    auto d3 = mmsbm::predict(models, 0, 0, hist, true, true);
    CHECK(d1.valid());
    CHECK(d2.valid());
    for (std::size_t r = 0; r < 5; ++r) CHECK(d3.probs[r] == doctest::Approx(hist[r]));
}

TEST_CASE("train is deterministic for a fixed seed and run index") {
    auto params = random_valid_model(15, 15, 2, 2, 5, 30);
    auto data = generate_synthetic(params, RatingScale::integers(1, 5), 0.5, 41);
    mmsbm::EmConfig cfg;
    cfg.K = 3;
    cfg.L = 2;
    cfg.max_iters = 30;
    cfg.seed = 123;
    auto a = mmsbm::train(data, cfg, 7);
    auto b = mmsbm::train(data, cfg, 7);
    CHECK(a.model.theta == b.model.theta);
    CHECK(a.model.eta == b.model.eta);
    CHECK(a.model.q == b.model.q);
}
