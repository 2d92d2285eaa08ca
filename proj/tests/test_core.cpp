#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <tuple>

#include "blockrec/distribution.hpp"
#include "blockrec/ratings_table.hpp"
#include "blockrec/synthetic.hpp"

using namespace blockrec;

TEST_CASE("rating scale invariants") {
    CHECK_THROWS(RatingScale({1.0}));
    CHECK_THROWS(RatingScale({2.0, 1.0}));
    CHECK_THROWS(RatingScale({1.0, 1.0}));
    auto s = RatingScale::integers(1, 5);
    CHECK(s.size() == 5);
    CHECK(s.value(0) == 1.0);
    CHECK(s.value(4) == 5.0);
    CHECK(s.index_of(3.0) == 2);
    CHECK(!s.index_of(6.0).has_value());
}

TEST_CASE("nearest label rounds half-way ties down") {
    auto s = RatingScale::integers(1, 5);
    CHECK(s.nearest_index(2.5) == 1);
    CHECK(s.nearest_index(2.6) == 2);
    CHECK(s.nearest_index(0.0) == 0);
    CHECK(s.nearest_index(9.0) == 4);
}

TEST_CASE("estimator_mode") {
    CHECK(estimator_mode({{0.1, 0.2, 0.7}}) == 2);
    CHECK(estimator_mode({{0.5, 0.5}}) == 0);
    CHECK(estimator_mode({{0.2, 0.2, 0.2, 0.2, 0.2}}) == 0);
}

TEST_CASE("estimator_median") {
    CHECK(estimator_median({{1.0, 0.0, 0.0}}) == 0);
    CHECK(estimator_median({{0.2, 0.2, 0.6}}) == 2);
    CHECK(estimator_median({{0.5, 0.5}}) == 0);
}

TEST_CASE("estimator_mean") {
    auto s = RatingScale::integers(1, 5);
    CHECK(estimator_mean({{0.0, 0.0, 0.0, 0.0, 1.0}}, s) == doctest::Approx(5.0));
    CHECK(estimator_mean({{0.2, 0.2, 0.2, 0.2, 0.2}}, s) == doctest::Approx(3.0));
    auto s2 = RatingScale::integers(1, 2);
    CHECK(estimator_mean({{0.5, 0.5}}, s2) == doctest::Approx(1.5));
}

TEST_CASE("estimators stay in range for random distributions") {
    auto s = RatingScale::integers(1, 5);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        RatingDistribution d;
        d.probs.resize(5);
        for (auto& p : d.probs) p = unif(rng);
        d.normalize();
        CHECK(d.valid());
        CHECK(estimator_mode(d) < 5);
        CHECK(estimator_median(d) < 5);
        double m = estimator_mean(d, s);
        CHECK(m >= 1.0);
        CHECK(m <= 5.0);
    }
}

TEST_CASE("ratings table adjacency round-trips the observation multiset") {
    auto s = RatingScale::integers(1, 5);
    std::vector<Observation> obs = {{0, 0, 0}, {0, 1, 4}, {1, 1, 2}, {2, 0, 3}};
    RatingsTable t(3, 2, s, obs);
    CHECK(t.n_observations() == 4);
    CHECK(t.degree_user(0) == 2);
    CHECK(t.degree_item(1) == 2);

    std::multiset<std::tuple<int, int, int>> original, from_users, from_items;
    for (const auto& o : obs) original.insert({o.user, o.item, o.rating});
    for (std::size_t u = 0; u < t.n_users(); ++u)
        for (const auto& [i, r] : t.by_user(u)) from_users.insert({(int)u, (int)i, (int)r});
    for (std::size_t i = 0; i < t.n_items(); ++i)
        for (const auto& [u, r] : t.by_item(i)) from_items.insert({(int)u, (int)i, (int)r});
    CHECK(from_users == original);
    CHECK(from_items == original);
}

TEST_CASE("builder resolves duplicates last-wins") {
    auto s = RatingScale::integers(1, 5);
    RatingsTableBuilder b(2, 2, s);
    b.add(0, 0, 1);
    b.add(0, 0, 4);
    b.add(1, 1, 2);
    CHECK(b.n_duplicates() == 1);
    auto t = std::move(b).build();
    CHECK(t.n_observations() == 2);
    CHECK(t.by_user(0)[0].second == 4);
}

static mmsbm::MmsbmModel one_block_point_mass(std::size_t n_users, std::size_t n_items,
                                              std::size_t n_labels, std::size_t label) {
    mmsbm::MmsbmModel m(n_users, n_items, 1, 1, n_labels);
    for (std::size_t u = 0; u < n_users; ++u) m.th(u, 0) = 1.0;
    for (std::size_t i = 0; i < n_items; ++i) m.et(i, 0) = 1.0;
    m.qr(label, 0, 0) = 1.0;
    return m;
}

TEST_CASE("synthetic: point-mass q gives constant ratings") {
    auto s = RatingScale::integers(1, 5);
    auto m = one_block_point_mass(10, 8, 5, 2);
    auto t = generate_synthetic(m, s, 0.7, 42);
    CHECK(t.n_observations() > 0);
    for (const auto& o : t.observations()) CHECK(o.rating == 2);
}

TEST_CASE("synthetic: one-hot memberships give block-constant ratings") {
    auto s = RatingScale::integers(1, 5);
    mmsbm::MmsbmModel m(6, 6, 2, 2, 5);
    for (std::size_t u = 0; u < 6; ++u) m.th(u, u % 2) = 1.0;
    for (std::size_t i = 0; i < 6; ++i) m.et(i, i % 2) = 1.0;
    // Deterministic per-block labels.
    std::size_t label[2][2] = {{0, 1}, {3, 4}};
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t l = 0; l < 2; ++l) m.qr(label[k][l], k, l) = 1.0;
    auto t = generate_synthetic(m, s, 1.0, 9);
    for (const auto& o : t.observations())
        CHECK(o.rating == label[o.user % 2][o.item % 2]);
}

TEST_CASE("synthetic: per-block rating frequencies match q within 3 sigma") {
    auto s = RatingScale::integers(1, 3);
    std::size_t n = 200;
    mmsbm::MmsbmModel m(n, n, 2, 2, 3);
    for (std::size_t u = 0; u < n; ++u) m.th(u, u % 2) = 1.0;
    for (std::size_t i = 0; i < n; ++i) m.et(i, i % 2) = 1.0;
    double q[2][2][3] = {{{0.7, 0.2, 0.1}, {0.1, 0.8, 0.1}},
                         {{0.3, 0.3, 0.4}, {0.2, 0.5, 0.3}}};
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t l = 0; l < 2; ++l)
            for (std::size_t r = 0; r < 3; ++r) m.qr(r, k, l) = q[k][l][r];
    auto t = generate_synthetic(m, s, 1.0, 123);
    REQUIRE(t.n_observations() == n * n);

    // Exact multinomial counting oracle: per block, empirical frequency
    // must sit within 3 binomial standard deviations of q.
    double counts[2][2][3] = {};
    double totals[2][2] = {};
    for (const auto& o : t.observations()) {
        counts[o.user % 2][o.item % 2][o.rating] += 1.0;
        totals[o.user % 2][o.item % 2] += 1.0;
    }
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t l = 0; l < 2; ++l)
            for (std::size_t r = 0; r < 3; ++r) {
                double p = q[k][l][r], nb = totals[k][l];
                double sigma = std::sqrt(p * (1 - p) / nb);
                CHECK(std::fabs(counts[k][l][r] / nb - p) < 3.0 * sigma + 1e-12);
            }
}

TEST_CASE("synthetic generator is deterministic for a fixed seed") {
    auto s = RatingScale::integers(1, 5);
    auto m = one_block_point_mass(20, 20, 5, 1);
    m.qr(1, 0, 0) = 0.5;
    m.qr(3, 0, 0) = 0.5;
    auto a = generate_synthetic(m, s, 0.3, 77);
    auto b = generate_synthetic(m, s, 0.3, 77);
    CHECK(a.observations() == b.observations());
}

TEST_CASE("synthetic rejects densities that cannot produce observations") {
    auto s = RatingScale::integers(1, 5);
    auto m = one_block_point_mass(2, 2, 5, 0);
    CHECK_THROWS(generate_synthetic(m, s, 0.0, 1));
    CHECK_THROWS(generate_synthetic(m, s, 1e-9, 1));
}
