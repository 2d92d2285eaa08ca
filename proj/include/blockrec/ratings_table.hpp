#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "blockrec/rating_scale.hpp"

namespace blockrec {

struct Observation {
    std::uint32_t user;
    std::uint32_t item;
    std::uint16_t rating;  // index into the scale

    bool operator==(const Observation&) const = default;
};

// Sparse bipartite ratings data: flat observation list plus per-user and
// per-item adjacency. Immutable once built; safe to share across threads.
class RatingsTable {
public:
    RatingsTable(std::size_t n_users, std::size_t n_items, RatingScale scale,
                 std::vector<Observation> observations)
        : n_users_(n_users),
          n_items_(n_items),
          scale_(std::move(scale)),
          observations_(std::move(observations)),
          by_user_(n_users),
          by_item_(n_items) {
        for (const auto& o : observations_) {
            if (o.user >= n_users_ || o.item >= n_items_)
                throw std::out_of_range("observation index out of range");
            if (o.rating >= scale_.size())
                throw std::out_of_range("rating index outside scale");
            by_user_[o.user].push_back({o.item, o.rating});
            by_item_[o.item].push_back({o.user, o.rating});
        }
    }

    std::size_t n_users() const { return n_users_; }
    std::size_t n_items() const { return n_items_; }
    std::size_t n_observations() const { return observations_.size(); }
    const RatingScale& scale() const { return scale_; }
    const std::vector<Observation>& observations() const { return observations_; }

    // (item, rating) pairs for one user; (user, rating) pairs for one item.
    const std::vector<std::pair<std::uint32_t, std::uint16_t>>& by_user(std::size_t u) const {
        return by_user_[u];
    }
    const std::vector<std::pair<std::uint32_t, std::uint16_t>>& by_item(std::size_t i) const {
        return by_item_[i];
    }

    std::size_t degree_user(std::size_t u) const { return by_user_[u].size(); }
    std::size_t degree_item(std::size_t i) const { return by_item_[i].size(); }

    // Empirical rating histogram over all observations, normalized.
    std::vector<double> rating_histogram() const {
        std::vector<double> h(scale_.size(), 0.0);
        for (const auto& o : observations_) h[o.rating] += 1.0;
        if (!observations_.empty())
            for (double& x : h) x /= static_cast<double>(observations_.size());
        return h;
    }

private:
    std::size_t n_users_;
    std::size_t n_items_;
    RatingScale scale_;
    std::vector<Observation> observations_;
    std::vector<std::vector<std::pair<std::uint32_t, std::uint16_t>>> by_user_;
    std::vector<std::vector<std::pair<std::uint32_t, std::uint16_t>>> by_item_;
};

// Accumulates raw observations with last-wins deduplication of repeated
// (user, item) pairs; counts the duplicates so ingestion can warn.
class RatingsTableBuilder {
public:
    RatingsTableBuilder(std::size_t n_users, std::size_t n_items, RatingScale scale)
        : n_users_(n_users), n_items_(n_items), scale_(std::move(scale)) {}

    void add(std::uint32_t user, std::uint32_t item, std::uint16_t rating) {
        std::uint64_t key = static_cast<std::uint64_t>(user) * n_items_ + item;
        auto [it, inserted] = index_.try_emplace(key, observations_.size());
        if (inserted) {
            observations_.push_back({user, item, rating});
        } else {
            observations_[it->second].rating = rating;  // last occurrence wins
            ++n_duplicates_;
        }
    }

    std::size_t n_duplicates() const { return n_duplicates_; }

    RatingsTable build() && {
        return RatingsTable(n_users_, n_items_, std::move(scale_), std::move(observations_));
    }

private:
    std::size_t n_users_;
    std::size_t n_items_;
    RatingScale scale_;
    std::vector<Observation> observations_;
    std::unordered_map<std::uint64_t, std::size_t> index_;
    std::size_t n_duplicates_ = 0;
};

}  // namespace blockrec
