#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "blockrec/distribution.hpp"
#include "blockrec/ratings_table.hpp"

namespace blockrec::sbm {

struct McmcConfig {
    std::size_t max_groups_users = 0;  // 0 -> ceil(sqrt(n_users))
    std::size_t max_groups_items = 0;  // 0 -> ceil(sqrt(n_items))
    std::size_t burn_in_sweeps = 200;
    std::size_t n_samples = 100;
    std::size_t sample_stride_sweeps = 5;
    std::size_t n_chains = 1;
    std::uint64_t seed = 0;
};

// ln(n!) via a memoized lgamma table; falls back to lgamma beyond it.
class LogFactorial {
public:
    explicit LogFactorial(std::size_t max_n) {
        table_.resize(max_n + 1);
        for (std::size_t n = 0; n <= max_n; ++n)
            table_[n] = std::lgamma(static_cast<double>(n) + 1.0);
    }
    double operator()(std::size_t n) const {
        return n < table_.size() ? table_[n] : std::lgamma(static_cast<double>(n) + 1.0);
    }

private:
    std::vector<double> table_;
};

// Hard partition of users and items into groups, with the per-block
// rating counts and the cached partition energy. One chain mutates one
// state; independent chains never share a state.
class SbmState {
public:
    SbmState(const RatingsTable& data, std::size_t max_groups_users,
             std::size_t max_groups_items, std::mt19937_64& rng);

    struct Move {
        bool valid = false;
        bool is_user = false;
        std::uint32_t node = 0;
        std::uint32_t from = 0;
        std::uint32_t to = 0;
        double delta_h = 0.0;
    };

    double energy() const { return energy_; }
    // Full recomputation from counts; the cached value must track it.
    double recompute_energy() const;

    Move propose(std::mt19937_64& rng);
    void apply(const Move& move);
    // Metropolis step: propose, accept with min(1, exp(-delta_h)).
    bool step(std::mt19937_64& rng);
    void sweep(std::mt19937_64& rng, std::size_t* accepted = nullptr);

    std::size_t max_groups_users() const { return cap_u_; }
    std::size_t max_groups_items() const { return cap_i_; }
    std::uint32_t user_group(std::size_t u) const { return user_group_[u]; }
    std::uint32_t item_group(std::size_t i) const { return item_group_[i]; }
    std::size_t n_nonempty_user_groups() const;
    std::size_t n_nonempty_item_groups() const;

    std::uint32_t block_total(std::size_t a, std::size_t b) const {
        return n_[a * cap_i_ + b];
    }
    std::uint32_t block_count(std::size_t r, std::size_t a, std::size_t b) const {
        return nr_[(r * cap_u_ + a) * cap_i_ + b];
    }

    bool counts_consistent() const;

    // Laplace-smoothed posterior predictive of this single state.
    void accumulate_query(std::size_t a, std::size_t b, std::vector<double>& probs) const;

private:
    double block_energy(std::size_t a, std::size_t b) const;

    const RatingsTable* data_;
    std::size_t cap_u_, cap_i_, n_labels_;
    std::vector<std::uint32_t> user_group_;
    std::vector<std::uint32_t> item_group_;
    std::vector<std::uint32_t> user_group_size_;
    std::vector<std::uint32_t> item_group_size_;
    std::vector<std::uint32_t> n_;   // cap_u x cap_i
    std::vector<std::uint32_t> nr_;  // S x cap_u x cap_i
    double energy_ = 0.0;
    LogFactorial lf_;

    // Scratch for incremental delta-H (per-opposite-group counts of the
    // moved node's ratings).
    std::vector<std::uint32_t> scratch_total_;
    std::vector<std::uint32_t> scratch_label_;
    std::vector<std::uint32_t> scratch_touched_;
};

struct McmcDiagnostics {
    double acceptance_rate = 0.0;
    std::vector<double> energy_trace;  // energy at each collected sample
};

// Runs n_chains independent chains (parallel when OpenMP is enabled),
// averaging the per-query Laplace-smoothed predictive over all collected
// samples. Query nodes out of range are assigned a uniformly random
// group per sample.
std::vector<RatingDistribution> sample_predictive(
    const RatingsTable& data, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& queries,
    const McmcConfig& config, McmcDiagnostics* diagnostics = nullptr);

}  // namespace blockrec::sbm
