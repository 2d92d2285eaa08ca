#include "blockrec/sbm.hpp"

#include <algorithm>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "blockrec/rng.hpp"

namespace blockrec::sbm {

namespace {
std::size_t default_cap(std::size_t requested, std::size_t n_nodes) {
    std::size_t cap = requested;
    if (cap == 0)
        cap = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_nodes))));
    return std::clamp<std::size_t>(cap, 1, std::max<std::size_t>(n_nodes, 1));
}
}  // namespace

SbmState::SbmState(const RatingsTable& data, std::size_t max_groups_users,
                   std::size_t max_groups_items, std::mt19937_64& rng)
    : data_(&data),
      cap_u_(default_cap(max_groups_users, data.n_users())),
      cap_i_(default_cap(max_groups_items, data.n_items())),
      n_labels_(data.scale().size()),
      user_group_(data.n_users()),
      item_group_(data.n_items()),
      user_group_size_(cap_u_, 0),
      item_group_size_(cap_i_, 0),
      n_(cap_u_ * cap_i_, 0),
      nr_(n_labels_ * cap_u_ * cap_i_, 0),
      lf_(data.n_observations() + n_labels_),
      scratch_total_(cap_i_ > cap_u_ ? cap_i_ : cap_u_, 0),
      scratch_label_(n_labels_ * (cap_i_ > cap_u_ ? cap_i_ : cap_u_), 0) {
    std::uniform_int_distribution<std::uint32_t> pick_u(0, static_cast<std::uint32_t>(cap_u_ - 1));
    std::uniform_int_distribution<std::uint32_t> pick_i(0, static_cast<std::uint32_t>(cap_i_ - 1));
    for (auto& g : user_group_) g = pick_u(rng);
    for (auto& g : item_group_) g = pick_i(rng);
    for (std::size_t u = 0; u < user_group_.size(); ++u) ++user_group_size_[user_group_[u]];
    for (std::size_t i = 0; i < item_group_.size(); ++i) ++item_group_size_[item_group_[i]];
    for (const auto& o : data.observations()) {
        std::size_t a = user_group_[o.user], b = item_group_[o.item];
        ++n_[a * cap_i_ + b];
        ++nr_[(static_cast<std::size_t>(o.rating) * cap_u_ + a) * cap_i_ + b];
    }
    energy_ = recompute_energy();
}

double SbmState::block_energy(std::size_t a, std::size_t b) const {
    std::size_t total = n_[a * cap_i_ + b];
    double h = lf_(total + n_labels_ - 1);
    for (std::size_t r = 0; r < n_labels_; ++r)
        h -= lf_(nr_[(r * cap_u_ + a) * cap_i_ + b]);
    return h;
}

double SbmState::recompute_energy() const {
    double h = 0.0;
    for (std::size_t a = 0; a < cap_u_; ++a)
        for (std::size_t b = 0; b < cap_i_; ++b) h += block_energy(a, b);
    return h;
}

std::size_t SbmState::n_nonempty_user_groups() const {
    std::size_t g = 0;
    for (auto s : user_group_size_) g += s > 0;
    return g;
}

std::size_t SbmState::n_nonempty_item_groups() const {
    std::size_t g = 0;
    for (auto s : item_group_size_) g += s > 0;
    return g;
}

bool SbmState::counts_consistent() const {
    std::vector<std::uint32_t> n(n_.size(), 0), nr(nr_.size(), 0);
    for (const auto& o : data_->observations()) {
        std::size_t a = user_group_[o.user], b = item_group_[o.item];
        ++n[a * cap_i_ + b];
        ++nr[(static_cast<std::size_t>(o.rating) * cap_u_ + a) * cap_i_ + b];
    }
    return n == n_ && nr == nr_;
}

SbmState::Move SbmState::propose(std::mt19937_64& rng) {
    Move move;
    const std::size_t n_users = user_group_.size(), n_items = item_group_.size();
    bool users_movable = cap_u_ > 1, items_movable = cap_i_ > 1;
    std::size_t pool = (users_movable ? n_users : 0) + (items_movable ? n_items : 0);
    if (pool == 0) return move;  // fully pinned partition space

    std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
    std::size_t idx = pick(rng);
    move.valid = true;
    move.is_user = users_movable && idx < n_users;
    std::size_t cap, other_cap;
    const std::vector<std::pair<std::uint32_t, std::uint16_t>>* adjacency;
    const std::vector<std::uint32_t>* other_group;
    if (move.is_user) {
        move.node = static_cast<std::uint32_t>(idx);
        move.from = user_group_[move.node];
        cap = cap_u_;
        other_cap = cap_i_;
        adjacency = &data_->by_user(move.node);
        other_group = &item_group_;
    } else {
        move.node = static_cast<std::uint32_t>(idx - (users_movable ? n_users : 0));
        move.from = item_group_[move.node];
        cap = cap_i_;
        other_cap = cap_u_;
        adjacency = &data_->by_item(move.node);
        other_group = &user_group_;
    }
    // Uniform target group, never the current one.
    std::uniform_int_distribution<std::uint32_t> pick_g(0, static_cast<std::uint32_t>(cap - 2));
    move.to = pick_g(rng);
    if (move.to >= move.from) ++move.to;

    // Per-opposite-group counts of the node's ratings; only those blocks
    // change energy.
    scratch_touched_.clear();
    for (const auto& [nbr, r] : *adjacency) {
        std::uint32_t g = (*other_group)[nbr];
        if (scratch_total_[g] == 0) scratch_touched_.push_back(g);
        ++scratch_total_[g];
        ++scratch_label_[static_cast<std::size_t>(r) * other_cap + g];
    }

    double dh = 0.0;
    for (std::uint32_t g : scratch_touched_) {
        std::size_t a_from, b_from, a_to, b_to;
        if (move.is_user) {
            a_from = move.from; b_from = g;
            a_to = move.to;     b_to = g;
        } else {
            a_from = g; b_from = move.from;
            a_to = g;   b_to = move.to;
        }
        std::uint32_t c = scratch_total_[g];
        // Old contributions of the two touched blocks.
        dh -= block_energy(a_from, b_from);
        dh -= block_energy(a_to, b_to);
        // New contributions after shifting c ratings from one to the other.
        std::uint32_t tot_from = n_[a_from * cap_i_ + b_from] - c;
        std::uint32_t tot_to = n_[a_to * cap_i_ + b_to] + c;
        double h_from = lf_(tot_from + n_labels_ - 1);
        double h_to = lf_(tot_to + n_labels_ - 1);
        for (std::size_t r = 0; r < n_labels_; ++r) {
            std::uint32_t cr = scratch_label_[r * other_cap + g];
            h_from -= lf_(nr_[(r * cap_u_ + a_from) * cap_i_ + b_from] - cr);
            h_to -= lf_(nr_[(r * cap_u_ + a_to) * cap_i_ + b_to] + cr);
        }
        dh += h_from + h_to;
    }
    move.delta_h = dh;

    // Reset scratch for the next proposal.
    for (std::uint32_t g : scratch_touched_) {
        scratch_total_[g] = 0;
        for (std::size_t r = 0; r < n_labels_; ++r) scratch_label_[r * other_cap + g] = 0;
    }
    return move;
}

void SbmState::apply(const Move& move) {
    if (!move.valid) return;
    const auto& adjacency = move.is_user ? data_->by_user(move.node) : data_->by_item(move.node);
    for (const auto& [nbr, r] : adjacency) {
        std::size_t a_from, b_from, a_to, b_to;
        if (move.is_user) {
            std::uint32_t g = item_group_[nbr];
            a_from = move.from; b_from = g;
            a_to = move.to;     b_to = g;
        } else {
            std::uint32_t g = user_group_[nbr];
            a_from = g; b_from = move.from;
            a_to = g;   b_to = move.to;
        }
        --n_[a_from * cap_i_ + b_from];
        ++n_[a_to * cap_i_ + b_to];
        --nr_[(static_cast<std::size_t>(r) * cap_u_ + a_from) * cap_i_ + b_from];
        ++nr_[(static_cast<std::size_t>(r) * cap_u_ + a_to) * cap_i_ + b_to];
    }
    if (move.is_user) {
        user_group_[move.node] = move.to;
        --user_group_size_[move.from];
        ++user_group_size_[move.to];
    } else {
        item_group_[move.node] = move.to;
        --item_group_size_[move.from];
        ++item_group_size_[move.to];
    }
    energy_ += move.delta_h;
}

bool SbmState::step(std::mt19937_64& rng) {
    Move move = propose(rng);
    if (!move.valid) return false;
    if (move.delta_h > 0.0) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        if (unif(rng) >= std::exp(-move.delta_h)) return false;
    }
    apply(move);
    return true;
}

void SbmState::sweep(std::mt19937_64& rng, std::size_t* accepted) {
    std::size_t n_moves = user_group_.size() + item_group_.size();
    for (std::size_t j = 0; j < n_moves; ++j)
        if (step(rng) && accepted) ++*accepted;
}

void SbmState::accumulate_query(std::size_t a, std::size_t b, std::vector<double>& probs) const {
    double denom = static_cast<double>(n_[a * cap_i_ + b]) + static_cast<double>(n_labels_);
    for (std::size_t r = 0; r < n_labels_; ++r)
        probs[r] += (static_cast<double>(nr_[(r * cap_u_ + a) * cap_i_ + b]) + 1.0) / denom;
}

std::vector<RatingDistribution> sample_predictive(
    const RatingsTable& data, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& queries,
    const McmcConfig& config, McmcDiagnostics* diagnostics) {
    const std::size_t n_labels = data.scale().size();
    const std::size_t n_chains = std::max<std::size_t>(config.n_chains, 1);

    std::vector<std::vector<double>> chain_acc(n_chains,
                                               std::vector<double>(queries.size() * n_labels, 0.0));
    std::vector<double> chain_accept(n_chains, 0.0);
    std::vector<std::vector<double>> chain_energy(n_chains);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (long long chain = 0; chain < static_cast<long long>(n_chains); ++chain) {
        auto rng = split_rng(config.seed, /*stream=*/0x5B, static_cast<std::uint64_t>(chain));
        SbmState state(data, config.max_groups_users, config.max_groups_items, rng);
        std::size_t accepted = 0, proposed = 0;
        for (std::size_t s = 0; s < config.burn_in_sweeps; ++s) {
            state.sweep(rng, &accepted);
            proposed += data.n_users() + data.n_items();
        }
        std::uniform_int_distribution<std::uint32_t> rand_ugroup(
            0, static_cast<std::uint32_t>(state.max_groups_users() - 1));
        std::uniform_int_distribution<std::uint32_t> rand_igroup(
            0, static_cast<std::uint32_t>(state.max_groups_items() - 1));

        auto& acc = chain_acc[chain];
        std::vector<double> buf(n_labels);
        for (std::size_t s = 0; s < config.n_samples; ++s) {
            if (s > 0) {
                for (std::size_t w = 0; w < config.sample_stride_sweeps; ++w) {
                    state.sweep(rng, &accepted);
                    proposed += data.n_users() + data.n_items();
                }
            }
            chain_energy[chain].push_back(state.energy());
            for (std::size_t qi = 0; qi < queries.size(); ++qi) {
                auto [u, i] = queries[qi];
                std::size_t a = u < data.n_users() ? state.user_group(u) : rand_ugroup(rng);
                std::size_t b = i < data.n_items() ? state.item_group(i) : rand_igroup(rng);
                std::fill(buf.begin(), buf.end(), 0.0);
                state.accumulate_query(a, b, buf);
                for (std::size_t r = 0; r < n_labels; ++r) acc[qi * n_labels + r] += buf[r];
            }
        }
        chain_accept[chain] = proposed ? static_cast<double>(accepted) / proposed : 0.0;
    }

    std::vector<RatingDistribution> result(queries.size());
    double norm = static_cast<double>(n_chains * config.n_samples);
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        result[qi].probs.assign(n_labels, 0.0);
        for (std::size_t chain = 0; chain < n_chains; ++chain)
            for (std::size_t r = 0; r < n_labels; ++r)
                result[qi].probs[r] += chain_acc[chain][qi * n_labels + r];
        for (double& p : result[qi].probs) p /= norm;
        result[qi].normalize();
    }
    if (diagnostics) {
        diagnostics->acceptance_rate = 0.0;
        for (double a : chain_accept) diagnostics->acceptance_rate += a;
        diagnostics->acceptance_rate /= static_cast<double>(n_chains);
        diagnostics->energy_trace = chain_energy[0];
    }
    return result;
}

}  // namespace blockrec::sbm
