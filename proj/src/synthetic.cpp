#include "blockrec/synthetic.hpp"

#include <stdexcept>

#include "blockrec/rng.hpp"

namespace blockrec {

RatingsTable generate_synthetic(const mmsbm::MmsbmModel& params, const RatingScale& scale,
                                double density, std::uint64_t seed) {
    if (density <= 0.0 || density > 1.0)
        throw std::invalid_argument("density must be in (0, 1]");
    if (scale.size() != params.n_labels)
        throw std::invalid_argument("scale size does not match model labels");

    auto rng = split_rng(seed, /*stream=*/0x5E);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    auto draw_categorical = [&](auto prob_at, std::size_t n) {
        double x = unif(rng), cum = 0.0;
        for (std::size_t j = 0; j + 1 < n; ++j) {
            cum += prob_at(j);
            if (x < cum) return j;
        }
        return n - 1;
    };

    std::vector<Observation> obs;
    for (std::uint32_t u = 0; u < params.n_users; ++u) {
        for (std::uint32_t i = 0; i < params.n_items; ++i) {
            if (density < 1.0 && unif(rng) >= density) continue;
            std::size_t k = draw_categorical([&](std::size_t j) { return params.th(u, j); },
                                             params.K);
            std::size_t l = draw_categorical([&](std::size_t j) { return params.et(i, j); },
                                             params.L);
            std::size_t r = draw_categorical([&](std::size_t j) { return params.qr(j, k, l); },
                                             params.n_labels);
            obs.push_back({u, i, static_cast<std::uint16_t>(r)});
        }
    }
    if (obs.empty()) throw std::runtime_error("density produced zero observations");
    return RatingsTable(params.n_users, params.n_items, scale, std::move(obs));
}

}  // namespace blockrec
