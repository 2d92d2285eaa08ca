#pragma once

#include <cstdint>

#include "blockrec/mmsbm.hpp"
#include "blockrec/ratings_table.hpp"

namespace blockrec {

// Planted-model generator: samples (u,i) pairs at the given density and
// draws each rating from the mixture sum_{k,l} theta_uk eta_il q^r_kl.
// Deterministic for a fixed seed. Throws if no pair is sampled.
RatingsTable generate_synthetic(const mmsbm::MmsbmModel& params, const RatingScale& scale,
                                double density, std::uint64_t seed);

}  // namespace blockrec
