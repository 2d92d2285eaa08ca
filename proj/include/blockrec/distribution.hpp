#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "blockrec/rating_scale.hpp"

namespace blockrec {

// Probability vector over the rating scale for one (user, item) query.
// The prediction currency of the network-based models.
struct RatingDistribution {
    std::vector<double> probs;

    bool valid(double tol = 1e-9) const {
        double sum = 0.0;
        for (double p : probs) {
            if (p < 0.0 || !std::isfinite(p)) return false;
            sum += p;
        }
        return std::fabs(sum - 1.0) <= tol;
    }

    void normalize() {
        double sum = 0.0;
        for (double p : probs) sum += p;
        if (sum <= 0.0) throw std::runtime_error("cannot normalize zero distribution");
        for (double& p : probs) p /= sum;
    }
};

// Most likely label; ties broken toward the lowest index.
inline std::size_t estimator_mode(const RatingDistribution& dist) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < dist.probs.size(); ++r)
        if (dist.probs[r] > dist.probs[best]) best = r;
    return best;
}

// Smallest label whose cumulative probability reaches 1/2.
inline std::size_t estimator_median(const RatingDistribution& dist) {
    double cdf = 0.0;
    for (std::size_t r = 0; r < dist.probs.size(); ++r) {
        cdf += dist.probs[r];
        if (cdf >= 0.5) return r;
    }
    return dist.probs.size() - 1;  // guards against rounding in the final bin
}

inline double estimator_mean(const RatingDistribution& dist, const RatingScale& scale) {
    double m = 0.0;
    for (std::size_t r = 0; r < dist.probs.size(); ++r) m += dist.probs[r] * scale.value(r);
    return m;
}

}  // namespace blockrec
