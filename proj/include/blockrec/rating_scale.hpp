#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace blockrec {

// Ordered finite set of admissible rating values, e.g. {1,...,5} or
// {0.5, 1.0, ..., 5.0}. Ratings are stored everywhere as indices into
// this scale; numeric values are only consulted by the mean estimator,
// the MAE and rounding of real-valued predictions.
class RatingScale {
public:
    explicit RatingScale(std::vector<double> values) : values_(std::move(values)) {
        if (values_.size() < 2)
            throw std::invalid_argument("RatingScale needs at least 2 labels");
        for (std::size_t i = 1; i < values_.size(); ++i)
            if (!(values_[i] > values_[i - 1]))
                throw std::invalid_argument("RatingScale values must be strictly increasing");
    }

    static RatingScale integers(int lo, int hi) {
        std::vector<double> v;
        for (int x = lo; x <= hi; ++x) v.push_back(static_cast<double>(x));
        return RatingScale(std::move(v));
    }

    std::size_t size() const { return values_.size(); }
    double value(std::size_t r) const { return values_.at(r); }
    const std::vector<double>& values() const { return values_; }
    double min_value() const { return values_.front(); }
    double max_value() const { return values_.back(); }

    // Exact label lookup (tolerance absorbs text-parsing noise).
    std::optional<std::size_t> index_of(double v, double tol = 1e-9) const {
        for (std::size_t r = 0; r < values_.size(); ++r)
            if (std::fabs(values_[r] - v) <= tol) return r;
        return std::nullopt;
    }

    // Nearest label; half-way ties round down to the lower label.
    std::size_t nearest_index(double v) const {
        std::size_t best = 0;
        double best_d = std::fabs(values_[0] - v);
        for (std::size_t r = 1; r < values_.size(); ++r) {
            double d = std::fabs(values_[r] - v);
            if (d < best_d - 1e-12) {
                best = r;
                best_d = d;
            }
        }
        return best;
    }

    bool operator==(const RatingScale& o) const { return values_ == o.values_; }

private:
    std::vector<double> values_;
};

}  // namespace blockrec
