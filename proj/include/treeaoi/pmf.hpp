#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace treeaoi {

/// Finite-support probability mass function over consecutive positive slot
/// counts {support_min, ..., support_min + size() - 1}.
class Pmf {
public:
    Pmf() = default;
    /// Validates nonnegativity (within 1e-10), normalization (within 1e-9)
    /// and support_min >= 1. Tiny negative entries are clamped to zero.
    Pmf(int support_min, std::vector<double> probs);

    static Pmf point_mass(int value);

    int support_min() const { return support_min_; }
    int support_max() const { return support_min_ + static_cast<int>(probs_.size()) - 1; }
    std::size_t size() const { return probs_.size(); }
    std::span<const double> probs() const { return probs_; }

    /// Probability of exactly `value` slots (0 outside the support).
    double operator()(int value) const;
    /// P(X <= value).
    double cdf(int value) const;
    double mean() const;
    double second_moment() const;
    double total() const;

private:
    int support_min_ = 1;
    std::vector<double> probs_{1.0};
};

}  // namespace treeaoi
