#include "treeaoi/pmf.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace treeaoi {

namespace {
constexpr double kNegativeTolerance = 1e-10;
constexpr double kNormTolerance = 1e-9;
}  // namespace

Pmf::Pmf(int support_min, std::vector<double> probs) : support_min_(support_min), probs_(std::move(probs))
{
    if (support_min_ < 1)
        throw std::invalid_argument("Pmf: support must start at 1 or later");
    if (probs_.empty())
        throw std::invalid_argument("Pmf: empty support");
    for (double& p : probs_) {
        if (!std::isfinite(p) || p < -kNegativeTolerance)
            throw std::invalid_argument("Pmf: negative or non-finite entry");
        if (p < 0.0)
            p = 0.0;
    }
    if (std::abs(total() - 1.0) > kNormTolerance)
        throw std::invalid_argument("Pmf: entries do not sum to 1");
}

Pmf Pmf::point_mass(int value)
{
    return Pmf(value, {1.0});
}

double Pmf::operator()(int value) const
{
    const int i = value - support_min_;
    if (i < 0 || i >= static_cast<int>(probs_.size()))
        return 0.0;
    return probs_[i];
}

double Pmf::cdf(int value) const
{
    double acc = 0.0;
    for (int v = support_min_; v <= std::min(value, support_max()); ++v)
        acc += (*this)(v);
    return acc;
}

double Pmf::mean() const
{
    double acc = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i)
        acc += probs_[i] * static_cast<double>(support_min_ + static_cast<int>(i));
    return acc;
}

double Pmf::second_moment() const
{
    double acc = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
        const double v = support_min_ + static_cast<int>(i);
        acc += probs_[i] * v * v;
    }
    return acc;
}

double Pmf::total() const
{
    return std::accumulate(probs_.begin(), probs_.end(), 0.0);
}

}  // namespace treeaoi
