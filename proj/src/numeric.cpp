#include "treeaoi/numeric.hpp"

#include <cmath>
#include <stdexcept>

namespace treeaoi {

namespace {

constexpr int kFactorialTable = 1 << 16;
// Exact binomials are safe in double up to here; larger n goes through
// log-gamma to avoid overflow.
constexpr int kExactBinomialLimit = 60;

const std::vector<double>& log_factorials()
{
    static const std::vector<double> table = [] {
        std::vector<double> t(kFactorialTable);
        for (int n = 0; n < kFactorialTable; ++n)
            t[n] = std::lgamma(static_cast<double>(n) + 1.0);
        return t;
    }();
    return table;
}

double log_choose(int n, int k)
{
    return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

}  // namespace

double log_factorial(int n)
{
    if (n < 0 || n >= kFactorialTable)
        throw std::out_of_range("log_factorial: argument out of table range");
    return log_factorials()[n];
}

double fair_split_prob(int n, int k)
{
    if (k < 0 || k > n)
        return 0.0;
    if (n <= kExactBinomialLimit) {
        double c = 1.0;
        for (int i = 1; i <= k; ++i)
            c = c * (n - k + i) / i;
        return std::ldexp(c, -n);
    }
    return std::exp(log_choose(n, k) - n * std::log(2.0));
}

std::vector<double> binomial_pmf(int n, double p)
{
    std::vector<double> pmf(static_cast<std::size_t>(n) + 1, 0.0);
    if (p <= 0.0) {
        pmf.front() = 1.0;
        return pmf;
    }
    if (p >= 1.0) {
        pmf.back() = 1.0;
        return pmf;
    }
    const double lp = std::log(p);
    const double lq = std::log1p(-p);
    for (int k = 0; k <= n; ++k)
        pmf[k] = std::exp(log_choose(n, k) + k * lp + (n - k) * lq);
    return pmf;
}

}  // namespace treeaoi
