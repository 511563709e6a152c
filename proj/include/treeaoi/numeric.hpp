#pragma once

#include <vector>

namespace treeaoi {

/// log(n!) from a table built once with std::lgamma.
double log_factorial(int n);

/// Binomial coefficient C(n, k) divided by 2^n, i.e. the probability that a
/// fair split of n users puts exactly k of them in the first group.
double fair_split_prob(int n, int k);

/// Full PMF of Binomial(n, p) over {0, ..., n}.
std::vector<double> binomial_pmf(int n, double p);

}  // namespace treeaoi
