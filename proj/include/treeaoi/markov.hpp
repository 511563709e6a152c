#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "treeaoi/pgf.hpp"
#include "treeaoi/pmf.hpp"

namespace treeaoi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct ProtocolConfig {
    int users = 1;
    /// Per-slot, per-user update generation probability.
    double gen_prob = 0.0;
    /// Early-termination length in slots; nullopt runs plain CTM.
    std::optional<int> max_cri_slots;

    bool plain() const { return !max_cri_slots.has_value(); }
    double aggregate_rate() const { return gen_prob * users; }
    /// Throws ConfigError on users < 1, gen_prob outside [0, 1] or a finite
    /// max_cri_slots below 2.
    void validate() const;
};

/// Probability that a user generates at least one update over `slots` slots.
double generation_prob(double gen_prob, int slots);

/// Law of the number of contenders in the CRI following one of `prev_len`
/// slots: Binomial(U, Gamma) or, without the reference user, Binomial(U-1, Gamma).
/// Entry i is the probability of i contenders.
std::vector<double> contender_dist(const ProtocolConfig& cfg, int prev_len, bool include_reference);

/// CRI length under early termination: plain law below max_cri_slots, all
/// remaining mass on max_cri_slots.
Pmf truncated_cri_pmf(int contenders, int max_cri_slots);

/// Truncation length standing in for plain CTM with `users` users. Doubles
/// from 128 until unresolved_prob(users - 1, cap) < 1e-9 and every CRI-length
/// tail beyond the cap is below 1e-9. Memoized.
int plain_cri_cap(int users);

/// max_cri_slots, or plain_cri_cap for plain CTM.
int effective_max_cri(const ProtocolConfig& cfg);

/// Row-stochastic kernel over CRI lengths {1, ..., lmax}; row/column index
/// is length - 1.
struct TransitionKernel {
    Matrix probs;
    int states() const { return static_cast<int>(probs.rows()); }
};

struct StationaryDist {
    Vector probs;
    /// ||pi P - pi||_1 at the returned solution.
    double residual = 0.0;
};

TransitionKernel transition_kernel(const ProtocolConfig& cfg);

/// Direct solve of (P^T - I) pi = 0 with one equation replaced by the
/// normalization; falls back to power iteration if the residual is poor.
StationaryDist stationary_dist(const TransitionKernel& kernel);

/// Power iteration on pi <- pi P. Throws NumericalError without convergence.
StationaryDist stationary_dist_power(const TransitionKernel& kernel, double tol = 1e-12,
                                     long max_iter = 1'000'000);

/// All per-configuration tables shared by the chain and the age analysis.
class ChainModel {
public:
    explicit ChainModel(const ProtocolConfig& cfg);

    const ProtocolConfig& config() const { return cfg_; }
    int users() const { return cfg_.users; }
    int max_cri() const { return max_cri_; }
    const TreeLaws& laws() const { return *laws_; }

    /// Gamma_len for len in 1..max_cri.
    double gamma(int len) const { return gamma_[len - 1]; }
    /// (U+1) x max_cri: p_{L|U}(len | u), column len - 1.
    const Matrix& cri_given_contenders() const { return cri_given_u_; }
    /// max_cri x U: Binomial(U-1, Gamma_len)(m), row len - 1.
    const Matrix& others_given_prev() const { return others_given_prev_; }
    /// max_cri x (U+1): Binomial(U, Gamma_len)(u).
    const Matrix& all_given_prev() const { return all_given_prev_; }
    /// phi(m) for m in 0..U-1 at max_cri.
    std::span<const double> unresolved() const { return unresolved_; }

    const TransitionKernel& kernel() const { return kernel_; }
    const StationaryDist& stationary() const { return stationary_; }

private:
    ProtocolConfig cfg_;
    int max_cri_;
    std::shared_ptr<const TreeLaws> laws_;
    std::vector<double> gamma_;
    Matrix cri_given_u_;
    Matrix others_given_prev_;
    Matrix all_given_prev_;
    std::vector<double> unresolved_;
    TransitionKernel kernel_;
    StationaryDist stationary_;
};

}  // namespace treeaoi
