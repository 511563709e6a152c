#pragma once

#include <optional>
#include <span>

#include "treeaoi/markov.hpp"

namespace treeaoi {

/// Joint law of the CRI pair (C0, C1) that opens an inter-refresh period:
/// the reference user generates during C0 and is decoded in C1.
struct RefreshPairLaw {
    /// theta(l0, l1), unnormalized event probabilities.
    Matrix theta;
    /// theta / normalizer.
    Matrix joint;
    double normalizer = 0.0;

    Vector first_marginal() const { return joint.rowwise().sum(); }
    Vector second_marginal() const { return joint.colwise().sum().transpose(); }
};

/// Conditional moments of the inter-refresh time given the length of the
/// delivering CRI: first[len - 1] = E[Y | L1 = len], second[...] = E[Y^2 | ...].
struct RefreshMoments {
    Vector first;
    Vector second;

    double alpha(int first_len, int next_len) const
    {
        return 2.0 * first_len * first[next_len - 1] + second[next_len - 1];
    }
};

struct ResetExpectation {
    /// E[X | L0]: slots from generation to the end of C0 (1 = last slot).
    double generation_age = 0.0;
    /// E[D | L0]: decode slot within C1.
    double decode_delay = 0.0;

    double total() const { return generation_age + decode_delay; }
};

struct AoiReport {
    ProtocolConfig config;
    int max_cri = 0;
    double average_aoi = 0.0;
    double mean_y = 0.0;
    double mean_y2 = 0.0;
    double mean_zy = 0.0;
    double mean_x = 0.0;
    double mean_delay = 0.0;
    double delivery_rate = 0.0;
    /// Mean CRI length under the stationary law.
    double mean_cri = 0.0;
};

RefreshPairLaw refresh_pair_law(const ChainModel& model);
RefreshMoments inter_refresh_moments(const ChainModel& model);
ResetExpectation age_reset_expectation(const ChainModel& model, int prev_len);

AoiReport average_aoi(const ChainModel& model);
AoiReport average_aoi(const ProtocolConfig& cfg);

/// Fraction of packets entering contention that are delivered.
double delivery_rate(const ChainModel& model);
double delivery_rate(const ProtocolConfig& cfg);

/// Mean decode slot of delivered packets, with the CRI preceding delivery
/// marginalized over the refresh pair law.
double mean_delay(const ChainModel& model);

/// Average AoI of slotted ALOHA with per-slot transmission probability rho.
double slotted_aloha_aoi(int users, double gen_prob);

struct LmaxChoice {
    /// nullopt means plain CTM won.
    std::optional<int> max_cri_slots;
    double average_aoi = 0.0;
};

/// Minimizes average_aoi over a grid of truncation lengths (nullopt entries
/// denote plain CTM). Ties go to the larger truncation, plain counting as
/// the largest.
LmaxChoice optimize_lmax(int users, double gen_prob, std::span<const std::optional<int>> grid);

}  // namespace treeaoi
