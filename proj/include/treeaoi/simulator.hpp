#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "treeaoi/markov.hpp"

namespace treeaoi {

struct SimOptions {
    std::int64_t horizon_slots = 1'000'000;
    /// Negative selects the default: 10% of the horizon, at least 1e4 slots
    /// (capped at half the horizon for very short runs).
    std::int64_t warmup_slots = -1;
    std::uint64_t seed = 1;
    bool check_invariants = true;
};

std::int64_t default_warmup(std::int64_t horizon_slots);

/// Growable square table of counts indexed by (previous length, length).
class PairCounts {
public:
    void add(int from_len, int to_len);
    void merge(const PairCounts& other);
    std::uint64_t operator()(int from_len, int to_len) const;
    std::uint64_t row_total(int from_len) const;
    int size() const { return size_; }

private:
    void grow(int len);
    int size_ = 0;
    std::vector<std::uint64_t> counts_;
};

struct SimMetrics {
    std::int64_t end_slot = 0;
    std::int64_t warmup_slots = 0;
    int replicas = 1;

    // Per-user integrated age (after warmup, from the first delivery on) and
    // the observation time it covers.
    std::vector<double> age_area;
    std::vector<double> age_time;

    // Packets entering contention in CRIs that start after warmup, by fate.
    std::uint64_t entered = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;

    // Whole-run bookkeeping for the conservation check.
    std::uint64_t generated_total = 0;
    std::uint64_t delivered_total = 0;
    std::uint64_t dropped_total = 0;
    std::uint64_t preempted_total = 0;
    std::uint64_t residual_total = 0;

    // Decode slot within the CRI and age right after delivery, per delivered
    // packet after warmup.
    double delay_sum = 0.0;
    double delay_sq_sum = 0.0;
    double reset_sum = 0.0;

    // CRI lengths for CRIs starting after warmup; index length - 1.
    std::vector<std::uint64_t> cri_hist;
    PairCounts cri_pairs;
    /// Length of the CRI preceding each delivering CRI, per delivery.
    std::vector<std::uint64_t> delivery_prev_hist;

    // Inter-refresh intervals whose both ends fall after warmup.
    std::uint64_t refresh_count = 0;
    double refresh_sum = 0.0;
    double refresh_sq_sum = 0.0;
    double reset_times_refresh_sum = 0.0;

    std::uint64_t cris_checked = 0;
    std::uint64_t invariant_violations = 0;

    /// Population average of the per-user time-averaged AoI.
    std::optional<double> average_aoi() const;
    std::optional<double> user_aoi(int user) const;
    /// delivered / entered; nullopt without traffic.
    std::optional<double> delivery_rate() const;
    std::optional<double> mean_delay() const;
    std::optional<double> mean_refresh() const;
    std::uint64_t cri_count() const;
    /// Sums every counter; both must have the same user count.
    void merge(const SimMetrics& other);
};

/// Slot-accurate simulation of CTM / CTM-ET with gated access, Gallager
/// counters and one-packet preemptive buffers.
SimMetrics run_simulation(const ProtocolConfig& cfg, const SimOptions& options);

struct CriReplay {
    int length = 1;
    /// Decode slot of the tagged contender (contender 0); nullopt when there
    /// are no contenders or the tagged one is cut off by early termination.
    std::optional<int> tagged_decode_slot;
};

CriReplay replay_cri(int contenders, std::optional<int> max_cri_slots, std::mt19937_64& rng);
CriReplay replay_cri(int contenders, std::optional<int> max_cri_slots, std::uint64_t seed);

/// Seed for an independent stream `stream` derived from `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace treeaoi
