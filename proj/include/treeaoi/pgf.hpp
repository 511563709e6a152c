#pragma once

// Probability generating functions of the binary fair-split tree (gated
// access, Capetanakis/Tsybakov-Mikhailov) and recovery of the underlying
// PMFs by inverse DFT on the unit circle.
//
// Conventions: L_u(z) is the PGF of the CRI length when u users contend;
// D_{m+1}(z) is the PGF of the slot (counted from the start of the CRI) in
// which a tagged contender is decoded, given m other contenders.

#include <complex>
#include <memory>
#include <span>
#include <vector>

#include "treeaoi/pmf.hpp"

namespace treeaoi {

using Complex = std::complex<double>;

/// L_0(z), ..., L_{max_contenders}(z) at a single point of the unit circle.
std::vector<Complex> cri_pgf_row(int max_contenders, Complex z);

/// D_1(z), ..., D_{max_total}(z); `cri_row` must hold L_0..L_{max_total - 1}
/// at the same z. Entry 0 of the result is D_1.
std::vector<Complex> decode_pgf_row(int max_total, Complex z, std::span<const Complex> cri_row);

Complex eval_cri_pgf(int contenders, Complex z);
Complex eval_decode_pgf(int total_contenders, Complex z);

/// Cached PGF tables at the N-th roots of unity z_k = exp(-2 pi i k / N).
/// Only k = 0..N/2 are stored; the rest follow by conjugate symmetry since
/// all PMFs involved are real.
class PgfSampler {
public:
    PgfSampler(int contender_count, int points);

    int contender_count() const { return contender_count_; }
    int points() const { return points_; }

    Complex point(int k) const;
    /// L_u(z_k), 0 <= u <= contender_count, 0 <= k < points.
    Complex cri(int contenders, int k) const;
    /// D_t(z_k), 1 <= t <= contender_count.
    Complex decode(int total_contenders, int k) const;

    /// Half-spectrum (k = 0..N/2) of L_u, ready for a complex-to-real IDFT.
    std::vector<Complex> cri_spectrum(int contenders) const;
    std::vector<Complex> decode_spectrum(int total_contenders) const;

private:
    int contender_count_;
    int points_;
    // [k][u] for k in 0..N/2
    std::vector<std::vector<Complex>> cri_;
    std::vector<std::vector<Complex>> decode_;
};

/// Inverse DFT of a half-spectrum of length N/2 + 1 sampled at
/// z_k = exp(-2 pi i k / N). Returns masses for slot counts 1..N (entry
/// i is the mass aliased onto i + 1; slot N collects index 0).
std::vector<double> idft_masses(std::span<const Complex> half_spectrum, int points);

/// Plain-CTM CRI length and decode-slot laws for every contender count up to
/// `max_contenders`, recovered by IDFT. The window N is doubled from its
/// starting value until every recovered law carries at least 1 - 1e-12 of its
/// mass on the lower half {1, ..., N/2}, so aliased tail mass is negligible.
class TreeLaws {
public:
    static constexpr double kWindowMassTarget = 1.0 - 1e-12;
    static constexpr int kMaxWindow = 1 << 22;

    TreeLaws(int max_contenders, int min_window);

    /// Shared, memoized instance covering at least `max_contenders` and a
    /// window of at least `min_window` points. Thread-safe.
    static std::shared_ptr<const TreeLaws> shared(int max_contenders, int min_window = 0);

    int max_contenders() const { return max_contenders_; }
    int window() const { return window_; }

    /// Mass of the untruncated CRI length on slots 1..window (index 0 = 1 slot).
    std::span<const double> cri_mass(int contenders) const;
    /// Mass of the decode slot of a tagged user with `others` rivals.
    std::span<const double> decode_mass(int others) const;

private:
    int max_contenders_;
    int window_;
    std::vector<std::vector<double>> cri_;
    std::vector<std::vector<double>> decode_;
};

/// PMF of the plain-CTM CRI length for `contenders` users, on support
/// {1, ..., cap}. Entries below cap are exact; bin cap holds P(length >= cap).
Pmf cri_length_pmf(int contenders, int cap);

/// Same for the decode slot of a tagged user with `others` rival contenders.
Pmf decode_slot_pmf(int others, int cap);

/// Probability that a tagged contender with `others` rivals is still
/// undecoded after `max_cri_slots` slots, i.e. P(decode slot > max_cri_slots).
double unresolved_prob(int others, int max_cri_slots);

}  // namespace treeaoi
