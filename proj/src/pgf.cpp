#include "treeaoi/pgf.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <utility>

#include <fftw3.h>
#include <fmt/format.h>

#include "treeaoi/errors.hpp"
#include "treeaoi/numeric.hpp"

namespace treeaoi {

namespace {

constexpr double kUnitCircleTolerance = 1e-12;
constexpr double kNegativeMassTolerance = 1e-10;

void require_unit_circle(Complex z)
{
    if (std::abs(std::abs(z) - 1.0) > kUnitCircleTolerance)
        throw std::invalid_argument(
            fmt::format("PGF evaluated off the unit circle (|z| = {:.17g})", std::abs(z)));
}

// weights[n][k] = C(n, k) / 2^n for 0 <= k <= n <= max_n.
std::vector<std::vector<double>> split_weights(int max_n)
{
    std::vector<std::vector<double>> w(static_cast<std::size_t>(max_n) + 1);
    for (int n = 0; n <= max_n; ++n) {
        w[n].resize(static_cast<std::size_t>(n) + 1);
        for (int k = 0; k <= n; ++k)
            w[n][k] = fair_split_prob(n, k);
    }
    return w;
}

// L_u(z) = z / (1 - 2 z^2 / 2^u) * sum_{i=1}^{u-1} C(u,i)/2^u L_i L_{u-i}
void fill_cri_row(std::vector<Complex>& row, int max_u, Complex z,
                  const std::vector<std::vector<double>>& weights)
{
    row.assign(static_cast<std::size_t>(max_u) + 1, z);
    for (int u = 2; u <= max_u; ++u) {
        Complex acc{0.0, 0.0};
        // terms i and u - i coincide; sum the lower half twice
        for (int i = 1; 2 * i < u; ++i)
            acc += 2.0 * weights[u][i] * row[i] * row[u - i];
        if (u % 2 == 0)
            acc += weights[u][u / 2] * row[u / 2] * row[u / 2];
        row[u] = z * acc / (1.0 - std::ldexp(2.0, -u) * z * z);
    }
}

// D_{m+1}(z) = z / (1 - z(z+1)/2^{m+1})
//            * [ z(1 + L_m)/2^{m+1} + 1/2 sum_{i=1}^{m-1} C(m,i)/2^m (D_{i+1} + L_i D_{m-i+1}) ]
void fill_decode_row(std::vector<Complex>& row, int max_total, Complex z,
                     std::span<const Complex> cri_row, const std::vector<std::vector<double>>& weights)
{
    // row[t] holds D_t; row[0] unused
    row.assign(static_cast<std::size_t>(max_total) + 1, Complex{});
    if (max_total < 1)
        return;
    row[1] = z;
    for (int m = 1; m + 1 <= max_total; ++m) {
        const double scale = std::ldexp(1.0, -(m + 1));
        Complex acc = z * (1.0 + cri_row[m]) * scale;
        for (int i = 1; i <= m - 1; ++i)
            acc += 0.5 * weights[m][i] * (row[i + 1] + cri_row[i] * row[m - i + 1]);
        row[m + 1] = z * acc / (1.0 - scale * z * (z + 1.0));
    }
}

std::mutex& fftw_planner_mutex()
{
    static std::mutex m;
    return m;
}

// Clamp round-off negatives, renormalize, and report the mass on the lower
// half of the window.
double tidy_masses(std::vector<double>& masses, const char* what, int index)
{
    double total = 0.0;
    for (double& p : masses) {
        if (p < -kNegativeMassTolerance)
            throw NumericalError(fmt::format("IDFT of {} law ({}) produced a negative mass {:.3g}", what,
                                             index, p));
        if (p < 0.0)
            p = 0.0;
        total += p;
    }
    if (!(total > 0.0))
        throw NumericalError(fmt::format("IDFT of {} law ({}) has no mass", what, index));
    double lower = 0.0;
    for (std::size_t i = 0; i < masses.size(); ++i) {
        masses[i] /= total;
        if (2 * i < masses.size())
            lower += masses[i];
    }
    return lower;
}

Pmf fold_tail(std::span<const double> masses, int cap)
{
    if (cap < 1)
        throw std::invalid_argument("PMF cap must be at least 1");
    std::vector<double> probs(static_cast<std::size_t>(cap), 0.0);
    const int window = static_cast<int>(masses.size());
    for (int len = 1; len < cap && len <= window; ++len)
        probs[len - 1] = masses[len - 1];
    double tail = 0.0;
    for (int len = cap; len <= window; ++len)
        tail += masses[len - 1];
    probs[cap - 1] = tail;
    return Pmf(1, std::move(probs));
}

int starting_window(int min_window)
{
    return static_cast<int>(std::bit_ceil(static_cast<unsigned>(std::max(64, min_window))));
}

}  // namespace

std::vector<Complex> cri_pgf_row(int max_contenders, Complex z)
{
    if (max_contenders < 0)
        throw std::invalid_argument("negative contender count");
    require_unit_circle(z);
    std::vector<Complex> row;
    fill_cri_row(row, max_contenders, z, split_weights(max_contenders));
    return row;
}

std::vector<Complex> decode_pgf_row(int max_total, Complex z, std::span<const Complex> cri_row)
{
    if (max_total < 1)
        throw std::invalid_argument("decode PGF needs at least the tagged contender");
    if (static_cast<int>(cri_row.size()) < max_total)
        throw std::invalid_argument("CRI PGF row too short for decode recursion");
    require_unit_circle(z);
    std::vector<Complex> row;
    fill_decode_row(row, max_total, z, cri_row, split_weights(max_total));
    return {row.begin() + 1, row.end()};
}

Complex eval_cri_pgf(int contenders, Complex z)
{
    return cri_pgf_row(contenders, z).back();
}

Complex eval_decode_pgf(int total_contenders, Complex z)
{
    if (total_contenders < 1)
        throw std::invalid_argument("decode PGF needs at least the tagged contender");
    const auto cri = cri_pgf_row(total_contenders - 1, z);
    return decode_pgf_row(total_contenders, z, cri).back();
}

PgfSampler::PgfSampler(int contender_count, int points) : contender_count_(contender_count), points_(points)
{
    if (contender_count < 0)
        throw std::invalid_argument("negative contender count");
    if (points < 2 || points % 2 != 0)
        throw std::invalid_argument("PGF sample count must be even and at least 2");
    const auto weights = split_weights(contender_count);
    const int half = points / 2;
    cri_.resize(static_cast<std::size_t>(half) + 1);
    decode_.resize(static_cast<std::size_t>(half) + 1);
    for (int k = 0; k <= half; ++k) {
        const Complex z = point(k);
        fill_cri_row(cri_[k], contender_count, z, weights);
        fill_decode_row(decode_[k], contender_count, z, cri_[k], weights);
    }
}

Complex PgfSampler::point(int k) const
{
    return std::polar(1.0, -2.0 * std::numbers::pi * k / points_);
}

Complex PgfSampler::cri(int contenders, int k) const
{
    if (contenders < 0 || contenders > contender_count_)
        throw std::out_of_range("PgfSampler::cri: contender count out of range");
    k = ((k % points_) + points_) % points_;
    if (k <= points_ / 2)
        return cri_[k][contenders];
    return std::conj(cri_[points_ - k][contenders]);
}

Complex PgfSampler::decode(int total_contenders, int k) const
{
    if (total_contenders < 1 || total_contenders > contender_count_)
        throw std::out_of_range("PgfSampler::decode: contender count out of range");
    k = ((k % points_) + points_) % points_;
    if (k <= points_ / 2)
        return decode_[k][total_contenders];
    return std::conj(decode_[points_ - k][total_contenders]);
}

std::vector<Complex> PgfSampler::cri_spectrum(int contenders) const
{
    std::vector<Complex> out(cri_.size());
    for (std::size_t k = 0; k < cri_.size(); ++k)
        out[k] = cri_[k].at(contenders);
    return out;
}

std::vector<Complex> PgfSampler::decode_spectrum(int total_contenders) const
{
    std::vector<Complex> out(decode_.size());
    for (std::size_t k = 0; k < decode_.size(); ++k)
        out[k] = decode_[k].at(total_contenders);
    return out;
}

std::vector<double> idft_masses(std::span<const Complex> half_spectrum, int points)
{
    if (points < 2 || static_cast<int>(half_spectrum.size()) != points / 2 + 1)
        throw std::invalid_argument("idft_masses: spectrum length must be points/2 + 1");

    auto* in = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * half_spectrum.size()));
    auto* out = static_cast<double*>(fftw_malloc(sizeof(double) * points));
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_c2r_1d(points, in, out, FFTW_ESTIMATE);
    }
    for (std::size_t k = 0; k < half_spectrum.size(); ++k) {
        in[k][0] = half_spectrum[k].real();
        in[k][1] = half_spectrum[k].imag();
    }
    fftw_execute(plan);

    std::vector<double> masses(static_cast<std::size_t>(points));
    for (int slot = 1; slot <= points; ++slot)
        masses[slot - 1] = out[slot % points] / points;

    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
    return masses;
}

TreeLaws::TreeLaws(int max_contenders, int min_window) : max_contenders_(max_contenders)
{
    if (max_contenders < 0)
        throw std::invalid_argument("negative contender count");
    for (int window = starting_window(min_window); window <= kMaxWindow; window *= 2) {
        const PgfSampler sampler(std::max(max_contenders, 1), window);
        std::vector<std::vector<double>> cri(static_cast<std::size_t>(max_contenders) + 1);
        std::vector<std::vector<double>> decode(static_cast<std::size_t>(max_contenders));
        bool converged = true;
        for (int u = 0; u <= max_contenders && converged; ++u) {
            cri[u] = idft_masses(sampler.cri_spectrum(u), window);
            converged = tidy_masses(cri[u], "CRI length", u) >= kWindowMassTarget;
        }
        for (int m = 0; m < max_contenders && converged; ++m) {
            decode[m] = idft_masses(sampler.decode_spectrum(m + 1), window);
            converged = tidy_masses(decode[m], "decode slot", m) >= kWindowMassTarget;
        }
        if (converged) {
            window_ = window;
            cri_ = std::move(cri);
            decode_ = std::move(decode);
            return;
        }
    }
    throw NumericalError(fmt::format("tree laws for {} contenders need more than {} PGF samples",
                                     max_contenders, kMaxWindow));
}

std::shared_ptr<const TreeLaws> TreeLaws::shared(int max_contenders, int min_window)
{
    // Keyed by the exact build arguments so results never depend on the order
    // in which callers populate the cache.
    static std::mutex mutex;
    static std::map<std::pair<int, int>, std::shared_ptr<const TreeLaws>> cache;
    const std::pair key{max_contenders, starting_window(min_window)};
    std::lock_guard lock(mutex);
    auto& slot = cache[key];
    if (!slot)
        slot = std::make_shared<const TreeLaws>(max_contenders, key.second);
    return slot;
}

std::span<const double> TreeLaws::cri_mass(int contenders) const
{
    if (contenders < 0 || contenders > max_contenders_)
        throw std::out_of_range("TreeLaws::cri_mass: contender count out of range");
    return cri_[contenders];
}

std::span<const double> TreeLaws::decode_mass(int others) const
{
    if (others < 0 || others >= max_contenders_)
        throw std::out_of_range("TreeLaws::decode_mass: rival count out of range");
    return decode_[others];
}

Pmf cri_length_pmf(int contenders, int cap)
{
    if (cap < 1)
        throw std::invalid_argument("PMF cap must be at least 1");
    if (contenders <= 1)
        return fold_tail(std::vector<double>{1.0}, cap);
    return fold_tail(TreeLaws::shared(contenders, 2 * cap)->cri_mass(contenders), cap);
}

Pmf decode_slot_pmf(int others, int cap)
{
    if (cap < 1)
        throw std::invalid_argument("PMF cap must be at least 1");
    if (others < 0)
        throw std::invalid_argument("negative rival count");
    if (others == 0)
        return fold_tail(std::vector<double>{1.0}, cap);
    return fold_tail(TreeLaws::shared(others + 1, 2 * cap)->decode_mass(others), cap);
}

double unresolved_prob(int others, int max_cri_slots)
{
    if (max_cri_slots < 1)
        throw std::invalid_argument("truncation length must be at least 1");
    if (others < 0)
        throw std::invalid_argument("negative rival count");
    if (others == 0)
        return 0.0;
    const auto masses = TreeLaws::shared(others + 1, 2 * max_cri_slots)->decode_mass(others);
    double tail = 0.0;
    for (std::size_t d = static_cast<std::size_t>(max_cri_slots); d < masses.size(); ++d)
        tail += masses[d];
    return std::clamp(tail, 0.0, 1.0);
}

}  // namespace treeaoi
