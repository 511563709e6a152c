#include "treeaoi/markov.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include <fmt/format.h>

#include "treeaoi/errors.hpp"
#include "treeaoi/numeric.hpp"

namespace treeaoi {

namespace {

constexpr int kPlainCapStart = 128;
constexpr double kPlainTailTarget = 1e-9;
constexpr double kStationaryResidual = 1e-10;

double tail_from(std::span<const double> masses, int first_slot)
{
    double tail = 0.0;
    for (std::size_t i = static_cast<std::size_t>(std::max(first_slot, 1)) - 1; i < masses.size(); ++i)
        tail += masses[i];
    return tail;
}

// (U+1) x lmax matrix of p_{L|U}(len | u).
Matrix build_cri_given_contenders(const TreeLaws& laws, int users, int max_cri)
{
    Matrix m = Matrix::Zero(users + 1, max_cri);
    for (int u = 0; u <= users; ++u) {
        if (u <= 1) {
            m(u, 0) = 1.0;
            continue;
        }
        const auto masses = laws.cri_mass(u);
        const int window = static_cast<int>(masses.size());
        for (int len = 1; len < max_cri && len <= window; ++len)
            m(u, len - 1) = masses[len - 1];
        m(u, max_cri - 1) = tail_from(masses, max_cri);
    }
    return m;
}

Matrix binomial_rows(int trials, int max_cri, double gen_prob)
{
    Matrix m(max_cri, trials + 1);
    for (int len = 1; len <= max_cri; ++len) {
        const auto pmf = binomial_pmf(trials, generation_prob(gen_prob, len));
        for (int k = 0; k <= trials; ++k)
            m(len - 1, k) = pmf[k];
    }
    return m;
}

double stationary_residual(const Matrix& p, const Vector& pi)
{
    return (p.transpose() * pi - pi).lpNorm<1>();
}

}  // namespace

void ProtocolConfig::validate() const
{
    if (users < 1)
        throw ConfigError(fmt::format("population must be at least 1 (got {})", users));
    if (!(gen_prob >= 0.0 && gen_prob <= 1.0))
        throw ConfigError(fmt::format("generation probability must lie in [0, 1] (got {})", gen_prob));
    if (max_cri_slots && *max_cri_slots < 2)
        throw ConfigError(fmt::format("CRI truncation length must be at least 2 (got {})", *max_cri_slots));
}

double generation_prob(double gen_prob, int slots)
{
    if (slots < 1)
        throw std::invalid_argument("generation_prob: slot count must be positive");
    if (gen_prob >= 1.0)
        return 1.0;
    return -std::expm1(slots * std::log1p(-gen_prob));
}

std::vector<double> contender_dist(const ProtocolConfig& cfg, int prev_len, bool include_reference)
{
    cfg.validate();
    if (prev_len < 1 || prev_len > effective_max_cri(cfg))
        throw std::out_of_range("contender_dist: previous CRI length out of range");
    return binomial_pmf(include_reference ? cfg.users : cfg.users - 1, generation_prob(cfg.gen_prob, prev_len));
}

Pmf truncated_cri_pmf(int contenders, int max_cri_slots)
{
    return cri_length_pmf(contenders, max_cri_slots);
}

int plain_cri_cap(int users)
{
    static std::mutex mutex;
    static std::map<int, int> memo;
    {
        std::lock_guard lock(mutex);
        if (auto it = memo.find(users); it != memo.end())
            return it->second;
    }
    const auto laws = TreeLaws::shared(users, 0);
    int cap = kPlainCapStart;
    for (;; cap *= 2) {
        if (cap > TreeLaws::kMaxWindow)
            throw NumericalError(fmt::format("no plain-CTM cap found for {} users", users));
        bool ok = users < 2 || tail_from(laws->decode_mass(users - 1), cap + 1) < kPlainTailTarget;
        for (int u = 2; u <= users && ok; ++u)
            ok = tail_from(laws->cri_mass(u), cap) < kPlainTailTarget;
        if (ok)
            break;
    }
    std::lock_guard lock(mutex);
    memo.emplace(users, cap);
    return cap;
}

int effective_max_cri(const ProtocolConfig& cfg)
{
    return cfg.max_cri_slots ? *cfg.max_cri_slots : plain_cri_cap(cfg.users);
}

TransitionKernel transition_kernel(const ProtocolConfig& cfg)
{
    cfg.validate();
    const int max_cri = effective_max_cri(cfg);
    const auto laws = TreeLaws::shared(cfg.users, 0);
    return {binomial_rows(cfg.users, max_cri, cfg.gen_prob) * build_cri_given_contenders(*laws, cfg.users, max_cri)};
}

StationaryDist stationary_dist(const TransitionKernel& kernel)
{
    const int n = kernel.states();
    if (n < 1)
        throw std::invalid_argument("stationary_dist: empty kernel");
    Matrix a = kernel.probs.transpose() - Matrix::Identity(n, n);
    a.row(0).setOnes();
    Vector b = Vector::Zero(n);
    b(0) = 1.0;
    Vector pi = a.partialPivLu().solve(b);

    const bool sane = pi.allFinite() && pi.minCoeff() > -1e-12;
    if (sane) {
        pi = pi.cwiseMax(0.0);
        pi /= pi.sum();
        const double residual = stationary_residual(kernel.probs, pi);
        if (residual <= kStationaryResidual)
            return {pi, residual};
    }
    return stationary_dist_power(kernel);
}

StationaryDist stationary_dist_power(const TransitionKernel& kernel, double tol, long max_iter)
{
    const int n = kernel.states();
    Vector pi = Vector::Constant(n, 1.0 / n);
    const Matrix pt = kernel.probs.transpose();
    for (long it = 0; it < max_iter; ++it) {
        Vector next = pt * pi;
        next /= next.sum();
        const double change = (next - pi).lpNorm<1>();
        pi = std::move(next);
        if (change < tol)
            return {pi, stationary_residual(kernel.probs, pi)};
    }
    throw NumericalError(fmt::format("power iteration did not converge within {} iterations", max_iter));
}

ChainModel::ChainModel(const ProtocolConfig& cfg) : cfg_(cfg)
{
    cfg_.validate();
    max_cri_ = effective_max_cri(cfg_);
    laws_ = TreeLaws::shared(cfg_.users, 0);

    gamma_.resize(static_cast<std::size_t>(max_cri_));
    for (int len = 1; len <= max_cri_; ++len)
        gamma_[len - 1] = generation_prob(cfg_.gen_prob, len);

    cri_given_u_ = build_cri_given_contenders(*laws_, cfg_.users, max_cri_);
    others_given_prev_ = binomial_rows(cfg_.users - 1, max_cri_, cfg_.gen_prob);
    all_given_prev_ = binomial_rows(cfg_.users, max_cri_, cfg_.gen_prob);

    unresolved_.assign(static_cast<std::size_t>(cfg_.users), 0.0);
    for (int m = 1; m < cfg_.users; ++m)
        unresolved_[m] = std::clamp(tail_from(laws_->decode_mass(m), max_cri_ + 1), 0.0, 1.0);

    kernel_.probs = all_given_prev_ * cri_given_u_;
    stationary_ = stationary_dist(kernel_);
}

}  // namespace treeaoi
