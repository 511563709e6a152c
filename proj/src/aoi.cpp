#include "treeaoi/aoi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "treeaoi/errors.hpp"

namespace treeaoi {

namespace {

// Condition estimates below this are treated as a numerical breakdown of the
// first-step systems.
constexpr double kMinReciprocalCondition = 1e-14;

void require_traffic(const ProtocolConfig& cfg)
{
    if (!(cfg.gen_prob > 0.0))
        throw ConfigError("average AoI needs a positive generation probability");
}

// Bracket of the truncation column: p_{L|U}(lmax | m+1) - phi(m), per m.
Vector truncation_bracket(const ChainModel& model)
{
    const int users = model.users();
    const int last = model.max_cri() - 1;
    Vector bracket(users);
    for (int m = 0; m < users; ++m)
        bracket(m) = std::max(0.0, model.cri_given_contenders()(m + 1, last) - model.unresolved()[m]);
    return bracket;
}

Vector unresolved_vector(const ChainModel& model)
{
    const auto phi = model.unresolved();
    return Eigen::Map<const Vector>(phi.data(), static_cast<Eigen::Index>(phi.size()));
}

// One-step matrix of the inter-refresh first-step systems:
// A(l1, l') = (1 - Gamma_l1) sum_m p(m | l1) p_{L|U}(l' | m) + [l' = lmax] Gamma_l1 sum_m p(m | l1) phi(m)
Matrix continuation_matrix(const ChainModel& model)
{
    const int users = model.users();
    const int n = model.max_cri();
    const Matrix& others = model.others_given_prev();
    Matrix a = others * model.cri_given_contenders().topRows(users);
    const Vector stuck = others * unresolved_vector(model);
    for (int len = 1; len <= n; ++len) {
        const double g = model.gamma(len);
        a.row(len - 1) *= 1.0 - g;
        a(len - 1, n - 1) += g * stuck(len - 1);
    }
    return a;
}

struct ResetTables {
    Vector generation_age;
    Vector decode_delay;
};

ResetTables reset_tables(const ChainModel& model)
{
    const int users = model.users();
    const int n = model.max_cri();
    const double rho = model.config().gen_prob;

    // Decode-slot masses truncated to 1..lmax, one row per rival count.
    Matrix decode = Matrix::Zero(users, n);
    for (int m = 0; m < users; ++m) {
        const auto masses = model.laws().decode_mass(m);
        const int upto = std::min<int>(n, static_cast<int>(masses.size()));
        for (int d = 1; d <= upto; ++d)
            decode(m, d - 1) = masses[d - 1];
    }
    const Matrix mixed = model.others_given_prev() * decode;
    const Vector slots = Vector::LinSpaced(n, 1.0, static_cast<double>(n));

    ResetTables t{Vector(n), Vector(n)};
    for (int len = 1; len <= n; ++len) {
        double weighted = 0.0;
        for (int x = 1; x <= len; ++x)
            weighted += x * rho * std::pow(1.0 - rho, x - 1);
        t.generation_age(len - 1) = weighted / model.gamma(len);

        const double norm = mixed.row(len - 1).sum();
        t.decode_delay(len - 1) = mixed.row(len - 1).dot(slots) / norm;
    }
    return t;
}

}  // namespace

RefreshPairLaw refresh_pair_law(const ChainModel& model)
{
    require_traffic(model.config());
    const int users = model.users();
    const int n = model.max_cri();
    const Matrix& others = model.others_given_prev();

    Matrix theta = others * model.cri_given_contenders().bottomRows(users);
    theta.col(n - 1) = others * truncation_bracket(model);
    const Vector& pi = model.stationary().probs;
    for (int len = 1; len <= n; ++len)
        theta.row(len - 1) *= pi(len - 1) * model.gamma(len);
    theta = theta.cwiseMax(0.0);

    RefreshPairLaw law;
    law.normalizer = theta.sum();
    if (!(law.normalizer > 0.0))
        throw NumericalError("refresh pair law has no mass");
    law.joint = theta / law.normalizer;
    law.theta = std::move(theta);
    return law;
}

RefreshMoments inter_refresh_moments(const ChainModel& model)
{
    require_traffic(model.config());
    const int n = model.max_cri();
    const Matrix a = continuation_matrix(model);
    const Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(n, n) - a);
    const double rcond = lu.rcond();
    if (!(rcond > kMinReciprocalCondition))
        throw NumericalError(fmt::format("inter-refresh system is singular (rcond estimate {:.3g})", rcond));

    const Vector slots = Vector::LinSpaced(n, 1.0, static_cast<double>(n));
    RefreshMoments moments;
    moments.first = lu.solve(slots);
    const Vector rhs = slots.cwiseProduct(slots) + 2.0 * slots.cwiseProduct(a * moments.first);
    moments.second = lu.solve(rhs);
    return moments;
}

ResetExpectation age_reset_expectation(const ChainModel& model, int prev_len)
{
    require_traffic(model.config());
    if (prev_len < 1 || prev_len > model.max_cri())
        throw std::out_of_range("age_reset_expectation: CRI length out of range");
    const auto t = reset_tables(model);
    return {t.generation_age(prev_len - 1), t.decode_delay(prev_len - 1)};
}

AoiReport average_aoi(const ChainModel& model)
{
    require_traffic(model.config());
    const auto law = refresh_pair_law(model);
    const auto moments = inter_refresh_moments(model);
    const auto reset = reset_tables(model);
    const Vector p0 = law.first_marginal();
    const Vector p1 = law.second_marginal();
    const Vector& pi = model.stationary().probs;
    const int n = model.max_cri();

    AoiReport r;
    r.config = model.config();
    r.max_cri = n;
    r.mean_y = p1.dot(moments.first);
    r.mean_y2 = p1.dot(moments.second);
    const Vector reset_total = reset.generation_age + reset.decode_delay;
    r.mean_zy = reset_total.dot(law.joint * moments.first);
    r.mean_x = p0.dot(reset.generation_age);
    r.mean_delay = p0.dot(reset.decode_delay);
    r.average_aoi = (r.mean_zy + 0.5 * r.mean_y2) / r.mean_y;

    double active = 0.0;
    for (int len = 1; len <= n; ++len) {
        active += pi(len - 1) * model.gamma(len);
        r.mean_cri += pi(len - 1) * len;
    }
    r.delivery_rate = std::clamp(law.normalizer / active, 0.0, 1.0);
    return r;
}

AoiReport average_aoi(const ProtocolConfig& cfg)
{
    cfg.validate();
    require_traffic(cfg);
    return average_aoi(ChainModel(cfg));
}

double delivery_rate(const ChainModel& model)
{
    const auto law = refresh_pair_law(model);
    const Vector& pi = model.stationary().probs;
    double active = 0.0;
    for (int len = 1; len <= model.max_cri(); ++len)
        active += pi(len - 1) * model.gamma(len);
    return std::clamp(law.normalizer / active, 0.0, 1.0);
}

double delivery_rate(const ProtocolConfig& cfg)
{
    cfg.validate();
    require_traffic(cfg);
    return delivery_rate(ChainModel(cfg));
}

double mean_delay(const ChainModel& model)
{
    const auto law = refresh_pair_law(model);
    return law.first_marginal().dot(reset_tables(model).decode_delay);
}

double slotted_aloha_aoi(int users, double gen_prob)
{
    if (users < 1)
        throw ConfigError("slotted ALOHA needs at least one user");
    if (!(gen_prob > 0.0 && gen_prob <= 1.0))
        throw ConfigError("slotted ALOHA generation probability must lie in (0, 1]");
    const double success = gen_prob * std::pow(1.0 - gen_prob, users - 1);
    if (success <= 0.0)
        return std::numeric_limits<double>::infinity();
    return 0.5 + 1.0 / success;
}

LmaxChoice optimize_lmax(int users, double gen_prob, std::span<const std::optional<int>> grid)
{
    if (grid.empty())
        throw ConfigError("optimize_lmax: empty truncation grid");
    const auto larger = [](const std::optional<int>& a, const std::optional<int>& b) {
        if (!a)
            return b.has_value();
        return b && *a > *b;
    };
    std::optional<LmaxChoice> best;
    for (const auto& lmax : grid) {
        const double delta = average_aoi(ProtocolConfig{users, gen_prob, lmax}).average_aoi;
        if (!best) {
            best = LmaxChoice{lmax, delta};
            continue;
        }
        const double tol = 1e-12 * std::abs(best->average_aoi);
        if (delta < best->average_aoi - tol || (delta <= best->average_aoi + tol && larger(lmax, best->max_cri_slots)))
            best = LmaxChoice{lmax, delta};
    }
    return *best;
}

}  // namespace treeaoi
