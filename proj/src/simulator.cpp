#include "treeaoi/simulator.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <queue>
#include <stdexcept>

#include <fmt/format.h>

#include "treeaoi/errors.hpp"

namespace treeaoi {

namespace {

constexpr std::int64_t kNoPacket = -1;
constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();

struct CriTally {
    std::uint64_t violations = 0;
};

// One contention resolution interval with Gallager's counters. `ids` and
// `counters` hold the unresolved contenders; on return they hold whoever was
// cut off by early termination. Returns the CRI length in slots.
template <class Coin, class OnDecode>
int resolve_cri(std::vector<int>& ids, std::vector<int>& counters, std::optional<int> max_cri_slots,
                Coin&& coin, OnDecode&& on_decode, CriTally* tally)
{
    int global = 1;
    int slot = 0;
    for (;;) {
        ++slot;
        int transmitters = 0;
        std::size_t sender = 0;
        for (std::size_t i = 0; i < counters.size(); ++i) {
            if (counters[i] == 0) {
                ++transmitters;
                sender = i;
            }
        }
        if (transmitters >= 2) {
            for (std::size_t i = 0; i < counters.size(); ++i) {
                if (counters[i] == 0)
                    counters[i] = coin(ids[i]) ? 0 : 1;
                else
                    ++counters[i];
            }
            ++global;
        } else {
            if (transmitters == 1) {
                on_decode(ids[sender], slot);
                ids[sender] = ids.back();
                ids.pop_back();
                counters[sender] = counters.back();
                counters.pop_back();
            }
            for (int& c : counters)
                --c;
            --global;
        }

        if (tally) {
            for (int c : counters)
                if (c < 0 || c >= global)
                    ++tally->violations;
            // The global counter may stay positive for a few idle probes of
            // empty subtrees after the last decode, but it never reaches zero
            // while someone is unresolved.
            if (global == 0 && !counters.empty())
                ++tally->violations;
        }

        if (global == 0)
            return slot;
        if (max_cri_slots && slot == *max_cri_slots)
            return slot;
    }
}

template <class T>
void bump(std::vector<T>& hist, int len)
{
    if (static_cast<int>(hist.size()) < len)
        hist.resize(static_cast<std::size_t>(len), 0);
    ++hist[len - 1];
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

struct UserState {
    std::int64_t buffer_ts = kNoPacket;
    std::int64_t flight_ts = kNoPacket;
    std::int64_t next_gen = kNever;
    std::int64_t last_ts = 0;
    std::int64_t last_delivery = 0;
    std::int64_t first_delivery = 0;
    bool has_delivered = false;
    std::mt19937_64 gen_rng;
    std::mt19937_64 coin_rng;
};

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream)
{
    return splitmix64(splitmix64(master) ^ splitmix64(stream * 0xD1B54A32D192ED03ULL + 1));
}

std::int64_t default_warmup(std::int64_t horizon_slots)
{
    return std::max<std::int64_t>(horizon_slots / 10, std::min<std::int64_t>(10'000, horizon_slots / 2));
}

void PairCounts::grow(int len)
{
    if (len <= size_)
        return;
    int next = std::max(len, 2 * size_);
    std::vector<std::uint64_t> bigger(static_cast<std::size_t>(next) * next, 0);
    for (int i = 0; i < size_; ++i)
        std::copy_n(counts_.begin() + static_cast<std::ptrdiff_t>(i) * size_, size_,
                    bigger.begin() + static_cast<std::ptrdiff_t>(i) * next);
    counts_ = std::move(bigger);
    size_ = next;
}

void PairCounts::add(int from_len, int to_len)
{
    grow(std::max(from_len, to_len));
    ++counts_[static_cast<std::size_t>(from_len - 1) * size_ + (to_len - 1)];
}

void PairCounts::merge(const PairCounts& other)
{
    grow(other.size_);
    for (int i = 0; i < other.size_; ++i)
        for (int j = 0; j < other.size_; ++j)
            counts_[static_cast<std::size_t>(i) * size_ + j] += other.counts_[static_cast<std::size_t>(i) * other.size_ + j];
}

std::uint64_t PairCounts::operator()(int from_len, int to_len) const
{
    if (from_len < 1 || to_len < 1 || from_len > size_ || to_len > size_)
        return 0;
    return counts_[static_cast<std::size_t>(from_len - 1) * size_ + (to_len - 1)];
}

std::uint64_t PairCounts::row_total(int from_len) const
{
    std::uint64_t acc = 0;
    for (int j = 1; j <= size_; ++j)
        acc += (*this)(from_len, j);
    return acc;
}

std::optional<double> SimMetrics::user_aoi(int user) const
{
    if (age_time.at(user) <= 0.0)
        return std::nullopt;
    return age_area[user] / age_time[user];
}

std::optional<double> SimMetrics::average_aoi() const
{
    double acc = 0.0;
    int n = 0;
    for (std::size_t u = 0; u < age_area.size(); ++u) {
        if (auto a = user_aoi(static_cast<int>(u))) {
            acc += *a;
            ++n;
        }
    }
    if (n == 0)
        return std::nullopt;
    return acc / n;
}

std::optional<double> SimMetrics::delivery_rate() const
{
    if (entered == 0)
        return std::nullopt;
    return static_cast<double>(delivered) / static_cast<double>(entered);
}

std::optional<double> SimMetrics::mean_delay() const
{
    if (delivered == 0)
        return std::nullopt;
    return delay_sum / static_cast<double>(delivered);
}

std::optional<double> SimMetrics::mean_refresh() const
{
    if (refresh_count == 0)
        return std::nullopt;
    return refresh_sum / static_cast<double>(refresh_count);
}

std::uint64_t SimMetrics::cri_count() const
{
    std::uint64_t acc = 0;
    for (auto c : cri_hist)
        acc += c;
    return acc;
}

void SimMetrics::merge(const SimMetrics& o)
{
    if (o.age_area.size() != age_area.size())
        throw std::invalid_argument("SimMetrics::merge: user counts differ");
    end_slot += o.end_slot;
    warmup_slots += o.warmup_slots;
    replicas += o.replicas;
    for (std::size_t u = 0; u < age_area.size(); ++u) {
        age_area[u] += o.age_area[u];
        age_time[u] += o.age_time[u];
    }
    entered += o.entered;
    delivered += o.delivered;
    dropped += o.dropped;
    generated_total += o.generated_total;
    delivered_total += o.delivered_total;
    dropped_total += o.dropped_total;
    preempted_total += o.preempted_total;
    residual_total += o.residual_total;
    delay_sum += o.delay_sum;
    delay_sq_sum += o.delay_sq_sum;
    reset_sum += o.reset_sum;
    if (cri_hist.size() < o.cri_hist.size())
        cri_hist.resize(o.cri_hist.size(), 0);
    for (std::size_t i = 0; i < o.cri_hist.size(); ++i)
        cri_hist[i] += o.cri_hist[i];
    cri_pairs.merge(o.cri_pairs);
    if (delivery_prev_hist.size() < o.delivery_prev_hist.size())
        delivery_prev_hist.resize(o.delivery_prev_hist.size(), 0);
    for (std::size_t i = 0; i < o.delivery_prev_hist.size(); ++i)
        delivery_prev_hist[i] += o.delivery_prev_hist[i];
    refresh_count += o.refresh_count;
    refresh_sum += o.refresh_sum;
    refresh_sq_sum += o.refresh_sq_sum;
    reset_times_refresh_sum += o.reset_times_refresh_sum;
    cris_checked += o.cris_checked;
    invariant_violations += o.invariant_violations;
}

SimMetrics run_simulation(const ProtocolConfig& cfg, const SimOptions& options)
{
    cfg.validate();
    const std::int64_t horizon = options.horizon_slots;
    const std::int64_t warmup = options.warmup_slots < 0 ? default_warmup(horizon) : options.warmup_slots;
    if (horizon <= 0 || warmup >= horizon)
        throw ConfigError(fmt::format("simulation needs horizon > warmup >= 0 (horizon {}, warmup {})", horizon,
                                      warmup));

    const int users = cfg.users;
    const double rho = cfg.gen_prob;
    std::vector<UserState> state(static_cast<std::size_t>(users));

    using Event = std::pair<std::int64_t, int>;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> arrivals;
    std::geometric_distribution<std::int64_t> gap(rho > 0.0 && rho < 1.0 ? rho : 0.5);
    const auto next_arrival = [&](UserState& s, std::int64_t after) -> std::int64_t {
        if (rho <= 0.0)
            return kNever;
        if (rho >= 1.0)
            return after + 1;
        return after + 1 + gap(s.gen_rng);
    };
    for (int u = 0; u < users; ++u) {
        auto& s = state[u];
        s.gen_rng.seed(derive_seed(options.seed, 2 * static_cast<std::uint64_t>(u)));
        s.coin_rng.seed(derive_seed(options.seed, 2 * static_cast<std::uint64_t>(u) + 1));
        s.next_gen = next_arrival(s, -1);
        if (s.next_gen != kNever)
            arrivals.emplace(s.next_gen, u);
    }

    SimMetrics m;
    m.warmup_slots = warmup;
    m.age_area.assign(static_cast<std::size_t>(users), 0.0);
    m.age_time.assign(static_cast<std::size_t>(users), 0.0);

    CriTally tally;
    CriTally* tally_ptr = options.check_invariants ? &tally : nullptr;

    std::vector<int> pending;
    std::vector<int> ids;
    std::vector<int> counters;
    pending.reserve(static_cast<std::size_t>(users));
    ids.reserve(static_cast<std::size_t>(users));
    counters.reserve(static_cast<std::size_t>(users));

    const auto coin = [&](int id) { return (state[id].coin_rng() >> 63) != 0; };

    std::int64_t now = 0;
    int prev_len = 0;
    while (now < horizon) {
        const std::int64_t start = now;
        const bool counted = start >= warmup;

        // Gated access: exactly the users holding a packet at the boundary contend.
        ids.clear();
        counters.clear();
        for (int id : pending) {
            auto& s = state[id];
            if (tally_ptr && !(s.buffer_ts < start))
                ++tally.violations;
            s.flight_ts = s.buffer_ts;
            s.buffer_ts = kNoPacket;
            ids.push_back(id);
            counters.push_back(0);
        }
        pending.clear();
        if (counted)
            m.entered += ids.size();

        const auto on_decode = [&](int id, int slot) {
            auto& s = state[id];
            const std::int64_t delivered_at = start + slot;
            const std::int64_t ts = s.flight_ts;
            s.flight_ts = kNoPacket;
            ++m.delivered_total;
            if (s.has_delivered) {
                const std::int64_t from = std::max(s.last_delivery, warmup);
                if (delivered_at > from) {
                    const double span = static_cast<double>(delivered_at - from);
                    m.age_area[id] += span * static_cast<double>(from - s.last_ts) + 0.5 * span * span;
                }
                if (s.last_delivery >= warmup) {
                    const double y = static_cast<double>(delivered_at - s.last_delivery);
                    const double z = static_cast<double>(s.last_delivery - s.last_ts);
                    ++m.refresh_count;
                    m.refresh_sum += y;
                    m.refresh_sq_sum += y * y;
                    m.reset_times_refresh_sum += z * y;
                }
            } else {
                s.has_delivered = true;
                s.first_delivery = delivered_at;
            }
            s.last_delivery = delivered_at;
            s.last_ts = ts;
            if (counted) {
                ++m.delivered;
                m.delay_sum += slot;
                m.delay_sq_sum += static_cast<double>(slot) * slot;
                m.reset_sum += static_cast<double>(delivered_at - ts);
                if (prev_len > 0)
                    bump(m.delivery_prev_hist, prev_len);
            }
        };

        const int len = resolve_cri(ids, counters, cfg.max_cri_slots, coin, on_decode, tally_ptr);
        const std::int64_t end = start + len;

        // Early termination: in-flight packets of unresolved users are lost.
        for (int id : ids)
            state[id].flight_ts = kNoPacket;
        m.dropped_total += ids.size();
        if (counted)
            m.dropped += ids.size();

        // Arrivals during this CRI wait in the one-packet buffer for the next one.
        while (!arrivals.empty() && arrivals.top().first < end) {
            const auto [t, id] = arrivals.top();
            arrivals.pop();
            auto& s = state[id];
            ++m.generated_total;
            if (s.buffer_ts == kNoPacket)
                pending.push_back(id);
            else
                ++m.preempted_total;
            s.buffer_ts = t;
            s.next_gen = next_arrival(s, t);
            if (s.next_gen != kNever)
                arrivals.emplace(s.next_gen, id);
        }

        if (counted) {
            bump(m.cri_hist, len);
            if (prev_len > 0)
                m.cri_pairs.add(prev_len, len);
        }
        ++m.cris_checked;
        prev_len = len;
        now = end;
    }

    m.end_slot = now;
    for (int u = 0; u < users; ++u) {
        auto& s = state[u];
        if (s.buffer_ts != kNoPacket)
            ++m.residual_total;
        if (!s.has_delivered)
            continue;
        const std::int64_t from = std::max(s.last_delivery, warmup);
        if (now > from) {
            const double span = static_cast<double>(now - from);
            m.age_area[u] += span * static_cast<double>(from - s.last_ts) + 0.5 * span * span;
        }
        m.age_time[u] = static_cast<double>(std::max<std::int64_t>(0, now - std::max(s.first_delivery, warmup)));
    }

    if (options.check_invariants) {
        if (m.entered != m.delivered + m.dropped)
            ++tally.violations;
        if (m.generated_total != m.delivered_total + m.dropped_total + m.preempted_total + m.residual_total)
            ++tally.violations;
    }
    m.invariant_violations = tally.violations;
    return m;
}

CriReplay replay_cri(int contenders, std::optional<int> max_cri_slots, std::mt19937_64& rng)
{
    if (contenders < 0)
        throw std::invalid_argument("replay_cri: negative contender count");
    if (max_cri_slots && *max_cri_slots < 1)
        throw std::invalid_argument("replay_cri: truncation length must be positive");
    std::vector<int> ids(static_cast<std::size_t>(contenders));
    for (int i = 0; i < contenders; ++i)
        ids[i] = i;
    std::vector<int> counters(static_cast<std::size_t>(contenders), 0);
    CriReplay out;
    out.length = resolve_cri(
        ids, counters, max_cri_slots, [&](int) { return (rng() >> 63) != 0; },
        [&](int id, int slot) {
            if (id == 0)
                out.tagged_decode_slot = slot;
        },
        nullptr);
    return out;
}

CriReplay replay_cri(int contenders, std::optional<int> max_cri_slots, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return replay_cri(contenders, max_cri_slots, rng);
}

}  // namespace treeaoi
