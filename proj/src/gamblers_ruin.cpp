#include "collapse/gamblers_ruin.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace collapse {

namespace {

std::int64_t to_quanta(double value, double quantum, const char* what) {
    double q = value / quantum;
    auto k = static_cast<std::int64_t>(std::llround(q));
    if (std::abs(q - static_cast<double>(k)) > 1e-9)
        throw std::invalid_argument(std::string("gamblers-ruin: ") + what +
                                    " is not a whole number of stakes");
    return k;
}

struct QuantaState {
    std::vector<std::int64_t> w;
    std::int64_t total = 0;
};

QuantaState quantize(const GameConfig& cfg) {
    if (cfg.delta <= 0.0 || cfg.delta > 0.5)
        throw std::invalid_argument("gamblers-ruin: delta must be in (0, 0.5]");
    if (cfg.quanta_per_stake < 1)
        throw std::invalid_argument("gamblers-ruin: quanta_per_stake must be >= 1");
    const double quantum = cfg.delta / static_cast<double>(cfg.quanta_per_stake);
    std::int64_t total = to_quanta(1.0, quantum, "1/quantum");
    QuantaState st;
    st.total = total;
    std::int64_t sum = 0;
    for (double f : cfg.fractions) {
        if (f < 0.0 || f > 1.0)
            throw std::invalid_argument("gamblers-ruin: fractions must be in [0,1]");
        std::int64_t k = to_quanta(f, quantum, "a fraction");
        st.w.push_back(k);
        sum += k;
    }
    if (sum != total)
        throw std::invalid_argument("gamblers-ruin: fractions must sum to 1");
    return st;
}

std::int64_t stake_quanta(const GameConfig& cfg, std::int64_t lo, std::int64_t total) {
    if (cfg.stake_rule == StakeRule::Constant)
        return std::min(cfg.quanta_per_stake, lo);
    double x = static_cast<double>(lo) / static_cast<double>(total);
    double frac = stake_schedule_shrinking(x, cfg.delta, cfg.shrink_power);
    auto s = static_cast<std::int64_t>(std::llround(frac * static_cast<double>(total)));
    s = std::max<std::int64_t>(s, 1);
    return std::min(s, lo);  // fixed before the coin, so the exchange stays fair
}

void maybe_trace(const GameConfig& cfg, const QuantaState& st, std::uint64_t toss,
                 GameResult& res) {
    if (!cfg.record_trace) return;
    if (toss % std::max<std::uint64_t>(cfg.trace_stride, 1) != 0) return;
    std::vector<double> frac(st.w.size());
    for (std::size_t i = 0; i < st.w.size(); ++i)
        frac[i] = static_cast<double>(st.w[i]) / static_cast<double>(st.total);
    res.wealth_trace.push_back(std::move(frac));
}

}  // namespace

rational win_probability_exact(std::int64_t k, std::int64_t total_quanta) {
    const std::int64_t K = total_quanta;
    if (K < 1 || K > 100000)
        throw std::invalid_argument("gamblers-ruin: total quanta out of range [1, 1e5]");
    if (k < 0 || k > K)
        throw std::invalid_argument("gamblers-ruin: wealth outside [0, total]");
    if (k == 0) return rational(0);
    if (k == K) return rational(1);
    // Thomas elimination on the tridiagonal system (-1/2, 1, -1/2) Q = rhs,
    // rhs_j = (1/2)·[j == K-1]; back-substitution gives Q_k.
    std::vector<rational> cp(K), dp(K);  // 1-indexed interior rows 1..K-1
    rational a(-1, 2);
    cp[1] = a;            // c' = c / b with b = 1
    dp[1] = (K == 2) ? rational(1, 2) : rational(0);  // row 1 carries the rhs when it is also row K-1
    for (std::int64_t j = 2; j <= K - 1; ++j) {
        rational denom = 1 - a * cp[j - 1];
        cp[j] = a / denom;
        rational rhs = (j == K - 1) ? rational(1, 2) : rational(0);
        dp[j] = (rhs - a * dp[j - 1]) / denom;
    }
    std::vector<rational> q(K + 1);
    q[K - 1] = dp[K - 1];
    for (std::int64_t j = K - 2; j >= k; --j) q[j] = dp[j] - cp[j] * q[j + 1];
    return q[k];
}

rational win_probability_exact(double x, double delta) {
    if (delta <= 0.0 || delta > 1.0)
        throw std::invalid_argument("gamblers-ruin: delta must be in (0, 1]");
    std::int64_t K = to_quanta(1.0, delta, "1/delta");
    std::int64_t k = to_quanta(x, delta, "x");
    return win_probability_exact(k, K);
}

rational expected_duration_exact(std::int64_t k, std::int64_t total_quanta) {
    const std::int64_t K = total_quanta;
    if (K < 1 || K > 100000)
        throw std::invalid_argument("gamblers-ruin: total quanta out of range [1, 1e5]");
    if (k < 0 || k > K)
        throw std::invalid_argument("gamblers-ruin: wealth outside [0, total]");
    if (k == 0 || k == K) return rational(0);
    std::vector<rational> cp(K), dp(K);
    rational a(-1, 2);
    cp[1] = a;
    dp[1] = rational(1);
    for (std::int64_t j = 2; j <= K - 1; ++j) {
        rational denom = 1 - a * cp[j - 1];
        cp[j] = a / denom;
        dp[j] = (1 - a * dp[j - 1]) / denom;
    }
    std::vector<rational> d(K + 1);
    d[K - 1] = dp[K - 1];
    for (std::int64_t j = K - 2; j >= k; --j) d[j] = dp[j] - cp[j] * d[j + 1];
    return d[k];
}

double stake_schedule_shrinking(double x, double delta0, double power) {
    double m = std::min(x, 1.0 - x);
    if (m <= 0.0) return 0.0;
    return delta0 * std::pow(m / 0.5, power);
}

GameResult play_game(const GameConfig& cfg, RngStreamPolicy policy) {
    if (cfg.fractions.size() != 2)
        throw std::invalid_argument("play_game: exactly two players");
    QuantaState st = quantize(cfg);
    RngStream rng(policy);
    GameResult res;
    maybe_trace(cfg, st, 0, res);

    std::int64_t k = st.w[0];
    const std::int64_t K = st.total;
    while (k != 0 && k != K) {
        if (res.n_tosses >= cfg.max_tosses) {
            res.winner = -1;
            return res;  // unfinished, flagged by finished=false
        }
        std::int64_t s = stake_quanta(cfg, std::min(k, K - k), K);
        if (rng.next_u64() & 1ULL)
            k += s;
        else
            k -= s;
        ++res.n_tosses;
        st.w[0] = k;
        st.w[1] = K - k;
        maybe_trace(cfg, st, res.n_tosses, res);
    }
    res.finished = true;
    res.winner = (k == K) ? 0 : 1;
    return res;
}

GameResult play_multiplayer(const GameConfig& cfg, RngStreamPolicy policy) {
    if (cfg.fractions.size() < 2)
        throw std::invalid_argument("play_multiplayer: need at least two players");
    QuantaState st = quantize(cfg);
    RngStream rng(policy);
    GameResult res;
    maybe_trace(cfg, st, 0, res);

    const std::int64_t K = st.total;
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < st.w.size(); ++i)
        if (st.w[i] > 0) active.push_back(i);

    while (active.size() > 1) {
        if (res.n_tosses >= cfg.max_tosses) {
            res.winner = -1;
            return res;
        }
        std::uint64_t ia = rng.below(active.size());
        std::uint64_t ib = rng.below(active.size() - 1);
        if (ib >= ia) ++ib;
        std::size_t pa = active[ia], pb = active[ib];
        std::int64_t lo = std::min(st.w[pa], st.w[pb]);
        std::int64_t s = stake_quanta(cfg, lo, K);
        if (rng.next_u64() & 1ULL) std::swap(pa, pb);  // pa wins the toss
        st.w[pa] += s;
        st.w[pb] -= s;
        ++res.n_tosses;
        if (st.w[pb] == 0)
            active.erase(std::find(active.begin(), active.end(), pb));
        maybe_trace(cfg, st, res.n_tosses, res);
    }
    res.finished = true;
    res.winner = static_cast<int>(active.front());
    return res;
}

}  // namespace collapse
