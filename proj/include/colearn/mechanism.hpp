#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "colearn/econ.hpp"
#include "colearn/errors.hpp"
#include "colearn/rng.hpp"
#include "colearn/scheme.hpp"

namespace colearn {

struct TransferVector {
    std::vector<double> t;
};

/// VCG pivot transfers for the grand coalition at declared types:
/// t_j = sum_{k!=j} u_k(j removed, n unchanged) - sum_{k!=j} u_k(all in, n).
inline TransferVector vcg_transfers(const std::vector<double>& declared, const AgentPool& pool,
                                    const LearningEnv& env,
                                    SchemeMode mode = SchemeMode::binding_fixed_point) {
    if (declared.size() != pool.size())
        throw config_error("vcg_transfers: declared size mismatch");
    auto sol = solve_scheme(declared, mode, env);
    const auto& n = sol.scheme.n;
    const std::size_t j_total = pool.size();

    double big_n = 0.0, weighted = 0.0;
    for (std::size_t k = 0; k < j_total; ++k) {
        big_n += n[k];
        weighted += n[k] * pool.thetas[k];
    }
    double full_base = -env.a * (env.r_star + risk_excess(weighted / big_n, big_n, env));

    TransferVector out;
    out.t.resize(j_total, 0.0);
    for (std::size_t j = 0; j < j_total; ++j) {
        double with_j = 0.0, without_j = 0.0;
        for (std::size_t k = 0; k < j_total; ++k) {
            if (k == j) continue;
            with_j += full_base - env.c * n[k];
        }
        double rem_n = big_n - n[j];
        double rem_weighted = weighted - n[j] * pool.thetas[j];
        if (rem_n > 0.0) {
            double rem_base = -env.a * (env.r_star + risk_excess(rem_weighted / rem_n, rem_n, env));
            for (std::size_t k = 0; k < j_total; ++k) {
                if (k == j) continue;
                without_j += rem_base - env.c * n[k];
            }
        } else {
            // removing the only contributor: remaining members hold just
            // their own n_k samples
            for (std::size_t k = 0; k < j_total; ++k) {
                if (k == j) continue;
                without_j += -env.a * (env.r_star + risk_excess(pool.thetas[k], n[k], env)) -
                             env.c * n[k];
            }
        }
        out.t[j] = without_j - with_j;
    }
    return out;
}

/// Some agent needing a strictly positive transfer (-t_j > 0), if any.
inline std::optional<std::size_t> check_positive_transfer(const TransferVector& tv) {
    for (std::size_t j = 0; j < tv.t.size(); ++j)
        if (tv.t[j] < 0.0) return j;
    return std::nullopt;
}

/// Largest admissible verification floor: n_outside - 2(a/c)(theta_max - theta_min).
inline double q_floor(const LearningEnv& env) {
    double bound = outside_sample_count(env) -
                   2.0 * (env.a / env.c) * (env.theta_max - env.theta_min);
    if (!(bound > 0.0))
        throw infeasible_verification_error(
            "verification floor would be nonpositive for this environment");
    return bound;
}

/// Biased estimate shift for agent j (0-based): +eta everywhere, -eta at j.
inline std::vector<double> bias_vector(std::size_t j, std::size_t coalition_size, double eta) {
    if (j >= coalition_size) throw config_error("bias_vector: index out of range");
    std::vector<double> v(coalition_size, eta);
    v[j] = -eta;
    return v;
}

struct VerificationRound {
    std::vector<std::size_t> members;  // pool indices of coalition members
    std::vector<double> estimates;     // theta-hat per member
    double eta = 0.0;
    double floor = 0.0;                // q underline actually used
    std::vector<double> requested;     // max[q_floor, n*_j(theta_hat + eta_j)]
    std::vector<double> kept;          // m_j
    std::vector<double> payoffs;       // per pool agent
};

/// One round of the verification mechanism: per member j the aggregator runs
/// the simplified scheme on the j-biased estimates, requests
/// max[q_floor, n*_j], and keeps that amount only if n*_j > 0. Payoffs use
/// the TRUE types weighted by the kept sample counts.
inline VerificationRound verification_round(const std::vector<std::uint8_t>& b,
                                            const AgentPool& pool, const LearningEnv& env,
                                            const std::vector<double>& estimates, double eta,
                                            std::optional<double> floor_override = std::nullopt) {
    double qf = q_floor(env);
    if (floor_override) {
        if (*floor_override > qf + 1e-12 || !(*floor_override > 0.0))
            throw config_error("verification floor must lie in (0, q_floor]");
        qf = *floor_override;
    }

    VerificationRound round;
    round.eta = eta;
    round.floor = qf;
    for (std::size_t j = 0; j < pool.size(); ++j)
        if (b[j]) round.members.push_back(j);
    if (round.members.size() != estimates.size())
        throw config_error("verification_round: one estimate per member required");
    round.estimates = estimates;

    const std::size_t m_count = round.members.size();
    round.requested.resize(m_count, 0.0);
    round.kept.resize(m_count, 0.0);
    for (std::size_t m = 0; m < m_count; ++m) {
        std::vector<double> biased = estimates;
        auto shift = bias_vector(m, m_count, eta);
        for (std::size_t k = 0; k < m_count; ++k) biased[k] += shift[k];
        auto sol = simplified_scheme(biased, env);
        double n_star = sol.scheme.n[m];
        round.requested[m] = std::max(qf, n_star);
        round.kept[m] = n_star > 0.0 ? round.requested[m] : 0.0;
    }

    double total = 0.0, weighted = 0.0;
    for (std::size_t m = 0; m < m_count; ++m) {
        total += round.kept[m];
        weighted += round.kept[m] * pool.thetas[round.members[m]];
    }
    round.payoffs.resize(pool.size());
    for (std::size_t j = 0; j < pool.size(); ++j)
        if (!b[j]) round.payoffs[j] = outside_utility(pool.thetas[j], env);
    if (m_count > 0) {
        if (!(total > 0.0))
            throw undefined_coalition_error("verification_round: no samples kept");
        double base = -env.a * (env.r_star + risk_excess(weighted / total, total, env));
        for (std::size_t m = 0; m < m_count; ++m)
            round.payoffs[round.members[m]] = base - env.c * round.requested[m];
    }
    return round;
}

/// Margin slack absorbing float noise at knife-edge (binding) payoffs.
constexpr double kNashTolerance = 1e-9;

struct NashCheckResult {
    bool is_nash = false;
    std::optional<std::size_t> witness_agent;
    double worst_margin = 0.0;  // min_j (vhat_j - o_j)
};

/// The coalition game under verification is binary per agent and the out
/// payoff is exactly o(theta_j), so J unilateral checks are exact.
inline NashCheckResult grand_coalition_nash_check(const AgentPool& pool, const LearningEnv& env,
                                                  const std::vector<double>& estimates,
                                                  double eta,
                                                  std::optional<double> floor_override =
                                                      std::nullopt) {
    auto round = verification_round(std::vector<std::uint8_t>(pool.size(), 1), pool, env,
                                    estimates, eta, floor_override);
    NashCheckResult result;
    result.is_nash = true;
    result.worst_margin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pool.size(); ++j) {
        double margin = round.payoffs[j] - outside_utility(pool.thetas[j], env);
        if (margin < result.worst_margin) result.worst_margin = margin;
        if (margin < -kNashTolerance && result.is_nash) {
            result.is_nash = false;
            result.witness_agent = j;
        }
    }
    return result;
}

enum class NoiseModel { uniform_within_eta, corners_within_eta };

inline const char* to_string(NoiseModel m) {
    return m == NoiseModel::uniform_within_eta ? "uniform_within_eta" : "corners_within_eta";
}

struct MonteCarloTrial {
    std::size_t trial;
    std::vector<double> estimates;
    bool is_nash;
    std::optional<std::size_t> witness_agent;
    double worst_margin;
};

struct MonteCarloResult {
    double fraction = 0.0;
    std::size_t trials = 0;
    std::vector<MonteCarloTrial> rows;
};

/// Estimates for one trial: theta_j plus within-eta noise, a pure function of
/// (seed, trial, agent) through the trial substream.
inline std::vector<double> draw_estimates(const AgentPool& pool, NoiseModel model, double eta,
                                          const CounterRng& trial_rng) {
    std::vector<double> estimates(pool.size());
    for (std::size_t j = 0; j < pool.size(); ++j) {
        double u = trial_rng.uniform(j);
        double xi = model == NoiseModel::uniform_within_eta ? eta * (2.0 * u - 1.0)
                                                            : (u < 0.5 ? -eta : eta);
        estimates[j] = pool.thetas[j] + xi;
    }
    return estimates;
}

/// Draws within-eta estimate errors per (seed, trial, agent) and reports the
/// fraction of trials in which the grand coalition certifies as Nash.
inline MonteCarloResult monte_carlo_nash_probability(
    const AgentPool& pool, const LearningEnv& env, NoiseModel model, std::size_t trials,
    std::uint64_t seed, double eta, std::optional<double> floor_override = std::nullopt,
    bool keep_rows = true) {
    if (trials < 1) throw config_error("monte_carlo_nash_probability: trials >= 1");
    MonteCarloResult result;
    result.trials = trials;
    result.rows.reserve(keep_rows ? trials : 0);
    CounterRng rng{seed};
    std::size_t hits = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        auto estimates = draw_estimates(pool, model, eta, rng.substream(t));
        auto check = grand_coalition_nash_check(pool, env, estimates, eta, floor_override);
        if (check.is_nash) ++hits;
        if (keep_rows || !check.is_nash)
            result.rows.push_back({t, std::move(estimates), check.is_nash,
                                   check.witness_agent, check.worst_margin});
    }
    result.fraction = static_cast<double>(hits) / static_cast<double>(trials);
    return result;
}

/// Wilson score interval for a binomial fraction.
inline std::pair<double, double> wilson_interval(std::size_t hits, std::size_t trials,
                                                 double z = 1.959963984540054) {
    if (trials == 0) return {0.0, 1.0};
    double n = static_cast<double>(trials);
    double p = static_cast<double>(hits) / n;
    double z2 = z * z;
    double denom = 1.0 + z2 / n;
    double center = (p + z2 / (2.0 * n)) / denom;
    double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

}  // namespace colearn
