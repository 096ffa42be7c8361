#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "colearn/errors.hpp"

namespace colearn {

/// PAC-bound and economic parameters shared by every computation.
///
/// The non-degeneracy condition 2a/c > 1/(gamma*alpha_delta) guarantees the
/// outside sample count is strictly positive; validate() enforces it.
struct LearningEnv {
    double alpha_delta = 1.0;
    double beta = 0.0;
    double gamma = 1.0;
    double delta = 0.05;
    double a = 50.0;
    double c = 1.0;
    double r_star = 0.0;
    double theta_min = 0.0;
    double theta_max = 0.0;

    void validate() const {
        auto fail = [](const std::string& msg) { throw config_error("LearningEnv: " + msg); };
        if (!(alpha_delta > 0.0) || !std::isfinite(alpha_delta)) fail("alpha_delta must be positive");
        if (!(beta >= 0.0) || !std::isfinite(beta)) fail("beta must be nonnegative");
        if (!(gamma > 0.0) || !std::isfinite(gamma)) fail("gamma must be positive");
        if (!(delta > 0.0 && delta < 1.0)) fail("delta must lie in (0,1)");
        if (!(a > 0.0) || !std::isfinite(a)) fail("a must be positive");
        if (!(c > 0.0) || !std::isfinite(c)) fail("c must be positive");
        if (!(r_star >= 0.0) || !std::isfinite(r_star)) fail("r_star must be nonnegative");
        if (!(theta_min >= 0.0) || !std::isfinite(theta_min)) fail("theta_min must be nonnegative");
        if (!(theta_max >= theta_min) || !std::isfinite(theta_max)) fail("theta_max must be >= theta_min");
        if (!(2.0 * a / c > 1.0 / (gamma * alpha_delta)))
            fail("degenerate: 2a/c must exceed 1/(gamma*alpha_delta)");
    }
};

/// True types theta_1 < ... < theta_J.
struct AgentPool {
    std::vector<double> thetas;

    std::size_t size() const { return thetas.size(); }

    void validate(const LearningEnv& env) const {
        if (thetas.empty()) throw config_error("AgentPool: at least one agent required");
        for (std::size_t j = 0; j < thetas.size(); ++j) {
            if (!std::isfinite(thetas[j]))
                throw config_error("AgentPool: non-finite type");
            if (thetas[j] < env.theta_min || thetas[j] > env.theta_max)
                throw config_error("AgentPool: type outside [theta_min, theta_max]");
            if (j > 0 && !(thetas[j] > thetas[j - 1]))
                throw config_error(
                    "AgentPool: types must be strictly increasing (duplicates rejected)");
        }
    }
};

/// Risk excess eps(theta, n) = 2[alpha_delta (1+n)^(-gamma) + beta + theta].
inline double risk_excess(double theta, double n, const LearningEnv& env) {
    return 2.0 * (env.alpha_delta * std::pow(1.0 + n, -env.gamma) + env.beta + theta);
}

/// Optimal sample count under the outside option; type-independent.
inline double outside_sample_count(const LearningEnv& env) {
    double n0 = std::pow(2.0 * env.a * env.gamma * env.alpha_delta / env.c,
                         1.0 / (env.gamma + 1.0)) - 1.0;
    if (!(n0 > 0.0))
        throw config_error("degenerate environment: outside sample count is not positive");
    return n0;
}

/// Best achievable utility when training alone on n_outside own samples.
inline double outside_utility(double theta, const LearningEnv& env) {
    double n0 = outside_sample_count(env);
    return -env.a * (env.r_star + risk_excess(theta, n0, env)) - env.c * n0;
}

/// Membership vector, contribution vector, and derived totals.
struct ContributionScheme {
    std::vector<std::uint8_t> b;
    std::vector<double> n;
    double big_n = 0.0;
    double vartheta = std::numeric_limits<double>::quiet_NaN();
    int l_star = 0;  // number of contributors (b_j = 1 and n_j > 0)

    bool has_coalition() const { return big_n > 0.0; }

    static ContributionScheme build(std::vector<std::uint8_t> b, std::vector<double> n,
                                    const AgentPool& pool) {
        if (b.size() != n.size() || b.size() != pool.size())
            throw config_error("ContributionScheme: inconsistent vector lengths");
        ContributionScheme s;
        s.b = std::move(b);
        s.n = std::move(n);
        double total = 0.0, weighted = 0.0;
        int contributors = 0;
        // Non-members may carry their own n_j (it enters their private risk
        // term only); solver outputs always set it to 0.
        for (std::size_t j = 0; j < s.n.size(); ++j) {
            if (s.n[j] < 0.0) throw config_error("ContributionScheme: negative contribution");
            if (s.b[j]) {
                total += s.n[j];
                weighted += s.n[j] * pool.thetas[j];
                if (s.n[j] > 0.0) ++contributors;
            }
        }
        s.big_n = total;
        s.l_star = contributors;
        if (total > 0.0) s.vartheta = weighted / total;
        return s;
    }
};

/// Utility of agent j under a scheme. Members share eps(vartheta, N);
/// outsiders are evaluated at their own (theta_j, n_j).
inline double agent_utility(std::size_t j, const ContributionScheme& scheme,
                            const AgentPool& pool, const LearningEnv& env) {
    if (scheme.b[j]) {
        if (!scheme.has_coalition())
            throw undefined_coalition_error("agent_utility: member of an empty coalition (N = 0)");
        return -env.a * (env.r_star + risk_excess(scheme.vartheta, scheme.big_n, env)) -
               env.c * scheme.n[j];
    }
    return -env.a * (env.r_star + risk_excess(pool.thetas[j], scheme.n[j], env)) -
           env.c * scheme.n[j];
}

/// Total welfare; outsiders are assumed to sample optimally (n_j = n_outside),
/// so their term is exactly outside_utility(theta_j).
inline double welfare(const ContributionScheme& scheme, const AgentPool& pool,
                      const LearningEnv& env) {
    double total = 0.0;
    for (std::size_t j = 0; j < pool.size(); ++j) {
        if (scheme.b[j])
            total += agent_utility(j, scheme, pool, env);
        else
            total += outside_utility(pool.thetas[j], env);
    }
    return total;
}

/// Maximum samples agent j can be asked for without violating participation:
/// nbar_j = n_outside - (a/c)[eps(vartheta, N) - eps(theta_j, n_outside)].
/// May be negative; the caller decides what to do with that.
inline double max_contribution(std::size_t j, const ContributionScheme& scheme,
                               const AgentPool& pool, const LearningEnv& env) {
    if (!scheme.has_coalition())
        throw undefined_coalition_error("max_contribution: empty coalition");
    double n0 = outside_sample_count(env);
    return n0 - (env.a / env.c) * (risk_excess(scheme.vartheta, scheme.big_n, env) -
                                   risk_excess(pool.thetas[j], n0, env));
}

/// Same bound expressed against an explicit (vartheta, N) pair, for callers
/// that have not materialized a scheme yet.
inline double max_contribution_at(double theta_j, double vartheta, double big_n,
                                  const LearningEnv& env) {
    double n0 = outside_sample_count(env);
    return n0 - (env.a / env.c) * (risk_excess(vartheta, big_n, env) -
                                   risk_excess(theta_j, n0, env));
}

}  // namespace colearn
