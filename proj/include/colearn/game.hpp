#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "colearn/econ.hpp"
#include "colearn/errors.hpp"
#include "colearn/scheme.hpp"

namespace colearn {

/// One declaration in the naive direct-revelation mechanism: stay out, or
/// enter with a declared type.
struct Action {
    bool in = false;
    double declared = std::numeric_limits<double>::quiet_NaN();

    static Action out() { return {}; }
    static Action join(double declared_theta) { return {true, declared_theta}; }

    friend bool operator==(const Action& x, const Action& y) {
        if (x.in != y.in) return false;
        return !x.in || x.declared == y.declared;
    }
};

using ActionProfile = std::vector<Action>;

enum class CoalitionShape { empty, worst_only, other };

inline const char* to_string(CoalitionShape s) {
    switch (s) {
        case CoalitionShape::empty: return "empty";
        case CoalitionShape::worst_only: return "worst_only";
        case CoalitionShape::other: return "other";
    }
    return "?";
}

struct EquilibriumReport {
    ActionProfile profile;
    std::vector<double> payoffs;
    bool is_nash = false;
    struct Witness {
        std::size_t agent;
        Action deviation;
        double gain;
    };
    std::optional<Witness> witness;
    CoalitionShape coalition_shape = CoalitionShape::empty;
    double max_gain = 0.0;  // best unilateral improvement found (indifference margin)
};

inline CoalitionShape coalition_shape_of(const ActionProfile& profile) {
    std::size_t members = 0;
    bool worst_in = false;
    for (std::size_t j = 0; j < profile.size(); ++j) {
        if (profile[j].in) {
            ++members;
            if (j + 1 == profile.size()) worst_in = true;
        }
    }
    if (members == 0) return CoalitionShape::empty;
    if (members == 1 && worst_in) return CoalitionShape::worst_only;
    return CoalitionShape::other;
}

/// Payoffs of every agent under the naive mechanism: the scheme is computed
/// from declared types of the in-agents, but the collaborative risk uses the
/// weighted average of TRUE types. Out-agents earn their outside option.
inline std::vector<double> naive_payoffs(const ActionProfile& profile, const AgentPool& pool,
                                         const LearningEnv& env,
                                         SchemeMode mode = SchemeMode::binding_fixed_point) {
    std::vector<double> payoffs(pool.size());
    std::vector<std::size_t> members;
    std::vector<double> declared;
    for (std::size_t j = 0; j < pool.size(); ++j) {
        if (profile[j].in) {
            members.push_back(j);
            declared.push_back(profile[j].declared);
        } else {
            payoffs[j] = outside_utility(pool.thetas[j], env);
        }
    }
    if (members.empty()) return payoffs;

    auto sol = solve_scheme(declared, mode, env);
    double big_n = sol.scheme.big_n;
    double weighted_true = 0.0;
    for (std::size_t m = 0; m < members.size(); ++m)
        weighted_true += sol.scheme.n[m] * pool.thetas[members[m]];
    double vartheta_true = weighted_true / big_n;
    double base = -env.a * (env.r_star + risk_excess(vartheta_true, big_n, env));
    for (std::size_t m = 0; m < members.size(); ++m)
        payoffs[members[m]] = base - env.c * sol.scheme.n[m];
    return payoffs;
}

inline double naive_payoff(std::size_t j, const ActionProfile& profile, const AgentPool& pool,
                           const LearningEnv& env,
                           SchemeMode mode = SchemeMode::binding_fixed_point) {
    return naive_payoffs(profile, pool, env, mode)[j];
}

/// Uniform declared-type grid over [theta_min, theta_max], both endpoints in.
inline std::vector<double> declared_type_grid(const LearningEnv& env, std::size_t points) {
    if (points < 1) throw config_error("declared_type_grid: at least one point");
    std::vector<double> g(points);
    for (std::size_t k = 0; k < points; ++k)
        g[k] = points == 1
                   ? env.theta_min
                   : env.theta_min + (env.theta_max - env.theta_min) *
                                         static_cast<double>(k) / (points - 1);
    return g;
}

constexpr double kTieEpsilon = 1e-9;

/// Best response of agent j over {out} + grid declarations. Ties resolve to
/// the current action, then out, then the smaller declared type.
inline std::pair<Action, double> best_response(std::size_t j, const ActionProfile& profile,
                                               const std::vector<double>& grid,
                                               const AgentPool& pool, const LearningEnv& env,
                                               SchemeMode mode = SchemeMode::binding_fixed_point) {
    std::vector<Action> candidates;
    candidates.push_back(profile[j]);
    if (profile[j].in) candidates.push_back(Action::out());
    for (double g : grid)
        if (!(profile[j].in && profile[j].declared == g)) candidates.push_back(Action::join(g));

    ActionProfile scratch = profile;
    double best_value = -std::numeric_limits<double>::infinity();
    std::vector<double> values(candidates.size());
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        scratch[j] = candidates[k];
        values[k] = naive_payoff(j, scratch, pool, env, mode);
        best_value = std::max(best_value, values[k]);
    }
    for (std::size_t k = 0; k < candidates.size(); ++k)
        if (values[k] >= best_value - kTieEpsilon) return {candidates[k], values[k]};
    return {profile[j], values[0]};  // unreachable
}

/// Checks every unilateral deviation; a profile is Nash iff no deviation
/// gains more than tie_epsilon.
inline EquilibriumReport certify_nash(const ActionProfile& profile,
                                      const std::vector<double>& grid, const AgentPool& pool,
                                      const LearningEnv& env,
                                      SchemeMode mode = SchemeMode::binding_fixed_point,
                                      double tie_epsilon = kTieEpsilon) {
    EquilibriumReport report;
    report.profile = profile;
    report.payoffs = naive_payoffs(profile, pool, env, mode);
    report.coalition_shape = coalition_shape_of(profile);
    report.is_nash = true;

    ActionProfile scratch = profile;
    for (std::size_t j = 0; j < pool.size(); ++j) {
        std::vector<Action> deviations;
        if (profile[j].in) deviations.push_back(Action::out());
        for (double g : grid)
            if (!(profile[j].in && profile[j].declared == g))
                deviations.push_back(Action::join(g));
        for (const Action& d : deviations) {
            scratch[j] = d;
            double gain = naive_payoff(j, scratch, pool, env, mode) - report.payoffs[j];
            report.max_gain = std::max(report.max_gain, gain);
            if (gain > tie_epsilon && report.is_nash) {
                report.is_nash = false;
                report.witness = EquilibriumReport::Witness{j, d, gain};
            }
        }
        scratch[j] = profile[j];
    }
    return report;
}

/// Exhaustive certification of all (|grid|+1)^J profiles; returns the Nash set.
inline std::vector<EquilibriumReport> enumerate_pure_nash(
    const std::vector<double>& grid, const AgentPool& pool, const LearningEnv& env,
    SchemeMode mode = SchemeMode::binding_fixed_point, int j_cap = 4) {
    const std::size_t j_total = pool.size();
    if (static_cast<int>(j_total) > j_cap)
        throw size_refusal_error("enumerate_pure_nash: J exceeds j_cap");
    if (grid.size() > 9) throw size_refusal_error("enumerate_pure_nash: grid too large");

    const std::size_t radix = grid.size() + 1;
    std::size_t count = 1;
    for (std::size_t j = 0; j < j_total; ++j) count *= radix;

    auto decode = [&](std::size_t code) {
        ActionProfile p(j_total);
        for (std::size_t j = 0; j < j_total; ++j) {
            std::size_t digit = code % radix;
            code /= radix;
            p[j] = digit == 0 ? Action::out() : Action::join(grid[digit - 1]);
        }
        return p;
    };

    // Payoff table; every deviation profile is itself in the table.
    std::vector<std::vector<double>> payoff(count);
    for (std::size_t code = 0; code < count; ++code)
        payoff[code] = naive_payoffs(decode(code), pool, env, mode);

    std::vector<std::size_t> radix_pow(j_total, 1);
    for (std::size_t j = 1; j < j_total; ++j) radix_pow[j] = radix_pow[j - 1] * radix;

    std::vector<EquilibriumReport> nash;
    for (std::size_t code = 0; code < count; ++code) {
        EquilibriumReport report;
        report.profile = decode(code);
        report.payoffs = payoff[code];
        report.coalition_shape = coalition_shape_of(report.profile);
        report.is_nash = true;
        for (std::size_t j = 0; j < j_total; ++j) {
            std::size_t digit = (code / radix_pow[j]) % radix;
            for (std::size_t alt = 0; alt < radix; ++alt) {
                if (alt == digit) continue;
                std::size_t dev_code = code + (alt - digit) * radix_pow[j];
                double gain = payoff[dev_code][j] - report.payoffs[j];
                report.max_gain = std::max(report.max_gain, gain);
                if (gain > kTieEpsilon && report.is_nash) {
                    report.is_nash = false;
                    report.witness = EquilibriumReport::Witness{
                        j, alt == 0 ? Action::out() : Action::join(grid[alt - 1]), gain};
                }
            }
        }
        if (report.is_nash) nash.push_back(std::move(report));
    }
    return nash;
}

struct DynamicsTraceRow {
    int round;
    std::size_t agent;
    Action chosen;
    int coalition_size;
};

/// Round-robin best responses until a fixed point or max_rounds.
inline std::tuple<ActionProfile, bool, std::vector<DynamicsTraceRow>> best_response_dynamics(
    const ActionProfile& start, const std::vector<double>& grid, const AgentPool& pool,
    const LearningEnv& env, SchemeMode mode = SchemeMode::binding_fixed_point,
    int max_rounds = 100) {
    ActionProfile profile = start;
    std::vector<DynamicsTraceRow> trace;
    bool converged = false;
    for (int round = 1; round <= max_rounds && !converged; ++round) {
        bool changed = false;
        for (std::size_t j = 0; j < pool.size(); ++j) {
            auto [action, value] = best_response(j, profile, grid, pool, env, mode);
            (void)value;
            if (!(action == profile[j])) {
                profile[j] = action;
                changed = true;
            }
            int size = 0;
            for (const auto& a : profile) size += a.in ? 1 : 0;
            trace.push_back({round, j, action, size});
        }
        converged = !changed;
    }
    return {profile, converged, trace};
}

}  // namespace colearn
