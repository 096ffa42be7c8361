#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "colearn/econ.hpp"
#include "colearn/errors.hpp"

namespace colearn {

enum class SchemeMode { closed_form, binding_fixed_point, brute_force };

inline const char* to_string(SchemeMode m) {
    switch (m) {
        case SchemeMode::closed_form: return "closed_form";
        case SchemeMode::binding_fixed_point: return "binding_fixed_point";
        case SchemeMode::brute_force: return "brute_force";
    }
    return "?";
}

struct SchemeSolution {
    ContributionScheme scheme;
    SchemeMode mode = SchemeMode::closed_form;
    double residual = 0.0;   // max_j |n_j - nbar_j| against the realized (vartheta, N)
    bool consistent = true;  // contributor-count consistency certificate
    int l_star = 0;
};

/// Nbar = (n_outside + 1) |B|^(1/(1+gamma)) - 1, the fixed coalition total.
inline double target_total_samples(std::size_t coalition_size, const LearningEnv& env) {
    double n0 = outside_sample_count(env);
    return (n0 + 1.0) * std::pow(static_cast<double>(coalition_size),
                                 1.0 / (1.0 + env.gamma)) - 1.0;
}

namespace detail {

/// Sorted view over declared types. Exact ties are broken by original index
/// and separated by a deterministic 1e-12 jitter used only inside the solver.
struct SortedTypes {
    std::vector<double> values;       // strictly increasing, possibly jittered
    std::vector<std::size_t> order;   // order[k] = original index of sorted slot k

    explicit SortedTypes(const std::vector<double>& raw) {
        order.resize(raw.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t i, std::size_t k) { return raw[i] < raw[k]; });
        values.resize(raw.size());
        for (std::size_t k = 0; k < raw.size(); ++k) values[k] = raw[order[k]];
        for (std::size_t k = 1; k < values.size(); ++k)
            if (!(values[k] > values[k - 1]))
                values[k] = values[k - 1] + 1e-12;
    }

    /// Scatter a sorted-slot vector back to original agent order.
    std::vector<double> unsort(const std::vector<double>& sorted_vals) const {
        std::vector<double> out(sorted_vals.size());
        for (std::size_t k = 0; k < sorted_vals.size(); ++k) out[order[k]] = sorted_vals[k];
        return out;
    }
};

/// Corollary closed form for a fixed contributor count l over sorted types.
inline std::vector<double> closed_form_contributions(const std::vector<double>& sorted,
                                                     int l, const LearningEnv& env) {
    const auto j_total = sorted.size();
    double nbar_total = target_total_samples(j_total, env);
    double mean_l = 0.0;
    for (int k = 0; k < l; ++k) mean_l += sorted[k];
    mean_l /= l;
    std::vector<double> n(j_total, 0.0);
    for (int k = 0; k < l; ++k)
        n[k] = nbar_total / l + (2.0 * env.a / env.c) * (sorted[k] - mean_l);
    return n;
}

inline double weighted_type(const std::vector<double>& n, const std::vector<double>& types) {
    double total = 0.0, weighted = 0.0;
    for (std::size_t k = 0; k < n.size(); ++k) {
        total += n[k];
        weighted += n[k] * types[k];
    }
    return total > 0.0 ? weighted / total : 0.0;
}

}  // namespace detail

/// Candidate search for the contributor count L*: the closed-form scheme at L
/// must be nonnegative and the prefix sums of nbar_k must first cross Nbar at
/// exactly L. Falls back to the largest nonnegative L with consistent=false.
inline std::pair<int, bool> select_contributor_count(const std::vector<double>& sorted,
                                                     const LearningEnv& env) {
    const int j_total = static_cast<int>(sorted.size());
    const double nbar_total = target_total_samples(sorted.size(), env);
    int fallback = 1;
    for (int l = 1; l <= j_total; ++l) {
        auto n = detail::closed_form_contributions(sorted, l, env);
        bool nonneg = true;
        for (int k = 0; k < l; ++k)
            if (n[k] < 0.0) { nonneg = false; break; }
        if (!nonneg) continue;
        fallback = l;
        double vartheta = detail::weighted_type(n, sorted);
        int crossing = j_total + 1;
        double prefix = 0.0;
        for (int k = 0; k < j_total; ++k) {
            prefix += max_contribution_at(sorted[k], vartheta, nbar_total, env);
            if (prefix >= nbar_total) { crossing = k + 1; break; }
        }
        if (crossing == l) return {l, true};
    }
    return {fallback, false};
}

/// Simplified optimal contribution scheme over declared types (any order).
/// B is all-ones; contributions come back in the caller's agent order.
inline SchemeSolution simplified_scheme(const std::vector<double>& declared,
                                        const LearningEnv& env) {
    if (declared.empty()) throw config_error("simplified_scheme: empty type vector");
    detail::SortedTypes st(declared);
    auto [l, consistent] = select_contributor_count(st.values, env);
    auto n_sorted = detail::closed_form_contributions(st.values, l, env);
    for (auto& v : n_sorted) v = std::max(v, 0.0);

    SchemeSolution sol;
    sol.mode = SchemeMode::closed_form;
    sol.consistent = consistent;
    sol.l_star = l;
    AgentPool as_pool{declared};
    sol.scheme = ContributionScheme::build(
        std::vector<std::uint8_t>(declared.size(), 1), st.unsort(n_sorted), as_pool);
    double res = 0.0;
    for (std::size_t k = 0; k < n_sorted.size(); ++k)
        if (n_sorted[k] > 0.0)
            res = std::max(res, std::abs(n_sorted[k] -
                    max_contribution_at(st.values[k], sol.scheme.vartheta,
                                        sol.scheme.big_n, env)));
    sol.residual = res;
    return sol;
}

/// Exact binding variant: solves n_j = nbar_j(vartheta, N) for j <= l by a
/// damped fixed-point iteration on (vartheta, N). Every contributor's
/// participation constraint holds with equality at the solution.
inline SchemeSolution binding_fixed_point_scheme(const std::vector<double>& declared, int l,
                                                 const LearningEnv& env) {
    if (declared.empty()) throw config_error("binding_fixed_point_scheme: empty type vector");
    if (l < 1 || l > static_cast<int>(declared.size()))
        throw config_error("binding_fixed_point_scheme: l out of range");
    detail::SortedTypes st(declared);

    double vartheta = 0.0;
    for (int k = 0; k < l; ++k) vartheta += st.values[k];
    vartheta /= l;
    double big_n = target_total_samples(static_cast<std::size_t>(l), env);

    constexpr int max_iter = 10000;
    constexpr double tol = 1e-10;
    std::vector<double> n(st.values.size(), 0.0);
    double change = 0.0;
    bool converged = false;
    for (int it = 0; it < max_iter; ++it) {
        double total = 0.0, weighted = 0.0;
        for (int k = 0; k < l; ++k) {
            n[k] = max_contribution_at(st.values[k], vartheta, big_n, env);
            total += n[k];
            weighted += n[k] * st.values[k];
        }
        if (!(total > 0.0))
            throw infeasible_count_error("binding fixed point: nonpositive coalition total");
        double vartheta_next = vartheta + 0.5 * (weighted / total - vartheta);
        change = std::max(std::abs(vartheta_next - vartheta), std::abs(total - big_n));
        vartheta = vartheta_next;
        big_n = total;
        if (change < tol) { converged = true; break; }
    }
    if (!converged)
        throw solver_convergence_error("binding fixed point did not converge", change);
    for (int k = 0; k < l; ++k)
        if (n[k] < 0.0)
            throw infeasible_count_error("binding fixed point: negative contribution at l=" +
                                         std::to_string(l));

    SchemeSolution sol;
    sol.mode = SchemeMode::binding_fixed_point;
    sol.l_star = l;
    AgentPool as_pool{declared};
    sol.scheme = ContributionScheme::build(
        std::vector<std::uint8_t>(declared.size(), 1), st.unsort(n), as_pool);
    double res = 0.0;
    for (int k = 0; k < l; ++k)
        res = std::max(res, std::abs(n[k] - max_contribution_at(st.values[k], sol.scheme.vartheta,
                                                                sol.scheme.big_n, env)));
    sol.residual = res;
    return sol;
}

/// Scheme for declared types under the requested mode. Binding mode picks l
/// by the consistency search and retreats to smaller l while infeasible.
inline SchemeSolution solve_scheme(const std::vector<double>& declared, SchemeMode mode,
                                   const LearningEnv& env) {
    if (mode == SchemeMode::closed_form) return simplified_scheme(declared, env);
    detail::SortedTypes st(declared);
    auto [l, consistent] = select_contributor_count(st.values, env);
    for (int candidate = l; candidate >= 1; --candidate) {
        try {
            auto sol = binding_fixed_point_scheme(declared, candidate, env);
            sol.consistent = consistent && candidate == l;
            return sol;
        } catch (const infeasible_count_error&) {
            if (candidate == 1) throw;
        }
    }
    throw infeasible_count_error("solve_scheme: no feasible contributor count");
}

/// Grid-enumeration oracle for small pools: all membership vectors, all
/// contribution grids, participation-feasible welfare argmax.
inline SchemeSolution brute_force_optimal_scheme(const AgentPool& pool, const LearningEnv& env,
                                                 double grid_step) {
    const std::size_t j_total = pool.size();
    if (j_total > 4)
        throw size_refusal_error("brute_force_optimal_scheme: J > 4");
    if (!(grid_step > 0.0)) throw config_error("grid_step must be positive");

    const double n0 = outside_sample_count(env);
    const double n_cap =
        1.1 * (n0 + (2.0 * env.a / env.c) * (env.theta_max - env.theta_min));
    const int grid_points = static_cast<int>(std::floor(n_cap / grid_step)) + 1;

    std::vector<double> outside(j_total);
    for (std::size_t j = 0; j < j_total; ++j) outside[j] = outside_utility(pool.thetas[j], env);

    // Baseline: everyone outside.
    ContributionScheme best = ContributionScheme::build(
        std::vector<std::uint8_t>(j_total, 0), std::vector<double>(j_total, 0.0), pool);
    double best_welfare = welfare(best, pool, env);

    std::vector<std::uint8_t> b(j_total, 0);
    std::vector<double> n(j_total, 0.0);
    for (unsigned mask = 1; mask < (1u << j_total); ++mask) {
        std::vector<std::size_t> members;
        for (std::size_t j = 0; j < j_total; ++j) {
            b[j] = (mask >> j) & 1u;
            if (b[j]) members.push_back(j);
        }
        std::vector<int> idx(members.size(), 0);
        while (true) {
            double total = 0.0, weighted = 0.0, member_cost = 0.0;
            for (std::size_t m = 0; m < members.size(); ++m) {
                double nv = idx[m] * grid_step;
                n[members[m]] = nv;
                total += nv;
                weighted += nv * pool.thetas[members[m]];
                member_cost += env.c * nv;
            }
            if (total > 0.0) {
                double vartheta = weighted / total;
                double member_base =
                    -env.a * (env.r_star + risk_excess(vartheta, total, env));
                bool feasible = true;
                double w = 0.0;
                for (std::size_t m = 0; m < members.size(); ++m) {
                    double u = member_base - env.c * n[members[m]];
                    if (u < outside[members[m]] - 1e-9) { feasible = false; break; }
                    w += u;
                }
                if (feasible) {
                    for (std::size_t j = 0; j < j_total; ++j)
                        if (!b[j]) w += outside[j];
                    // ties go to the larger coalition (deterministic)
                    bool better = w > best_welfare + 1e-12;
                    bool tied_bigger =
                        w > best_welfare - 1e-12 &&
                        static_cast<int>(members.size()) >
                            std::count(best.b.begin(), best.b.end(), std::uint8_t{1});
                    if (better || tied_bigger) {
                        best_welfare = std::max(best_welfare, w);
                        best = ContributionScheme::build(b, n, pool);
                    }
                }
            }
            // advance mixed-radix counter
            std::size_t pos = 0;
            while (pos < idx.size() && ++idx[pos] >= grid_points) idx[pos++] = 0;
            if (pos == idx.size()) break;
        }
        std::fill(n.begin(), n.end(), 0.0);
    }

    SchemeSolution sol;
    sol.scheme = std::move(best);
    sol.mode = SchemeMode::brute_force;
    sol.l_star = sol.scheme.l_star;
    return sol;
}

/// W(oracle) - W(simplified); nonnegative up to the oracle's grid tolerance.
inline double welfare_gap(const AgentPool& pool, const LearningEnv& env, double grid_step) {
    auto oracle = brute_force_optimal_scheme(pool, env, grid_step);
    auto simplified = simplified_scheme(pool.thetas, env);
    return welfare(oracle.scheme, pool, env) - welfare(simplified.scheme, pool, env);
}

}  // namespace colearn
