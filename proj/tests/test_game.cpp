#include <doctest.h>

#include <cmath>

#include "colearn/game.hpp"
#include "support.hpp"

using namespace colearn;
using testsupport::s0;

namespace {

ActionProfile all_out(std::size_t j) { return ActionProfile(j, Action::out()); }

ActionProfile grand_truthful(const AgentPool& pool) {
    ActionProfile p;
    for (double t : pool.thetas) p.push_back(Action::join(t));
    return p;
}

}  // namespace

TEST_CASE("all-out profile pays the outside option") {
    LearningEnv env = s0();
    AgentPool pool{{0.0, 0.03, 0.06}};
    auto payoffs = naive_payoffs(all_out(3), pool, env);
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(payoffs[j] == doctest::Approx(outside_utility(pool.thetas[j], env)));
}

TEST_CASE("lone coalition replicates the outside option whatever is declared") {
    LearningEnv env = s0();
    AgentPool pool{{0.0, 0.03, 0.06}};
    for (double declared : {0.0, 0.02, 0.06}) {
        ActionProfile p = all_out(3);
        p[1] = Action::join(declared);
        CHECK(naive_payoff(1, p, pool, env) ==
              doctest::Approx(outside_utility(pool.thetas[1], env)).epsilon(1e-8));
    }
}

TEST_CASE("binding-mode payoff identity v_j = o_j + 2a[(theta-decl) - (vt - vt~)]") {
    LearningEnv env = s0();
    AgentPool pool{{0.0, 0.03, 0.06}};
    ActionProfile p{Action::join(0.01), Action::join(0.02), Action::join(0.05)};

    std::vector<double> declared{0.01, 0.02, 0.05};
    auto sol = solve_scheme(declared, SchemeMode::binding_fixed_point, env);
    double vt_true = 0.0, vt_decl = 0.0;
    for (std::size_t m = 0; m < 3; ++m) {
        vt_true += sol.scheme.n[m] * pool.thetas[m];
        vt_decl += sol.scheme.n[m] * declared[m];
    }
    vt_true /= sol.scheme.big_n;
    vt_decl /= sol.scheme.big_n;

    auto payoffs = naive_payoffs(p, pool, env);
    for (std::size_t j = 0; j < 3; ++j) {
        if (sol.scheme.n[j] <= 0.0) continue;
        double expected = outside_utility(pool.thetas[j], env) +
                          2.0 * env.a * ((pool.thetas[j] - declared[j]) - (vt_true - vt_decl));
        CHECK(payoffs[j] == doctest::Approx(expected).epsilon(1e-7));
    }
}

TEST_CASE("best response: lone member weakly prefers staying, ties to current") {
    LearningEnv env = s0();
    AgentPool pool{{0.0, 0.03, 0.06}};
    auto grid = declared_type_grid(env, 5);

    ActionProfile p = all_out(3);
    auto [action, value] = best_response(0, p, grid, pool, env);
    CHECK_FALSE(action.in);  // tie resolves toward the current (out) action
    CHECK(value == doctest::Approx(outside_utility(0.0, env)));
}

TEST_CASE("best response: contributors are driven toward theta_min") {
    LearningEnv env = s0();
    AgentPool pool{{0.0, 0.03, 0.06}};
    auto grid = declared_type_grid(env, 5);

    ActionProfile p{Action::join(0.03), Action::join(0.045), Action::out()};
    auto [action, value] = best_response(0, p, grid, pool, env);
    REQUIRE(action.in);
    CHECK(action.declared == doctest::Approx(env.theta_min));
    CHECK(value > naive_payoff(0, p, pool, env));
}

TEST_CASE("best response on a singleton grid is exhaustive over two actions") {
    LearningEnv env = s0();
    AgentPool pool{{0.0, 0.06}};
    std::vector<double> grid{env.theta_min};
    ActionProfile p{Action::join(env.theta_min), Action::out()};
    auto [action, value] = best_response(1, p, grid, pool, env);
    (void)value;
    CHECK((action.in || !action.in));  // member of the closed candidate set
    CHECK((!action.in || action.declared == env.theta_min));
}

TEST_CASE("certify: all-out is Nash, grand truthful coalition is not") {
    LearningEnv env = s0();
    AgentPool pool{{0.0, 0.03, 0.06}};
    auto grid = declared_type_grid(env, 5);

    auto quiet = certify_nash(all_out(3), grid, pool, env);
    CHECK(quiet.is_nash);
    CHECK(quiet.coalition_shape == CoalitionShape::empty);
    CHECK_FALSE(quiet.witness.has_value());

    auto truthful = certify_nash(grand_truthful(pool), grid, pool, env);
    CHECK_FALSE(truthful.is_nash);
    REQUIRE(truthful.witness.has_value());
    CHECK(truthful.witness->gain > kTieEpsilon);
}

TEST_CASE("certify: worst-only shape is recognized") {
    LearningEnv env = s0();
    AgentPool pool{{0.0, 0.03, 0.06}};
    ActionProfile p = all_out(3);
    p[2] = Action::join(env.theta_min);
    auto report = certify_nash(p, declared_type_grid(env, 5), pool, env);
    CHECK(report.coalition_shape == CoalitionShape::worst_only);
}

TEST_CASE("unravelling: exhaustive enumeration leaves only empty or worst-only") {
    LearningEnv env = s0();
    SUBCASE("J=2, five grid points") {
        AgentPool pool{{0.0, 0.06}};
        auto nash = enumerate_pure_nash(declared_type_grid(env, 5), pool, env);
        CHECK(!nash.empty());
        for (const auto& eq : nash) {
            bool ok = eq.coalition_shape == CoalitionShape::empty ||
                      eq.coalition_shape == CoalitionShape::worst_only;
            CHECK(ok);
        }
    }
    SUBCASE("J=1 degenerate") {
        AgentPool pool{{0.02}};
        LearningEnv env1 = env;
        auto nash = enumerate_pure_nash(declared_type_grid(env1, 3), pool, env1);
        CHECK(!nash.empty());
        for (const auto& eq : nash) {
            bool ok = eq.coalition_shape == CoalitionShape::empty ||
                      eq.coalition_shape == CoalitionShape::worst_only;
            CHECK(ok);
        }
    }
    SUBCASE("J=3 on the singleton grid") {
        AgentPool pool{{0.0, 0.03, 0.06}};
        auto nash = enumerate_pure_nash({env.theta_min}, pool, env);
        CHECK(!nash.empty());
        for (const auto& eq : nash) {
            bool ok = eq.coalition_shape == CoalitionShape::empty ||
                      eq.coalition_shape == CoalitionShape::worst_only;
            CHECK(ok);
        }
    }
}

TEST_CASE("enumeration refuses oversized problems") {
    LearningEnv env = s0();
    AgentPool pool{{0.0, 0.01, 0.02, 0.03, 0.04, 0.05}};
    // J > j_cap
    CHECK_THROWS_AS(enumerate_pure_nash(declared_type_grid(env, 3), pool, env),
                    size_refusal_error);
    AgentPool small{{0.0, 0.06}};
    CHECK_THROWS_AS(enumerate_pure_nash(declared_type_grid(env, 11), small, env),
                    size_refusal_error);
}

TEST_CASE("delta identity and theta_min dominance at certified equilibria") {
    LearningEnv env = s0();
    AgentPool pool{{0.0, 0.03, 0.06}};
    auto grid = declared_type_grid(env, 5);
    auto nash = enumerate_pure_nash(grid, pool, env);
    for (const auto& eq : nash) {
        // collect contributors (members with positive asked contribution)
        std::vector<std::size_t> members;
        std::vector<double> declared;
        for (std::size_t j = 0; j < pool.size(); ++j)
            if (eq.profile[j].in) {
                members.push_back(j);
                declared.push_back(eq.profile[j].declared);
            }
        if (members.empty()) continue;
        auto sol = solve_scheme(declared, SchemeMode::binding_fixed_point, env);
        std::vector<std::size_t> contributors;
        for (std::size_t m = 0; m < members.size(); ++m)
            if (sol.scheme.n[m] > 0.0) contributors.push_back(m);
        double delta = std::numeric_limits<double>::quiet_NaN();
        for (auto m : contributors) {
            double d = pool.thetas[members[m]] - declared[m];
            if (std::isnan(delta))
                delta = d;
            else
                CHECK(std::abs(d - delta) < 1e-6);
            // Strict dominance pins declarations at theta_min only when the
            // contributor is not alone; a lone contributor is indifferent
            // across declarations and certifies with zero margin.
            if (contributors.size() >= 2)
                CHECK(declared[m] == doctest::Approx(env.theta_min));
            else
                CHECK(eq.max_gain <= kTieEpsilon);
        }
    }
}

TEST_CASE("theta_min dominance pointwise: member payoff non-increasing in own declaration") {
    LearningEnv env = s0();
    AgentPool pool{{0.0, 0.03, 0.06}};
    auto grid = declared_type_grid(env, 5);
    ActionProfile p{Action::join(env.theta_min), Action::join(0.015), Action::out()};
    double prev = std::numeric_limits<double>::infinity();
    for (double g : grid) {
        ActionProfile q = p;
        q[1] = Action::join(g);
        // only applies while agent 1 remains a contributor
        std::vector<double> declared{q[0].declared, q[1].declared};
        auto sol = solve_scheme(declared, SchemeMode::binding_fixed_point, env);
        if (sol.scheme.n[1] <= 0.0) break;
        double v = naive_payoff(1, q, pool, env);
        CHECK(v <= prev + 1e-9);
        prev = v;
    }
}

TEST_CASE("best-response dynamics: truthful J=2 start unravels to the worst agent") {
    LearningEnv env = s0();
    AgentPool pool{{0.0, 0.06}};
    auto grid = declared_type_grid(env, 5);
    auto [profile, converged, trace] =
        best_response_dynamics(grand_truthful(pool), grid, pool, env);
    CHECK(converged);
    CHECK(!trace.empty());
    auto shape = coalition_shape_of(profile);
    bool ok = shape == CoalitionShape::empty || shape == CoalitionShape::worst_only;
    CHECK(ok);
    auto report = certify_nash(profile, grid, pool, env);
    CHECK(report.is_nash);
}

TEST_CASE("best-response dynamics: free-rider escalation cycles are reported") {
    // For J >= 3 declared-type escalation by would-be free riders produces a
    // limit cycle; the dynamics must say so rather than pretend convergence.
    LearningEnv env = s0();
    AgentPool pool{{0.0, 0.03, 0.06}};
    auto grid = declared_type_grid(env, 5);
    auto [profile, converged, trace] =
        best_response_dynamics(grand_truthful(pool), grid, pool, env,
                               SchemeMode::binding_fixed_point, 50);
    (void)profile;
    CHECK_FALSE(converged);
    CHECK(trace.size() == 50 * pool.size());
}

TEST_CASE("best-response dynamics: fixed points") {
    LearningEnv env = s0();
    AgentPool pool{{0.0, 0.03, 0.06}};
    auto grid = declared_type_grid(env, 5);

    auto [still, converged, trace] = best_response_dynamics(all_out(3), grid, pool, env);
    CHECK(converged);
    for (const auto& a : still) CHECK_FALSE(a.in);
    CHECK(trace.size() == pool.size());  // a single quiet round suffices

    // worst agent alone at theta_min stays put
    ActionProfile worst = all_out(3);
    worst[2] = Action::join(env.theta_min);
    auto [end, conv2, trace2] = best_response_dynamics(worst, grid, pool, env);
    (void)trace2;
    CHECK(conv2);
    CHECK(end[2].in);
}

TEST_CASE("certification is bit-reproducible") {
    LearningEnv env = s0();
    AgentPool pool{{0.0, 0.03, 0.06}};
    auto grid = declared_type_grid(env, 5);
    auto p = grand_truthful(pool);
    auto r1 = certify_nash(p, grid, pool, env);
    auto r2 = certify_nash(p, grid, pool, env);
    CHECK(r1.is_nash == r2.is_nash);
    REQUIRE(r1.payoffs.size() == r2.payoffs.size());
    for (std::size_t j = 0; j < r1.payoffs.size(); ++j)
        CHECK(r1.payoffs[j] == r2.payoffs[j]);
    REQUIRE(r1.witness.has_value() == r2.witness.has_value());
    if (r1.witness) {
        CHECK(r1.witness->agent == r2.witness->agent);
        CHECK(r1.witness->gain == r2.witness->gain);
    }
}
