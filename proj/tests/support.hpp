#pragma once

#include <vector>

#include "colearn/econ.hpp"
#include "colearn/rng.hpp"

namespace testsupport {

// Reference environment used throughout: n_outside = 9, 2a/c = 100.
inline colearn::LearningEnv s0() {
    colearn::LearningEnv env;
    env.alpha_delta = 1.0;
    env.beta = 0.0;
    env.gamma = 1.0;
    env.delta = 0.05;
    env.a = 50.0;
    env.c = 1.0;
    env.r_star = 0.0;
    env.theta_min = 0.0;
    env.theta_max = 0.06;
    return env;
}

// Random valid environment with a non-trivial type range.
inline colearn::LearningEnv random_env(const colearn::CounterRng& rng, std::uint64_t k) {
    auto r = rng.substream(k);
    colearn::LearningEnv env;
    env.alpha_delta = r.uniform(0, 0.5, 2.0);
    env.beta = r.uniform(1, 0.0, 0.05);
    env.gamma = r.uniform(2, 0.5, 2.0);
    env.a = r.uniform(3, 20.0, 120.0);
    env.c = r.uniform(4, 0.5, 2.0);
    env.r_star = r.uniform(5, 0.0, 0.2);
    env.theta_min = 0.0;
    // Keep the range small enough that the verification floor stays feasible.
    double n0 = std::pow(2.0 * env.a * env.gamma * env.alpha_delta / env.c,
                         1.0 / (env.gamma + 1.0)) - 1.0;
    if (n0 < 1.0) { env.a *= 4.0; }
    n0 = std::pow(2.0 * env.a * env.gamma * env.alpha_delta / env.c,
                  1.0 / (env.gamma + 1.0)) - 1.0;
    env.theta_max = r.uniform(6, 0.2, 0.8) * n0 / (2.0 * env.a / env.c);
    env.validate();
    return env;
}

// Strictly increasing random types inside [theta_min, theta_max].
inline colearn::AgentPool random_pool(const colearn::CounterRng& rng, std::uint64_t k,
                                      const colearn::LearningEnv& env, std::size_t j_count) {
    auto r = rng.substream(k ^ 0xA5A5A5A5ULL);
    std::vector<double> t(j_count);
    double span = env.theta_max - env.theta_min;
    for (std::size_t j = 0; j < j_count; ++j)
        t[j] = env.theta_min + span * (j + r.uniform(j, 0.05, 0.95)) / j_count;
    colearn::AgentPool pool{t};
    pool.validate(env);
    return pool;
}

inline colearn::AgentPool evenly_spaced_pool(std::size_t j_count, double lo, double hi) {
    std::vector<double> t(j_count);
    for (std::size_t j = 0; j < j_count; ++j)
        t[j] = j_count == 1 ? lo : lo + (hi - lo) * static_cast<double>(j) / (j_count - 1);
    return colearn::AgentPool{t};
}

}  // namespace testsupport
