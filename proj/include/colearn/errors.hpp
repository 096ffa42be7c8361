#pragma once

#include <stdexcept>
#include <string>

namespace colearn {

// Error classes map onto the CLI exit codes (see tools/bench_cli.cpp).
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Coalition utilities requested while no samples are pooled (N = 0).
struct undefined_coalition_error : std::runtime_error {
    explicit undefined_coalition_error(const std::string& msg) : std::runtime_error(msg) {}
};

// The verification floor q_floor would be non-positive for this environment.
struct infeasible_verification_error : std::runtime_error {
    explicit infeasible_verification_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct solver_convergence_error : std::runtime_error {
    solver_convergence_error(const std::string& msg, double residual)
        : std::runtime_error(msg), last_residual(residual) {}
    double last_residual;
};

// A candidate contributor count whose binding fixed point has negative entries.
struct infeasible_count_error : std::runtime_error {
    explicit infeasible_count_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Problem size exceeds what exhaustive enumeration is willing to attempt.
struct size_refusal_error : std::runtime_error {
    explicit size_refusal_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace colearn
