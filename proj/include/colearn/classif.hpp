#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "colearn/econ.hpp"
#include "colearn/errors.hpp"
#include "colearn/rng.hpp"

namespace colearn {

struct LabeledSample {
    double x = 0.0;
    int y = 1;  // -1 or +1
};

/// g_{s,sigma}(x) = sigma * sign(x - s), with sign(0) = +1.
struct ThresholdClassifier {
    double s = 0.0;
    int sigma = 1;

    int predict(double x) const { return x >= s ? sigma : -sigma; }
};

/// Uniform X on [0,1]; Y = sign(X - t_star) flipped with probability flip_prob.
struct SyntheticAgentDist {
    double t_star = 0.5;
    double flip_prob = 0.0;

    void validate() const {
        if (!(t_star >= 0.0 && t_star <= 1.0))
            throw config_error("SyntheticAgentDist: t_star must lie in [0,1]");
        if (!(flip_prob >= 0.0 && flip_prob < 0.5))
            throw config_error("SyntheticAgentDist: flip_prob must lie in [0, 1/2)");
    }
};

inline std::vector<LabeledSample> sample(const SyntheticAgentDist& dist, std::size_t n,
                                         const CounterRng& rng) {
    dist.validate();
    std::vector<LabeledSample> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double x = rng.uniform(2 * i);
        int y = x >= dist.t_star ? 1 : -1;
        if (rng.uniform(2 * i + 1) < dist.flip_prob) y = -y;
        out[i] = {x, y};
    }
    return out;
}

/// Exact type of a label-flip distribution: the sup risk gap is attained at
/// the zero-risk classifier, where it equals the flip probability.
inline double true_type(const SyntheticAgentDist& dist) {
    dist.validate();
    return dist.flip_prob;
}

namespace detail {

/// Candidate thresholds that exhaust the 0-1 landscape: below everything,
/// midpoints between distinct consecutive x-values, above everything.
inline std::vector<double> threshold_candidates(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    std::vector<double> cands;
    cands.reserve(xs.size() + 1);
    cands.push_back(xs.front() - 1.0);
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (xs[i] > xs[i - 1]) cands.push_back(0.5 * (xs[i - 1] + xs[i]));
    cands.push_back(xs.back() + 1.0);
    return cands;
}

inline long long error_count(const std::vector<LabeledSample>& samples,
                             const ThresholdClassifier& g) {
    long long e = 0;
    for (const auto& s : samples) e += g.predict(s.x) != s.y ? 1 : 0;
    return e;
}

}  // namespace detail

struct ErmResult {
    ThresholdClassifier classifier;
    double empirical_risk = 0.0;
};

/// Exact 0-1 ERM over the threshold class; ties prefer the smaller threshold,
/// then the +1 orientation.
inline ErmResult erm_fit(const std::vector<LabeledSample>& samples) {
    if (samples.empty()) throw config_error("erm_fit: empty sample set");
    std::vector<LabeledSample> sorted = samples;
    std::sort(sorted.begin(), sorted.end(),
              [](const LabeledSample& a, const LabeledSample& b) { return a.x < b.x; });

    std::vector<double> xs(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) xs[i] = sorted[i].x;
    auto cands = detail::threshold_candidates(xs);

    // errors of g_{s,+1} = #{x >= s, y = -1} + #{x < s, y = +1}; one prefix
    // pass per candidate via the sorted order
    const long long n = static_cast<long long>(sorted.size());
    long long total_neg = 0;
    for (const auto& s : sorted) total_neg += s.y == -1 ? 1 : 0;

    ErmResult best;
    long long best_err = n + 1;
    std::size_t i = 0;        // samples strictly below the current candidate
    long long pos_below = 0;  // +1 labels among them
    for (double cand : cands) {
        while (i < sorted.size() && sorted[i].x < cand) {
            pos_below += sorted[i].y == 1 ? 1 : 0;
            ++i;
        }
        long long neg_below = static_cast<long long>(i) - pos_below;
        long long err_plus = (total_neg - neg_below) + pos_below;
        for (int sigma : {1, -1}) {
            long long err = sigma == 1 ? err_plus : n - err_plus;
            if (err < best_err) {
                best_err = err;
                best.classifier = {cand, sigma};
            }
        }
    }
    best.empirical_risk = static_cast<double>(best_err) / static_cast<double>(n);
    return best;
}

namespace detail {

/// Sweeps the merged candidate thresholds once and hands each visitor the
/// exact error counts of g_{s,+1} on both sets; sigma = -1 errors follow by
/// complement. O(n log n).
template <typename Visit>
inline void sweep_error_counts(const std::vector<LabeledSample>& samples_j,
                               const std::vector<LabeledSample>& samples_0, Visit&& visit) {
    if (samples_j.empty() || samples_0.empty())
        throw config_error("h-divergence: empty sample set");
    struct Tagged {
        double x;
        int y;
        bool from_j;
    };
    std::vector<Tagged> merged;
    merged.reserve(samples_j.size() + samples_0.size());
    for (const auto& s : samples_j) merged.push_back({s.x, s.y, true});
    for (const auto& s : samples_0) merged.push_back({s.x, s.y, false});
    std::sort(merged.begin(), merged.end(),
              [](const Tagged& a, const Tagged& b) { return a.x < b.x; });

    long long total_neg_j = 0, total_neg_0 = 0;
    for (const auto& s : merged) (s.from_j ? total_neg_j : total_neg_0) += s.y == -1 ? 1 : 0;

    // candidates: below everything, each distinct-x boundary, above everything
    long long pos_below_j = 0, neg_below_j = 0, pos_below_0 = 0, neg_below_0 = 0;
    std::size_t i = 0;
    for (;;) {
        long long err_j = (total_neg_j - neg_below_j) + pos_below_j;
        long long err_0 = (total_neg_0 - neg_below_0) + pos_below_0;
        visit(err_j, err_0);
        if (i == merged.size()) break;
        double x = merged[i].x;
        while (i < merged.size() && merged[i].x == x) {
            if (merged[i].from_j)
                (merged[i].y == 1 ? pos_below_j : neg_below_j) += 1;
            else
                (merged[i].y == 1 ? pos_below_0 : neg_below_0) += 1;
            ++i;
        }
    }
}

/// Max over the class of nj*n0 * (Rhat_j(g) - Rhat_0(g)), as an exact integer.
/// By symmetry (negating g flips the sign) this is also the max of the
/// absolute gap.
inline long long scaled_gap_sup(const std::vector<LabeledSample>& samples_j,
                                const std::vector<LabeledSample>& samples_0) {
    const long long nj = static_cast<long long>(samples_j.size());
    const long long n0 = static_cast<long long>(samples_0.size());
    long long best = std::numeric_limits<long long>::min();
    sweep_error_counts(samples_j, samples_0, [&](long long err_j, long long err_0) {
        long long gap = err_j * n0 - err_0 * nj;  // sigma = +1
        best = std::max(best, std::max(gap, -gap));
    });
    return best;
}

}  // namespace detail

/// sup_g |Rhat_j(g) - Rhat_0(g)| over the threshold class, exact.
inline double h_divergence_sup_scan(const std::vector<LabeledSample>& samples_j,
                                    const std::vector<LabeledSample>& samples_0) {
    long long scale = static_cast<long long>(samples_j.size()) *
                      static_cast<long long>(samples_0.size());
    return static_cast<double>(detail::scaled_gap_sup(samples_j, samples_0)) /
           static_cast<double>(scale);
}

/// 1 - inf_g [Rhat_0(g) + Rhat_{j,flipped}(g)]; the risks stay normalized by
/// their own sample counts. Agrees with the sup-scan exactly because
/// Rhat(-g) = 1 - Rhat(g) and the class is orientation-closed.
inline double h_divergence_label_flip(const std::vector<LabeledSample>& samples_j,
                                      const std::vector<LabeledSample>& samples_0) {
    std::vector<LabeledSample> flipped = samples_j;
    for (auto& s : flipped) s.y = -s.y;
    const long long nj = static_cast<long long>(flipped.size());
    const long long n0 = static_cast<long long>(samples_0.size());
    const long long scale = nj * n0;
    long long best_sum = std::numeric_limits<long long>::max();
    detail::sweep_error_counts(flipped, samples_0, [&](long long err_j, long long err_0) {
        long long sum = err_0 * nj + err_j * n0;             // sigma = +1
        long long sum_neg = (n0 - err_0) * nj + (nj - err_j) * n0;  // sigma = -1
        best_sum = std::min(best_sum, std::min(sum, sum_neg));
    });
    // 1 - best_sum/scale, with the subtraction done on the exact integers
    return static_cast<double>(scale - best_sum) / static_cast<double>(scale);
}

namespace detail {

/// sup_g sum_i sign_i * g(x_i) for sorted xs: the class realizes exactly the
/// splits at distinct-value boundaries, each in both orientations.
inline long long threshold_sup(const std::vector<double>& sorted_xs,
                               const std::vector<int>& signs) {
    const std::size_t n = sorted_xs.size();
    long long total = 0;
    for (int s : signs) total += s;
    long long best = std::llabs(total);  // split before everything
    long long prefix = 0;
    for (std::size_t k = 0; k < n; ++k) {
        prefix += signs[k];
        bool boundary = k + 1 == n || sorted_xs[k + 1] > sorted_xs[k];
        if (boundary) best = std::max(best, std::llabs(total - 2 * prefix));
    }
    return best;
}

}  // namespace detail

/// Empirical Rademacher complexity of the threshold class on a point set:
/// exact enumeration of all sign vectors for n <= 20, seeded Monte Carlo
/// above.
inline double rademacher_exact(std::vector<double> xs, std::uint64_t seed = 0,
                               std::size_t mc_trials = 100000) {
    if (xs.empty()) throw config_error("rademacher_exact: empty point set");
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    std::vector<int> signs(n);
    if (n <= 20) {
        double acc = 0.0;
        const std::uint64_t count = 1ULL << n;
        for (std::uint64_t mask = 0; mask < count; ++mask) {
            for (std::size_t i = 0; i < n; ++i) signs[i] = (mask >> i) & 1 ? 1 : -1;
            acc += static_cast<double>(detail::threshold_sup(xs, signs));
        }
        return acc / static_cast<double>(count) / static_cast<double>(n);
    }
    CounterRng rng{seed};
    double acc = 0.0;
    for (std::size_t t = 0; t < mc_trials; ++t) {
        auto draw = rng.substream(t);
        for (std::size_t i = 0; i < n; ++i) signs[i] = draw.uniform(i) < 0.5 ? -1 : 1;
        acc += static_cast<double>(detail::threshold_sup(xs, signs));
    }
    return acc / static_cast<double>(mc_trials) / static_cast<double>(n);
}

enum class PacPreset { env_direct, classif_unitrate, classif_halfrate };

inline const char* to_string(PacPreset p) {
    switch (p) {
        case PacPreset::env_direct: return "env_direct";
        case PacPreset::classif_unitrate: return "classif_unitrate";
        case PacPreset::classif_halfrate: return "classif_halfrate";
    }
    return "?";
}

/// High-probability bound on the type-estimation error from q own samples and
/// q' target samples, at confidence delta/j_count (union bound over agents).
/// The classif presets use alpha_{delta/(4J)} in closed form; env_direct
/// takes alpha_delta and beta straight from the environment.
inline double eta_bound(std::size_t q, std::size_t q_prime, const LearningEnv& env,
                        std::size_t j_count, PacPreset preset = PacPreset::classif_unitrate,
                        double rad = 0.0) {
    if (j_count < 1) throw config_error("eta_bound: j_count >= 1");
    double alpha, gamma, slack;
    switch (preset) {
        case PacPreset::classif_unitrate:
            alpha = std::sqrt(std::log(4.0 * static_cast<double>(j_count) / env.delta));
            gamma = 1.0;
            slack = 2.0 * rad;
            break;
        case PacPreset::classif_halfrate:
            alpha = std::sqrt(std::log(4.0 * static_cast<double>(j_count) / env.delta) / 2.0);
            gamma = 0.5;
            slack = 2.0 * rad;
            break;
        case PacPreset::env_direct:
        default:
            alpha = env.alpha_delta;
            gamma = env.gamma;
            slack = 2.0 * env.beta;
            break;
    }
    return alpha * (std::pow(1.0 + static_cast<double>(q), -gamma) +
                    std::pow(1.0 + static_cast<double>(q_prime), -gamma)) +
           slack;
}

struct EstimationReport {
    std::size_t trial = 0;
    std::size_t agent = 0;
    double theta_true = 0.0;
    double theta_hat = 0.0;
    double bound = 0.0;
    bool within = false;
};

struct CoverageResult {
    std::vector<EstimationReport> reports;
    double within_fraction = 0.0;
};

/// Draws q samples per agent and q' from the target per trial, estimates each
/// type by label-flip H-divergence, and checks |theta_hat - theta| against
/// the eta bound (with the empirical Rademacher of the realized target
/// sample standing in for the population term).
inline CoverageResult coverage_experiment(const std::vector<SyntheticAgentDist>& agents,
                                          std::size_t q, std::size_t q_prime,
                                          const LearningEnv& env, std::size_t trials,
                                          std::uint64_t seed,
                                          PacPreset preset = PacPreset::classif_unitrate,
                                          std::size_t rad_mc_trials = 200) {
    if (q < 1 || q_prime < 1) throw config_error("coverage_experiment: q, q' >= 1");
    if (agents.empty()) throw config_error("coverage_experiment: no agents");
    for (const auto& d : agents)
        if (d.t_star != agents.front().t_star)
            throw config_error("coverage_experiment: agents must share the target threshold");
    SyntheticAgentDist target{agents.front().t_star, 0.0};

    CoverageResult result;
    result.reports.reserve(trials * agents.size());
    CounterRng rng{seed};
    std::size_t hits = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        auto trial_rng = rng.substream(t);
        auto target_samples = sample(target, q_prime, trial_rng.substream(0));
        std::vector<double> target_xs(q_prime);
        for (std::size_t i = 0; i < q_prime; ++i) target_xs[i] = target_samples[i].x;
        double rad = rademacher_exact(target_xs, trial_rng.bits(1), rad_mc_trials);
        for (std::size_t j = 0; j < agents.size(); ++j) {
            auto own = sample(agents[j], q, trial_rng.substream(2 + j));
            EstimationReport row;
            row.trial = t;
            row.agent = j;
            row.theta_true = true_type(agents[j]);
            row.theta_hat = h_divergence_label_flip(own, target_samples);
            row.bound = eta_bound(q, q_prime, env, agents.size(), preset, rad);
            row.within = std::abs(row.theta_hat - row.theta_true) <= row.bound;
            hits += row.within ? 1 : 0;
            result.reports.push_back(row);
        }
    }
    result.within_fraction =
        static_cast<double>(hits) / static_cast<double>(trials * agents.size());
    return result;
}

}  // namespace colearn
