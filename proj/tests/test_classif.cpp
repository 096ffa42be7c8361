#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "colearn/classif.hpp"
#include "support.hpp"

using namespace colearn;

namespace {

// Analytic risks under the synthetic model: R_0(g_{s,+1}) = |s - t*| for
// s in [0,1], and the flip distribution satisfies R_j = (1-2p) R_0 + p.
double analytic_r0(double s, int sigma, double t_star) {
    double r_plus = std::abs(std::clamp(s, 0.0, 1.0) - t_star);
    return sigma == 1 ? r_plus : 1.0 - r_plus;
}

// Brute-force sup_g |R_j - R_0| over a dense (s, sigma) grid.
double grid_type_oracle(double t_star, double p, std::size_t grid) {
    double best = 0.0;
    for (std::size_t k = 0; k <= grid; ++k) {
        double s = static_cast<double>(k) / grid;
        for (int sigma : {1, -1}) {
            double r0 = analytic_r0(s, sigma, t_star);
            double rj = (1.0 - 2.0 * p) * r0 + p;
            best = std::max(best, std::abs(rj - r0));
        }
    }
    return best;
}

long long naive_errors(const std::vector<LabeledSample>& samples, double s, int sigma) {
    long long e = 0;
    for (const auto& smp : samples) {
        int pred = smp.x >= s ? sigma : -sigma;
        e += pred != smp.y ? 1 : 0;
    }
    return e;
}

std::vector<LabeledSample> random_samples(const CounterRng& rng, std::size_t n,
                                          bool coarse_xs) {
    std::vector<LabeledSample> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double u = rng.uniform(2 * i);
        // coarse grid forces duplicated x-values across and within sets
        double x = coarse_xs ? std::floor(u * 8.0) / 8.0 : u;
        out[i] = {x, rng.uniform(2 * i + 1) < 0.5 ? -1 : 1};
    }
    return out;
}

// Exhaustive Rademacher oracle: loop over every sign vector and every
// (threshold candidate, orientation) pair, no prefix tricks.
double rademacher_naive(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    std::vector<double> cands;
    cands.push_back(xs.front() - 1.0);
    for (std::size_t i = 1; i < n; ++i)
        if (xs[i] > xs[i - 1]) cands.push_back(0.5 * (xs[i - 1] + xs[i]));
    cands.push_back(xs.back() + 1.0);

    double acc = 0.0;
    for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
        double best = -1e300;
        for (double s : cands) {
            for (int sigma : {1, -1}) {
                double sum = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    int sign = (mask >> i) & 1 ? 1 : -1;
                    int g = xs[i] >= s ? sigma : -sigma;
                    sum += sign * g;
                }
                best = std::max(best, sum);
            }
        }
        acc += best;
    }
    return acc / static_cast<double>(1ULL << n) / static_cast<double>(n);
}

}  // namespace

TEST_CASE("sampling matches the synthetic model") {
    SyntheticAgentDist clean{0.4, 0.0};
    auto s = sample(clean, 500, CounterRng{11});
    for (const auto& smp : s) {
        CHECK(smp.x >= 0.0);
        CHECK(smp.x < 1.0);
        CHECK(smp.y == (smp.x >= 0.4 ? 1 : -1));
    }
    CHECK(sample(clean, 0, CounterRng{11}).empty());

    SyntheticAgentDist noisy{0.4, 0.15};
    auto big = sample(noisy, 100000, CounterRng{12});
    std::size_t flips = 0;
    for (const auto& smp : big) flips += smp.y != (smp.x >= 0.4 ? 1 : -1) ? 1 : 0;
    double rate = static_cast<double>(flips) / big.size();
    double sigma = std::sqrt(0.15 * 0.85 / big.size());
    CHECK(std::abs(rate - 0.15) <= 3.0 * sigma);
}

TEST_CASE("sampling rejects invalid distributions") {
    SyntheticAgentDist bad_flip{0.5, 0.5};
    CHECK_THROWS_AS((void)sample(bad_flip, 1, CounterRng{0}), config_error);
    SyntheticAgentDist bad_thresh{1.5, 0.1};
    CHECK_THROWS_AS((void)true_type(bad_thresh), config_error);
}

TEST_CASE("true type equals the flip probability, against the grid oracle") {
    CHECK(true_type({0.3, 0.0}) == 0.0);
    for (double p : {0.1, 0.06}) {
        double oracle = grid_type_oracle(0.3, p, 10000);
        CHECK(std::abs(oracle - p) <= 1e-4);
        CHECK(true_type({0.3, p}) == p);
    }
}

TEST_CASE("erm on separable data reaches zero risk") {
    auto s = sample({0.35, 0.0}, 200, CounterRng{21});
    auto fit = erm_fit(s);
    CHECK(fit.empirical_risk == 0.0);
    for (const auto& smp : s) CHECK(fit.classifier.predict(smp.x) == smp.y);
}

TEST_CASE("erm on a single positive sample") {
    auto fit = erm_fit({{0.7, 1}});
    CHECK(fit.empirical_risk == 0.0);
    CHECK(fit.classifier.sigma == 1);
    CHECK(fit.classifier.s < 0.7);
    CHECK(fit.classifier.predict(0.7) == 1);
    CHECK_THROWS_AS((void)erm_fit({}), config_error);
}

TEST_CASE("erm matches the naive quadratic scan") {
    CounterRng rng{31};
    for (std::uint64_t k = 0; k < 20; ++k) {
        auto s = random_samples(rng.substream(k), 100, k % 2 == 0);
        auto fit = erm_fit(s);
        // oracle: evaluate every candidate threshold directly
        std::vector<double> xs(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) xs[i] = s[i].x;
        std::sort(xs.begin(), xs.end());
        long long best = static_cast<long long>(s.size()) + 1;
        std::vector<double> cands{xs.front() - 1.0, xs.back() + 1.0};
        for (std::size_t i = 1; i < xs.size(); ++i)
            if (xs[i] > xs[i - 1]) cands.push_back(0.5 * (xs[i - 1] + xs[i]));
        for (double cand : cands)
            for (int sigma : {1, -1}) best = std::min(best, naive_errors(s, cand, sigma));
        CHECK(fit.empirical_risk == static_cast<double>(best) / s.size());
        CHECK(naive_errors(s, fit.classifier.s, fit.classifier.sigma) == best);
    }
}

TEST_CASE("orientation flip complements the empirical risk exactly") {
    CounterRng rng{41};
    auto s = random_samples(rng, 257, true);
    for (double cand : {-0.5, 0.1, 0.37, 0.5, 0.99, 1.5}) {
        long long e = naive_errors(s, cand, 1);
        CHECK(naive_errors(s, cand, -1) == static_cast<long long>(s.size()) - e);
    }
}

TEST_CASE("h-divergence basics") {
    auto s = random_samples(CounterRng{51}, 64, false);
    CHECK(h_divergence_sup_scan(s, s) == 0.0);
    CHECK(h_divergence_label_flip(s, s) == 0.0);

    // a separable base set admits a zero-risk classifier, so flipping every
    // label pushes the divergence to its maximum
    auto separable = sample({0.6, 0.0}, 64, CounterRng{52});
    auto flipped = separable;
    for (auto& smp : flipped) smp.y = -smp.y;
    CHECK(h_divergence_sup_scan(flipped, separable) == 1.0);
    CHECK(h_divergence_label_flip(flipped, separable) == 1.0);

    CHECK_THROWS_AS((void)h_divergence_sup_scan({}, s), config_error);
    CHECK_THROWS_AS((void)h_divergence_label_flip(s, {}), config_error);
}

TEST_CASE("sup scan matches a dense grid oracle") {
    CounterRng rng{61};
    for (std::uint64_t k = 0; k < 5; ++k) {
        auto sj = random_samples(rng.substream(2 * k), 50, false);
        auto s0set = random_samples(rng.substream(2 * k + 1), 50, false);
        double fast = h_divergence_sup_scan(sj, s0set);
        double oracle = 0.0;
        for (std::size_t g = 0; g <= 10000; ++g) {
            double s = static_cast<double>(g) / 10000.0 * 1.002 - 0.001;
            double gap = std::abs(static_cast<double>(naive_errors(sj, s, 1)) / sj.size() -
                                  static_cast<double>(naive_errors(s0set, s, 1)) / s0set.size());
            oracle = std::max(oracle, gap);
        }
        CHECK(fast == doctest::Approx(oracle).epsilon(1e-12));
    }
}

TEST_CASE("label-flip and sup-scan estimators agree exactly") {
    CounterRng rng{71};
    for (std::uint64_t k = 0; k < 1000; ++k) {
        auto r = rng.substream(k);
        std::size_t nj = 1 + r.bits(1000) % 40;
        std::size_t n0 = 1 + r.bits(1001) % 40;
        bool coarse = k % 3 != 0;  // most cases exercise duplicated x-values
        auto sj = random_samples(r.substream(1), nj, coarse);
        auto s0set = random_samples(r.substream(2), n0, coarse);
        CHECK(h_divergence_label_flip(sj, s0set) == h_divergence_sup_scan(sj, s0set));
    }
}

TEST_CASE("type recovery from large samples") {
    auto env = testsupport::s0();
    (void)env;
    CounterRng rng{81};
    for (double p : {0.0, 0.06, 0.2}) {
        std::vector<double> errs;
        for (std::uint64_t rep = 0; rep < 3; ++rep) {
            auto r = rng.substream(static_cast<std::uint64_t>(p * 1000) * 10 + rep);
            auto own = sample({0.45, p}, 10000, r.substream(1));
            auto target = sample({0.45, 0.0}, 10000, r.substream(2));
            errs.push_back(std::abs(h_divergence_label_flip(own, target) - p));
        }
        std::sort(errs.begin(), errs.end());
        CHECK(errs[errs.size() / 2] < 0.02);
    }
}

TEST_CASE("rademacher: single point") {
    CHECK(rademacher_exact({0.3}) == 1.0);
}

TEST_CASE("rademacher: two distinct points are shattered") {
    // oriented thresholds realize all four sign patterns on two points, so
    // the supremum is maximal for every sign vector
    CHECK(rademacher_naive({0.2, 0.8}) == 1.0);
    CHECK(rademacher_exact({0.2, 0.8}) == 1.0);
}

TEST_CASE("rademacher matches the naive oracle up to n = 12") {
    CounterRng rng{91};
    for (std::size_t n : {3, 5, 8, 12}) {
        std::vector<double> xs(n);
        for (std::size_t i = 0; i < n; ++i) xs[i] = rng.uniform(100 * n + i);
        CHECK(rademacher_exact(xs) == doctest::Approx(rademacher_naive(xs)).epsilon(1e-12));
    }
    // duplicated points reduce the effective split set
    std::vector<double> dup{0.25, 0.25, 0.5, 0.75, 0.75, 0.75};
    CHECK(rademacher_exact(dup) == doctest::Approx(rademacher_naive(dup)).epsilon(1e-12));
}

TEST_CASE("rademacher monte carlo agrees with enumeration at n = 20") {
    CounterRng rng{101};
    std::vector<double> xs(20);
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = rng.uniform(i);
    double exact = rademacher_exact(xs);
    // force the MC path by padding with a duplicate (same split structure
    // cannot be used, so compare the same 20 points through the MC branch)
    double mc = 0.0;
    {
        // call the MC estimator directly through a 21-point set whose extra
        // point duplicates an existing one, keeping the class behavior
        auto padded = xs;
        padded.push_back(xs[0]);
        mc = rademacher_exact(padded, 7, 100000);
        // padded exact value for comparison
        double mc_sigma = 3.0 * 0.5 / std::sqrt(100000.0);
        // the duplicate changes the value slightly; recompute exact via the
        // naive formula on the padded set is infeasible (2^21), so instead
        // check MC against enumeration on the original 20 points with the
        // duplicate's contribution bounded by 2/n
        CHECK(std::abs(mc - exact) <= mc_sigma + 2.0 / 20.0);
    }
    CHECK(exact > 0.0);
    CHECK(exact < 1.0);
}

TEST_CASE("eta bound evaluates the closed forms") {
    auto env = testsupport::s0();
    double eta = eta_bound(9, 99, env, 4, PacPreset::classif_unitrate, 0.0);
    CHECK(eta == doctest::Approx(std::sqrt(std::log(320.0)) * 0.11).epsilon(1e-12));
    CHECK(eta == doctest::Approx(0.26419).epsilon(1e-3));

    double with_rad = eta_bound(9, 99, env, 4, PacPreset::classif_unitrate, 0.05);
    CHECK(with_rad == doctest::Approx(eta + 0.1).epsilon(1e-12));

    double half = eta_bound(9, 99, env, 4, PacPreset::classif_halfrate, 0.0);
    CHECK(half == doctest::Approx(std::sqrt(std::log(320.0) / 2.0) *
                                  (std::pow(10.0, -0.5) + std::pow(100.0, -0.5)))
                      .epsilon(1e-12));

    double direct = eta_bound(9, 99, env, 4, PacPreset::env_direct, 0.0);
    CHECK(direct == doctest::Approx(env.alpha_delta * 0.11 + 2.0 * env.beta).epsilon(1e-12));

    // strictly decreasing in q, vanishing limit
    double prev = eta_bound(1, 99, env, 4);
    for (std::size_t q : {2, 5, 20, 100}) {
        double cur = eta_bound(q, 99, env, 4);
        CHECK(cur < prev);
        prev = cur;
    }
    CHECK(eta_bound(100000000, 100000000, env, 4) < 1e-3);
}

TEST_CASE("coverage experiment stays within the bound") {
    auto env = testsupport::s0();
    std::vector<SyntheticAgentDist> agents{
        {0.45, 0.0}, {0.45, 0.02}, {0.45, 0.04}, {0.45, 0.06}};
    auto res = coverage_experiment(agents, 50, 200, env, 200, 20260824);
    CHECK(res.reports.size() == 800);
    CHECK(res.within_fraction >= 0.95);
}

TEST_CASE("coverage with clean agents and a wide q = 1 bound") {
    auto env = testsupport::s0();
    std::vector<SyntheticAgentDist> clean{{0.5, 0.0}, {0.5, 0.0}};
    auto res = coverage_experiment(clean, 200, 200, env, 50, 5);
    CHECK(res.within_fraction == 1.0);

    std::vector<SyntheticAgentDist> agents{{0.5, 0.0}, {0.5, 0.06}};
    auto wide = coverage_experiment(agents, 1, 200, env, 50, 6);
    CHECK(wide.within_fraction == 1.0);  // bound exceeds the whole type range

    CHECK_THROWS_AS(
        (void)coverage_experiment(agents, 0, 10, env, 1, 0), config_error);
    std::vector<SyntheticAgentDist> mismatched{{0.4, 0.0}, {0.6, 0.0}};
    CHECK_THROWS_AS(
        (void)coverage_experiment(mismatched, 10, 10, env, 1, 0), config_error);
}
