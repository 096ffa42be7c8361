#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "colearn/classif.hpp"
#include "colearn/csv.hpp"
#include "colearn/econ.hpp"
#include "colearn/errors.hpp"
#include "colearn/game.hpp"
#include "colearn/mechanism.hpp"
#include "colearn/scheme.hpp"

namespace colearn {

enum class ExperimentKind { scheme, game, vcg, verify, estimate, sweep };

inline const char* to_string(ExperimentKind e) {
    switch (e) {
        case ExperimentKind::scheme: return "scheme";
        case ExperimentKind::game: return "game";
        case ExperimentKind::vcg: return "vcg";
        case ExperimentKind::verify: return "verify";
        case ExperimentKind::estimate: return "estimate";
        case ExperimentKind::sweep: return "sweep";
    }
    return "?";
}

struct McConfig {
    std::size_t trials = 1000;
    std::optional<std::uint64_t> seed;
    NoiseModel noise_model = NoiseModel::uniform_within_eta;
    std::optional<double> eta;
    std::optional<double> floor;
};

struct ClassifConfig {
    double t_star = 0.5;
    std::vector<double> flip_probs;
    std::size_t q = 50;
    std::size_t q_prime = 200;
    PacPreset preset = PacPreset::classif_unitrate;
};

struct SweepConfig {
    std::string variable;  // j_count | welfare_gap | eta | q
    std::vector<double> values;
};

struct Scenario {
    ExperimentKind experiment = ExperimentKind::scheme;
    LearningEnv env;
    AgentPool pool;
    bool has_pool = false;
    SchemeMode mode = SchemeMode::binding_fixed_point;
    std::size_t declared_points = 5;
    double grid_step = 0.25;
    McConfig mc;
    std::optional<ClassifConfig> classif;
    std::optional<SweepConfig> sweep;
    nlohmann::json resolved;  // scenario with defaults applied, echoed in outputs
};

namespace detail {

inline void check_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                       const std::string& ctx, std::vector<std::string>& errs) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* a : allowed)
            if (it.key() == a) known = true;
        if (!known) errs.push_back("unknown field '" + ctx + "." + it.key() + "'");
    }
}

inline bool want_number(const nlohmann::json& obj, const char* key, const std::string& ctx,
                        std::vector<std::string>& errs, double& out) {
    if (!obj.contains(key)) return false;
    if (!obj[key].is_number()) {
        errs.push_back("field '" + ctx + "." + key + "' must be a number");
        return false;
    }
    out = obj[key].get<double>();
    return true;
}

inline bool want_uint(const nlohmann::json& obj, const char* key, const std::string& ctx,
                      std::vector<std::string>& errs, std::uint64_t& out) {
    if (!obj.contains(key)) return false;
    if (!obj[key].is_number_integer() ||
        (obj[key].is_number_integer() && !obj[key].is_number_unsigned() &&
         obj[key].get<std::int64_t>() < 0)) {
        errs.push_back("field '" + ctx + "." + key + "' must be a nonnegative integer");
        return false;
    }
    out = obj[key].get<std::uint64_t>();
    return true;
}

inline bool want_string(const nlohmann::json& obj, const char* key, const std::string& ctx,
                        std::vector<std::string>& errs, std::string& out) {
    if (!obj.contains(key)) return false;
    if (!obj[key].is_string()) {
        errs.push_back("field '" + ctx + "." + key + "' must be a string");
        return false;
    }
    out = obj[key].get<std::string>();
    return true;
}

inline bool want_number_list(const nlohmann::json& obj, const char* key, const std::string& ctx,
                             std::vector<std::string>& errs, std::vector<double>& out) {
    if (!obj.contains(key)) return false;
    if (!obj[key].is_array()) {
        errs.push_back("field '" + ctx + "." + key + "' must be an array of numbers");
        return false;
    }
    out.clear();
    for (const auto& v : obj[key]) {
        if (!v.is_number()) {
            errs.push_back("field '" + ctx + "." + key + "' must contain only numbers");
            return false;
        }
        out.push_back(v.get<double>());
    }
    return true;
}

}  // namespace detail

inline Scenario parse_scenario(const nlohmann::json& doc) {
    std::vector<std::string> errs;
    Scenario sc;

    if (!doc.is_object()) throw config_error("scenario: top level must be an object");
    detail::check_keys(doc, {"experiment", "env", "pool", "mode", "grids", "mc", "classif",
                             "sweep"},
                       "scenario", errs);

    std::string exp;
    if (!detail::want_string(doc, "experiment", "scenario", errs, exp))
        errs.push_back("field 'scenario.experiment' is required");
    if (exp == "scheme") sc.experiment = ExperimentKind::scheme;
    else if (exp == "game") sc.experiment = ExperimentKind::game;
    else if (exp == "vcg") sc.experiment = ExperimentKind::vcg;
    else if (exp == "verify") sc.experiment = ExperimentKind::verify;
    else if (exp == "estimate") sc.experiment = ExperimentKind::estimate;
    else if (exp == "sweep") sc.experiment = ExperimentKind::sweep;
    else if (!exp.empty())
        errs.push_back("field 'scenario.experiment' must be one of "
                       "scheme|game|vcg|verify|estimate|sweep");

    if (doc.contains("env")) {
        const auto& env = doc["env"];
        if (!env.is_object()) {
            errs.push_back("field 'scenario.env' must be an object");
        } else {
            detail::check_keys(env,
                               {"alpha_delta", "beta", "gamma", "delta", "a", "c", "r_star",
                                "theta_min", "theta_max"},
                               "env", errs);
            detail::want_number(env, "alpha_delta", "env", errs, sc.env.alpha_delta);
            detail::want_number(env, "beta", "env", errs, sc.env.beta);
            detail::want_number(env, "gamma", "env", errs, sc.env.gamma);
            detail::want_number(env, "delta", "env", errs, sc.env.delta);
            detail::want_number(env, "a", "env", errs, sc.env.a);
            detail::want_number(env, "c", "env", errs, sc.env.c);
            detail::want_number(env, "r_star", "env", errs, sc.env.r_star);
            detail::want_number(env, "theta_min", "env", errs, sc.env.theta_min);
            detail::want_number(env, "theta_max", "env", errs, sc.env.theta_max);
        }
    }

    if (doc.contains("pool")) {
        const auto& pool = doc["pool"];
        if (!pool.is_object()) {
            errs.push_back("field 'scenario.pool' must be an object");
        } else {
            detail::check_keys(pool, {"thetas", "count", "spacing"}, "pool", errs);
            std::vector<double> thetas;
            bool has_thetas = detail::want_number_list(pool, "thetas", "pool", errs, thetas);
            std::uint64_t count = 0;
            bool has_count = detail::want_uint(pool, "count", "pool", errs, count);
            if (has_thetas && has_count)
                errs.push_back("pool: give either 'thetas' or a generator, not both");
            if (has_thetas) {
                sc.pool.thetas = std::move(thetas);
                sc.has_pool = true;
            } else if (has_count) {
                std::string spacing = "even";
                detail::want_string(pool, "spacing", "pool", errs, spacing);
                if (spacing != "even")
                    errs.push_back("pool.spacing: only 'even' is supported");
                if (count < 1) {
                    errs.push_back("pool.count must be at least 1");
                } else {
                    sc.pool.thetas.resize(count);
                    for (std::uint64_t j = 0; j < count; ++j)
                        sc.pool.thetas[j] =
                            count == 1 ? sc.env.theta_min
                                       : sc.env.theta_min +
                                             (sc.env.theta_max - sc.env.theta_min) *
                                                 static_cast<double>(j) /
                                                 static_cast<double>(count - 1);
                    sc.has_pool = true;
                }
            } else {
                errs.push_back("pool: needs 'thetas' or 'count'");
            }
        }
    }

    std::string mode;
    if (detail::want_string(doc, "mode", "scenario", errs, mode)) {
        if (mode == "closed_form") sc.mode = SchemeMode::closed_form;
        else if (mode == "binding_fixed_point") sc.mode = SchemeMode::binding_fixed_point;
        else if (mode == "brute_force") sc.mode = SchemeMode::brute_force;
        else errs.push_back("field 'scenario.mode' must be "
                            "closed_form|binding_fixed_point|brute_force");
    }

    if (doc.contains("grids")) {
        const auto& grids = doc["grids"];
        if (!grids.is_object()) {
            errs.push_back("field 'scenario.grids' must be an object");
        } else {
            detail::check_keys(grids, {"declared_points", "grid_step"}, "grids", errs);
            std::uint64_t pts = 0;
            if (detail::want_uint(grids, "declared_points", "grids", errs, pts)) {
                if (pts < 1) errs.push_back("grids.declared_points must be at least 1");
                else sc.declared_points = pts;
            }
            double step = 0.0;
            if (detail::want_number(grids, "grid_step", "grids", errs, step)) {
                if (!(step > 0.0)) errs.push_back("grids.grid_step must be positive");
                else sc.grid_step = step;
            }
        }
    }

    if (doc.contains("mc")) {
        const auto& mc = doc["mc"];
        if (!mc.is_object()) {
            errs.push_back("field 'scenario.mc' must be an object");
        } else {
            detail::check_keys(mc, {"trials", "seed", "noise_model", "eta", "floor"}, "mc",
                               errs);
            std::uint64_t trials = 0;
            if (detail::want_uint(mc, "trials", "mc", errs, trials)) {
                if (trials < 1) errs.push_back("mc.trials must be at least 1");
                else sc.mc.trials = trials;
            }
            std::uint64_t seed = 0;
            if (detail::want_uint(mc, "seed", "mc", errs, seed)) sc.mc.seed = seed;
            std::string noise;
            if (detail::want_string(mc, "noise_model", "mc", errs, noise)) {
                if (noise == "uniform_within_eta")
                    sc.mc.noise_model = NoiseModel::uniform_within_eta;
                else if (noise == "corners_within_eta")
                    sc.mc.noise_model = NoiseModel::corners_within_eta;
                else
                    errs.push_back("mc.noise_model must be "
                                   "uniform_within_eta|corners_within_eta");
            }
            double eta = 0.0;
            if (detail::want_number(mc, "eta", "mc", errs, eta)) {
                if (!(eta >= 0.0)) errs.push_back("mc.eta must be nonnegative");
                else sc.mc.eta = eta;
            }
            double floor = 0.0;
            if (detail::want_number(mc, "floor", "mc", errs, floor)) {
                if (!(floor > 0.0)) errs.push_back("mc.floor must be positive");
                else sc.mc.floor = floor;
            }
        }
    }

    if (doc.contains("classif")) {
        const auto& cl = doc["classif"];
        if (!cl.is_object()) {
            errs.push_back("field 'scenario.classif' must be an object");
        } else {
            detail::check_keys(cl, {"t_star", "flip_probs", "q", "q_prime", "preset"},
                               "classif", errs);
            ClassifConfig cfg;
            detail::want_number(cl, "t_star", "classif", errs, cfg.t_star);
            detail::want_number_list(cl, "flip_probs", "classif", errs, cfg.flip_probs);
            std::uint64_t q = 0;
            if (detail::want_uint(cl, "q", "classif", errs, q)) {
                if (q < 1) errs.push_back("classif.q must be at least 1");
                else cfg.q = q;
            }
            std::uint64_t qp = 0;
            if (detail::want_uint(cl, "q_prime", "classif", errs, qp)) {
                if (qp < 1) errs.push_back("classif.q_prime must be at least 1");
                else cfg.q_prime = qp;
            }
            std::string preset;
            if (detail::want_string(cl, "preset", "classif", errs, preset)) {
                if (preset == "classif_unitrate") cfg.preset = PacPreset::classif_unitrate;
                else if (preset == "classif_halfrate") cfg.preset = PacPreset::classif_halfrate;
                else if (preset == "env_direct") cfg.preset = PacPreset::env_direct;
                else errs.push_back("classif.preset must be "
                                    "classif_unitrate|classif_halfrate|env_direct");
            }
            if (!(cfg.t_star >= 0.0 && cfg.t_star <= 1.0))
                errs.push_back("classif.t_star must lie in [0,1]");
            for (double p : cfg.flip_probs)
                if (!(p >= 0.0 && p < 0.5)) {
                    errs.push_back("classif.flip_probs entries must lie in [0, 1/2)");
                    break;
                }
            sc.classif = std::move(cfg);
        }
    }

    if (doc.contains("sweep")) {
        const auto& sw = doc["sweep"];
        if (!sw.is_object()) {
            errs.push_back("field 'scenario.sweep' must be an object");
        } else {
            detail::check_keys(sw, {"variable", "values"}, "sweep", errs);
            SweepConfig cfg;
            detail::want_string(sw, "variable", "sweep", errs, cfg.variable);
            detail::want_number_list(sw, "values", "sweep", errs, cfg.values);
            if (cfg.variable != "j_count" && cfg.variable != "welfare_gap" &&
                cfg.variable != "eta" && cfg.variable != "q")
                errs.push_back("sweep.variable must be j_count|welfare_gap|eta|q");
            if (cfg.values.empty()) errs.push_back("sweep.values must be nonempty");
            sc.sweep = std::move(cfg);
        }
    }

    // cross-field requirements
    try {
        sc.env.validate();
    } catch (const config_error& e) {
        errs.push_back(e.what());
    }
    bool needs_pool = sc.experiment == ExperimentKind::scheme ||
                      sc.experiment == ExperimentKind::game ||
                      sc.experiment == ExperimentKind::vcg ||
                      sc.experiment == ExperimentKind::verify ||
                      (sc.experiment == ExperimentKind::sweep && sc.sweep &&
                       (sc.sweep->variable == "eta"));
    if (needs_pool && !sc.has_pool) errs.push_back("pool: required for this experiment");
    if (sc.has_pool) {
        try {
            sc.pool.validate(sc.env);
        } catch (const config_error& e) {
            errs.push_back(e.what());
        }
    }
    bool stochastic = sc.experiment == ExperimentKind::verify ||
                      sc.experiment == ExperimentKind::estimate ||
                      (sc.experiment == ExperimentKind::sweep && sc.sweep &&
                       (sc.sweep->variable == "eta" || sc.sweep->variable == "q"));
    if (stochastic && !sc.mc.seed)
        errs.push_back("mc.seed: required for stochastic experiments");
    if (sc.experiment == ExperimentKind::verify && !sc.mc.eta && !sc.classif)
        errs.push_back("verify: needs mc.eta or a classif block to derive the bound");
    if ((sc.experiment == ExperimentKind::estimate ||
         (sc.experiment == ExperimentKind::sweep && sc.sweep && sc.sweep->variable == "q")) &&
        (!sc.classif || sc.classif->flip_probs.empty()))
        errs.push_back("estimate: needs classif.flip_probs");
    if (sc.experiment == ExperimentKind::sweep && !sc.sweep)
        errs.push_back("sweep: needs a sweep block");
    if (sc.experiment != ExperimentKind::sweep && sc.sweep)
        errs.push_back("sweep block given for a non-sweep experiment");

    if (!errs.empty()) {
        std::string msg = "scenario validation failed:";
        for (const auto& e : errs) msg += "\n  - " + e;
        throw config_error(msg);
    }

    // feasibility checks that carry their own error class
    if (sc.experiment == ExperimentKind::verify ||
        (sc.experiment == ExperimentKind::sweep && sc.sweep->variable == "eta"))
        (void)q_floor(sc.env);

    // echo with defaults applied
    nlohmann::json echo;
    echo["experiment"] = to_string(sc.experiment);
    echo["env"] = {{"alpha_delta", sc.env.alpha_delta}, {"beta", sc.env.beta},
                   {"gamma", sc.env.gamma},             {"delta", sc.env.delta},
                   {"a", sc.env.a},                     {"c", sc.env.c},
                   {"r_star", sc.env.r_star},           {"theta_min", sc.env.theta_min},
                   {"theta_max", sc.env.theta_max}};
    if (sc.has_pool) echo["pool"] = {{"thetas", sc.pool.thetas}};
    echo["mode"] = to_string(sc.mode);
    echo["grids"] = {{"declared_points", sc.declared_points}, {"grid_step", sc.grid_step}};
    echo["mc"] = {{"trials", sc.mc.trials},
                  {"noise_model", to_string(sc.mc.noise_model)}};
    if (sc.mc.seed) echo["mc"]["seed"] = *sc.mc.seed;
    if (sc.mc.eta) echo["mc"]["eta"] = *sc.mc.eta;
    if (sc.mc.floor) echo["mc"]["floor"] = *sc.mc.floor;
    if (sc.classif)
        echo["classif"] = {{"t_star", sc.classif->t_star},
                           {"flip_probs", sc.classif->flip_probs},
                           {"q", sc.classif->q},
                           {"q_prime", sc.classif->q_prime},
                           {"preset", to_string(sc.classif->preset)}};
    if (sc.sweep)
        echo["sweep"] = {{"variable", sc.sweep->variable}, {"values", sc.sweep->values}};
    sc.resolved = std::move(echo);
    return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot read scenario file: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error(std::string("scenario parse error: ") + e.what());
    }
    return parse_scenario(doc);
}

struct RunResult {
    std::map<std::string, std::string> files;  // filename -> contents
    nlohmann::json summary;
};

namespace detail {

template <typename Fn>
inline void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> threads;
    std::size_t used = std::min(workers, n);
    threads.reserve(used);
    for (std::size_t w = 0; w < used; ++w)
        threads.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += used) fn(i);
        });
    for (auto& t : threads) t.join();
}

inline std::string join_semi(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ';';
        out += format_sig(v[i]);
    }
    return out;
}

inline double resolve_eta(const Scenario& sc) {
    if (sc.mc.eta) return *sc.mc.eta;
    std::size_t j_count = sc.has_pool ? sc.pool.size() : sc.classif->flip_probs.size();
    return eta_bound(sc.classif->q, sc.classif->q_prime, sc.env, j_count,
                     sc.classif->preset, 0.0);
}

inline void run_scheme(const Scenario& sc, RunResult& out) {
    auto sol = solve_scheme(sc.pool.thetas, sc.mode, sc.env);
    CsvBuilder csv;
    csv.row({"agent", "theta", "member", "n", "nbar", "utility", "outside_utility", "slack"});
    for (std::size_t j = 0; j < sc.pool.size(); ++j) {
        double u = agent_utility(j, sol.scheme, sc.pool, sc.env);
        double o = outside_utility(sc.pool.thetas[j], sc.env);
        double nbar = sol.scheme.has_coalition()
                          ? max_contribution(j, sol.scheme, sc.pool, sc.env)
                          : 0.0;
        csv.row({std::to_string(j), format_sig(sc.pool.thetas[j]),
                 std::to_string(static_cast<int>(sol.scheme.b[j])),
                 format_sig(sol.scheme.n[j]), format_sig(nbar), format_sig(u), format_sig(o),
                 format_sig(u - o)});
    }
    out.files["scheme.csv"] = std::move(csv.body);
    out.summary["derived"]["big_n"] = sol.scheme.big_n;
    out.summary["derived"]["big_n_target"] =
        target_total_samples(sc.pool.size(), sc.env);
    out.summary["derived"]["vartheta"] = sol.scheme.vartheta;
    out.summary["derived"]["l_star"] = sol.l_star;
    out.summary["derived"]["consistent"] = sol.consistent;
    out.summary["derived"]["residual"] = sol.residual;
}

inline void run_game(const Scenario& sc, RunResult& out) {
    auto grid = declared_type_grid(sc.env, sc.declared_points);
    auto nash = enumerate_pure_nash(grid, sc.pool, sc.env, sc.mode);

    CsvBuilder eq;
    eq.row({"equilibrium", "coalition_shape", "members", "declared", "payoffs", "max_gain"});
    std::map<std::string, int> shapes{{"empty", 0}, {"worst_only", 0}, {"other", 0}};
    for (std::size_t i = 0; i < nash.size(); ++i) {
        const auto& rep = nash[i];
        std::string members, declared;
        std::vector<double> decl_vals;
        for (std::size_t j = 0; j < rep.profile.size(); ++j) {
            if (!rep.profile[j].in) continue;
            if (!members.empty()) members += ';';
            members += std::to_string(j);
            decl_vals.push_back(rep.profile[j].declared);
        }
        shapes[to_string(rep.coalition_shape)] += 1;
        eq.row({std::to_string(i), to_string(rep.coalition_shape), members,
                join_semi(decl_vals), join_semi(rep.payoffs), format_sig(rep.max_gain)});
    }
    out.files["equilibria.csv"] = std::move(eq.body);

    // best-response dynamics from the fully-truthful all-in start
    ActionProfile start(sc.pool.size());
    for (std::size_t j = 0; j < sc.pool.size(); ++j)
        start[j] = Action::join(sc.pool.thetas[j]);
    auto [final_profile, converged, trace] =
        best_response_dynamics(start, grid, sc.pool, sc.env, sc.mode);
    (void)final_profile;
    CsvBuilder dyn;
    dyn.row({"step", "round", "agent", "in", "declared", "coalition_size"});
    CsvBuilder spiral;
    spiral.row({"step", "coalition_size"});
    for (std::size_t s = 0; s < trace.size(); ++s) {
        const auto& row = trace[s];
        dyn.row({std::to_string(s), std::to_string(row.round), std::to_string(row.agent),
                 std::to_string(static_cast<int>(row.chosen.in)),
                 row.chosen.in ? format_sig(row.chosen.declared) : "",
                 std::to_string(row.coalition_size)});
        spiral.row({std::to_string(s), std::to_string(row.coalition_size)});
    }
    out.files["dynamics.csv"] = std::move(dyn.body);
    out.files["plot_death_spiral.csv"] = std::move(spiral.body);

    out.summary["derived"]["nash_count"] = nash.size();
    out.summary["derived"]["shapes"] = shapes;
    out.summary["derived"]["dynamics_converged"] = converged;
}

inline void run_vcg(const Scenario& sc, RunResult& out) {
    auto tv = vcg_transfers(sc.pool.thetas, sc.pool, sc.env, sc.mode);
    auto sol = solve_scheme(sc.pool.thetas, sc.mode, sc.env);
    auto witness = check_positive_transfer(tv);
    CsvBuilder csv;
    csv.row({"agent", "theta", "n", "transfer", "needs_positive_transfer"});
    for (std::size_t j = 0; j < sc.pool.size(); ++j)
        csv.row({std::to_string(j), format_sig(sc.pool.thetas[j]),
                 format_sig(sol.scheme.n[j]), format_sig(tv.t[j]),
                 tv.t[j] < 0.0 ? "1" : "0"});
    out.files["transfers.csv"] = std::move(csv.body);
    out.summary["derived"]["positive_transfer_witness"] =
        witness ? nlohmann::json(*witness) : nlohmann::json();
}

inline void run_verify(const Scenario& sc, std::uint64_t seed, std::size_t workers,
                       RunResult& out, double eta_override = -1.0,
                       CsvBuilder* rows_sink = nullptr) {
    double eta = eta_override >= 0.0 ? eta_override : resolve_eta(sc);
    double qf = q_floor(sc.env);
    std::optional<double> floor = sc.mc.floor;

    const std::size_t trials = sc.mc.trials;
    std::vector<std::vector<double>> estimates(trials);
    std::vector<NashCheckResult> checks(trials);
    CounterRng rng{seed};
    parallel_for(trials, workers, [&](std::size_t t) {
        estimates[t] = draw_estimates(sc.pool, sc.mc.noise_model, eta, rng.substream(t));
        checks[t] = grand_coalition_nash_check(sc.pool, sc.env, estimates[t], eta, floor);
    });

    std::size_t hits = 0;
    CsvBuilder csv;
    {
        std::vector<std::string> header{"trial"};
        for (std::size_t j = 0; j < sc.pool.size(); ++j)
            header.push_back("estimate_" + std::to_string(j));
        header.insert(header.end(), {"is_nash", "witness_agent", "worst_margin"});
        csv.row(header);
    }
    for (std::size_t t = 0; t < trials; ++t) {
        hits += checks[t].is_nash ? 1 : 0;
        std::vector<std::string> cells{std::to_string(t)};
        for (double e : estimates[t]) cells.push_back(format_sig(e));
        cells.push_back(checks[t].is_nash ? "1" : "0");
        cells.push_back(checks[t].witness_agent ? std::to_string(*checks[t].witness_agent)
                                                : "");
        cells.push_back(format_sig(checks[t].worst_margin));
        csv.row(cells);
    }
    if (rows_sink)
        rows_sink->body += csv.body;
    else
        out.files["trials.csv"] = std::move(csv.body);

    double fraction = static_cast<double>(hits) / static_cast<double>(trials);
    auto [lo, hi] = wilson_interval(hits, trials);
    out.summary["derived"]["q_floor"] = qf;
    out.summary["derived"]["eta"] = eta;
    out.summary["derived"]["nash_fraction"] = fraction;
    out.summary["derived"]["wilson_low"] = lo;
    out.summary["derived"]["wilson_high"] = hi;
    out.summary["derived"]["trials"] = trials;
}

inline void run_estimate(const Scenario& sc, std::uint64_t seed, RunResult& out) {
    const auto& cfg = *sc.classif;
    std::vector<SyntheticAgentDist> agents;
    agents.reserve(cfg.flip_probs.size());
    for (double p : cfg.flip_probs) agents.push_back({cfg.t_star, p});
    auto res = coverage_experiment(agents, cfg.q, cfg.q_prime, sc.env, sc.mc.trials, seed,
                                   cfg.preset);
    CsvBuilder csv;
    csv.row({"trial", "agent", "theta_true", "theta_hat", "bound", "within"});
    for (const auto& row : res.reports)
        csv.row({std::to_string(row.trial), std::to_string(row.agent),
                 format_sig(row.theta_true), format_sig(row.theta_hat),
                 format_sig(row.bound), row.within ? "1" : "0"});
    out.files["estimation.csv"] = std::move(csv.body);
    out.summary["derived"]["within_fraction"] = res.within_fraction;
    out.summary["derived"]["trials"] = sc.mc.trials;
    out.summary["derived"]["q"] = cfg.q;
    out.summary["derived"]["q_prime"] = cfg.q_prime;
    out.summary["derived"]["preset"] = to_string(cfg.preset);
}

inline void run_sweep(const Scenario& sc, std::uint64_t seed, std::size_t workers,
                      RunResult& out) {
    const auto& sw = *sc.sweep;
    CsvBuilder csv;
    if (sw.variable == "j_count") {
        csv.row({"j_count", "l_star", "ratio"});
        for (double v : sw.values) {
            std::size_t j_count = static_cast<std::size_t>(v);
            if (j_count < 1 || static_cast<double>(j_count) != v)
                throw config_error("sweep over j_count needs positive integer values");
            std::vector<double> thetas(j_count);
            for (std::size_t j = 0; j < j_count; ++j)
                thetas[j] = j_count == 1
                                ? sc.env.theta_min
                                : sc.env.theta_min +
                                      (sc.env.theta_max - sc.env.theta_min) *
                                          static_cast<double>(j) /
                                          static_cast<double>(j_count - 1);
            auto sol = solve_scheme(thetas, sc.mode, sc.env);
            double ratio = sol.l_star / std::pow(static_cast<double>(j_count),
                                                 1.0 / (1.0 + sc.env.gamma));
            csv.row({std::to_string(j_count), std::to_string(sol.l_star),
                     format_sig(ratio)});
        }
    } else if (sw.variable == "welfare_gap") {
        csv.row({"j_count", "welfare_gap"});
        for (double v : sw.values) {
            std::size_t j_count = static_cast<std::size_t>(v);
            if (j_count < 1 || static_cast<double>(j_count) != v)
                throw config_error("sweep over welfare_gap needs positive integer values");
            std::vector<double> thetas(j_count);
            for (std::size_t j = 0; j < j_count; ++j)
                thetas[j] = j_count == 1
                                ? sc.env.theta_min
                                : sc.env.theta_min +
                                      (sc.env.theta_max - sc.env.theta_min) *
                                          static_cast<double>(j) /
                                          static_cast<double>(j_count - 1);
            AgentPool pool{thetas};
            double gap = welfare_gap(pool, sc.env, sc.grid_step);
            csv.row({std::to_string(j_count), format_sig(gap)});
        }
    } else if (sw.variable == "eta") {
        csv.row({"eta", "nash_fraction", "wilson_low", "wilson_high"});
        for (std::size_t k = 0; k < sw.values.size(); ++k) {
            RunResult child;
            run_verify(sc, CounterRng::mix(seed ^ k), workers, child, sw.values[k]);
            csv.row({format_sig(sw.values[k]),
                     format_sig(child.summary["derived"]["nash_fraction"].get<double>()),
                     format_sig(child.summary["derived"]["wilson_low"].get<double>()),
                     format_sig(child.summary["derived"]["wilson_high"].get<double>())});
        }
    } else {  // q
        csv.row({"q", "within_fraction", "bound"});
        for (std::size_t k = 0; k < sw.values.size(); ++k) {
            double v = sw.values[k];
            std::size_t q = static_cast<std::size_t>(v);
            if (q < 1 || static_cast<double>(q) != v)
                throw config_error("sweep over q needs positive integer values");
            Scenario child_sc = sc;
            child_sc.classif->q = q;
            RunResult child;
            run_estimate(child_sc, CounterRng::mix(seed ^ k), child);
            double bound = eta_bound(q, sc.classif->q_prime, sc.env,
                                     sc.classif->flip_probs.size(), sc.classif->preset, 0.0);
            csv.row({std::to_string(q),
                     format_sig(child.summary["derived"]["within_fraction"].get<double>()),
                     format_sig(bound)});
        }
    }
    out.files["sweep.csv"] = std::move(csv.body);
    out.summary["derived"]["variable"] = sw.variable;
    out.summary["derived"]["points"] = sw.values.size();
}

}  // namespace detail

/// Runs a scenario fully in memory; nothing touches the filesystem here, so a
/// failure can never leave partial outputs behind.
inline RunResult run_scenario(const Scenario& sc,
                              std::optional<std::uint64_t> seed_override = std::nullopt,
                              std::size_t workers = 1) {
    if (workers < 1) throw config_error("workers must be at least 1");
    std::uint64_t seed = seed_override ? *seed_override : sc.mc.seed.value_or(0);

    RunResult out;
    out.summary["scenario"] = sc.resolved;
    out.summary["seed"] = seed;
    out.summary["derived"]["n_outside"] = outside_sample_count(sc.env);

    switch (sc.experiment) {
        case ExperimentKind::scheme: detail::run_scheme(sc, out); break;
        case ExperimentKind::game: detail::run_game(sc, out); break;
        case ExperimentKind::vcg: detail::run_vcg(sc, out); break;
        case ExperimentKind::verify: detail::run_verify(sc, seed, workers, out); break;
        case ExperimentKind::estimate: detail::run_estimate(sc, seed, out); break;
        case ExperimentKind::sweep: detail::run_sweep(sc, seed, workers, out); break;
    }
    out.files["summary.json"] = out.summary.dump(2) + "\n";
    return out;
}

/// Writes every produced file; on any write failure the files already written
/// are removed again before the error propagates.
inline void write_run(const RunResult& result, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    try {
        for (const auto& [name, contents] : result.files) {
            auto path = out_dir / name;
            std::ofstream f(path, std::ios::binary | std::ios::trunc);
            if (!f) throw config_error("cannot write output file: " + path.string());
            written.push_back(path);
            f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
            if (!f) throw config_error("short write on output file: " + path.string());
        }
    } catch (...) {
        for (const auto& p : written) {
            std::error_code ec;
            std::filesystem::remove(p, ec);
        }
        throw;
    }
}

}  // namespace colearn
