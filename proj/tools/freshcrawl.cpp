// freshcrawl command-line tool. JSON summaries go to stdout (or --out),
// tables to --csv. Exit codes: 0 ok, 1 usage, 2 data or invalid input,
// 3 numerical failure.

#include <cmath>
#include <fstream>
#include <functional>
#include <algorithm>
#include <map>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "freshcrawl/freshcrawl.hpp"

using namespace freshcrawl;
using nlohmann::json;

namespace {

// TOML config: top-level keys apply to the main command, a [subcommand]
// table to that subcommand. Keys are long flag names, with '_' or '-'.
class TomlConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return {}; }

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        toml::table root;
        try {
            root = toml::parse(in);
        } catch (const toml::parse_error& e) {
            std::ostringstream msg;
            msg << e.description() << " at line " << e.source().begin.line;
            throw CLI::ConfigError(msg.str());
        }
        std::vector<CLI::ConfigItem> items;
        collect(root, {}, items);
        return items;
    }

private:
    static std::string scalar(const toml::node& node, const std::string& key) {
        if (auto s = node.value<std::string>()) return *s;
        if (auto b = node.value_exact<bool>()) return *b ? "true" : "false";
        if (auto i = node.value_exact<std::int64_t>()) return std::to_string(*i);
        if (auto d = node.value_exact<double>()) {
            std::ostringstream out;
            out.precision(17);
            out << *d;
            return out.str();
        }
        throw CLI::ConfigError("unsupported value for key " + key);
    }

    static void collect(const toml::table& table, const std::vector<std::string>& parents,
                        std::vector<CLI::ConfigItem>& items) {
        for (const auto& [k, node] : table) {
            std::string key(k.str());
            for (auto& c : key)
                if (c == '_') c = '-';
            if (const auto* sub = node.as_table()) {
                auto next = parents;
                next.push_back(key);
                collect(*sub, next, items);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (const auto* arr = node.as_array()) {
                for (const auto& v : *arr) item.inputs.push_back(scalar(v, key));
            } else {
                item.inputs.push_back(scalar(node, key));
            }
            items.push_back(std::move(item));
        }
    }
};

int exit_code(ErrorKind kind) { return kind == ErrorKind::Numerical ? 3 : 2; }

std::string one_line(std::string s) {
    for (auto& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

struct Output {
    std::string out;
    std::string csv;
};

void emit(const Output& o, const json& summary) {
    if (o.out.empty()) {
        std::cout << summary.dump(2) << '\n';
    } else {
        write_file_atomic(o.out, summary.dump(2) + "\n");
    }
}

void add_output(CLI::App* cmd, Output& o, bool with_csv) {
    cmd->add_option("--out", o.out, "Write the JSON summary to this file instead of stdout");
    if (with_csv) cmd->add_option("--csv", o.csv, "Write the result table to this CSV file");
}

// Ensemble sources, in priority order: --ensemble file, inline --xi/--zeta,
// synthetic sample.
struct EnsembleArgs {
    std::string file;
    std::vector<double> xi, zeta;
    std::size_t pages = 100;
    std::uint64_t ensemble_seed = 0;
    std::vector<double> xi_range{0.1, 1.0};
    std::vector<double> zeta_range{0.5, 1.5};
    std::optional<double> xi_min, xi_max;

    PageEnsemble load() const {
        if (!file.empty()) {
            std::ifstream in(file);
            if (!in) throw Error(ErrorKind::Data, "cannot open ensemble file " + file);
            json j;
            try {
                j = json::parse(in);
            } catch (const json::exception& e) {
                throw Error(ErrorKind::Data, std::string("ensemble file: ") + e.what());
            }
            RateBounds b{j.value("xi_min", 0.1), j.value("xi_max", 1.0)};
            if (xi_min) b.xi_min = *xi_min;
            if (xi_max) b.xi_max = *xi_max;
            std::vector<double> x, z;
            for (const auto& p : j.at("pages")) {
                x.push_back(p.at("xi").get<double>());
                z.push_back(p.at("zeta").get<double>());
            }
            return PageEnsemble(std::move(x), std::move(z), b);
        }
        if (!xi.empty() || !zeta.empty()) {
            detail::require(!xi.empty(), "--zeta needs --xi");
            const auto [lo, hi] = std::minmax_element(xi.begin(), xi.end());
            RateBounds b{xi_min.value_or(*lo), xi_max.value_or(*hi)};
            return PageEnsemble(xi, zeta, b);
        }
        detail::require(xi_range.size() == 2 && zeta_range.size() == 2, "ranges take two values: low,high");
        SyntheticSpec spec{pages, xi_range[0], xi_range[1], zeta_range[0], zeta_range[1],
                           RateBounds{xi_min.value_or(xi_range[0]), xi_max.value_or(xi_range[1])}};
        return sample_synthetic_ensemble(spec, ensemble_seed);
    }
};

void add_ensemble(CLI::App* cmd, EnsembleArgs& e) {
    cmd->add_option("--ensemble", e.file, "Ensemble JSON as written by `ingest`");
    cmd->add_option("--xi", e.xi, "Change rates, comma separated")->delimiter(',');
    cmd->add_option("--zeta", e.zeta, "Request rates, comma separated")->delimiter(',');
    cmd->add_option("--pages", e.pages, "Synthetic ensemble size");
    cmd->add_option("--ensemble-seed", e.ensemble_seed, "Seed of the synthetic ensemble");
    cmd->add_option("--xi-range", e.xi_range, "Synthetic change rates low,high")->delimiter(',')->expected(2);
    cmd->add_option("--zeta-range", e.zeta_range, "Synthetic request rates low,high")->delimiter(',')->expected(2);
    cmd->add_option("--xi-min", e.xi_min, "Lower bound on change rates");
    cmd->add_option("--xi-max", e.xi_max, "Upper bound on change rates");
}

const std::map<std::string, EstimatorKind> kEstimators{
    {"mm", EstimatorKind::MomentMatch}, {"mle", EstimatorKind::MLE}, {"full", EstimatorKind::FullObs}};
const std::map<std::string, ObjectiveKind> kObjectives{
    {"freshness", ObjectiveKind::Freshness}, {"harmonic", ObjectiveKind::Harmonic}, {"delay", ObjectiveKind::Delay}};
const std::map<std::string, ExplorationCharge> kCharges{{"interval", ExplorationCharge::IntervalClosedForm},
                                                        {"uniform-rate", ExplorationCharge::UniformRate},
                                                        {"zero", ExplorationCharge::ZeroUtility}};
const std::map<std::string, SimulationMode> kModes{{"aggregated", SimulationMode::Aggregated},
                                                   {"event", SimulationMode::EventLevel}};

const char* estimator_name(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::MomentMatch: return "mm";
        case EstimatorKind::MLE: return "mle";
        case EstimatorKind::FullObs: return "full";
    }
    return "?";
}

json estimate_json(const RateEstimate& e) {
    return {{"xi_hat", e.xi_hat},
            {"xi_tilde", finite_or_null(e.xi_tilde)},
            {"confidence_width", finite_or_null(e.confidence_width)},
            {"delta", e.delta},
            {"method", estimator_name(e.method)}};
}

json record_json(const RegretRecord& r) {
    return {{"seed", r.seed},
            {"tau", r.tau},
            {"horizon", r.horizon},
            {"windows_per_page", r.windows_per_page},
            {"xi_hat", r.xi_hat},
            {"committed_rates", r.committed_rates},
            {"optimal_objective", r.optimal_objective},
            {"committed_objective", r.committed_objective},
            {"optimal_utility", r.optimal_utility},
            {"exploration_utility", r.exploration_utility},
            {"commit_utility", r.commit_utility},
            {"exploration_regret", r.exploration_regret},
            {"commit_regret", r.commit_regret},
            {"regret", r.regret},
            {"theoretical_bound", r.theoretical_bound},
            {"commit_regret_bound", r.commit_regret_bound}};
}

json stats_json(const SummaryStats& s) { return {{"mean", s.mean}, {"stddev", s.stddev}, {"median", s.median}}; }

json sweep_json(const SweepResult& r) {
    json points = json::array();
    for (const auto& p : r.points) points.push_back({{"tau", p.tau}, {"regret", stats_json(p.regret)}});
    return {{"tau_star", r.tau_star}, {"best_regret", stats_json(r.best.regret)}, {"points", points}};
}

template <typename Writer>
void maybe_csv(const Output& o, Writer&& writer) {
    if (!o.csv.empty()) write_file_atomic(o.csv, writer);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Crawl scheduling under unknown change rates: simulation, estimation, allocation and experiments"};
    app.config_formatter(std::make_shared<TomlConfig>());
    app.set_config("--config", "", "TOML config; flags override its keys");
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = 1;
    std::size_t jobs = 1;
    app.add_option("--seed", seed, "Root random seed");
    app.add_option("--jobs", jobs, "Worker threads for experiment subcommands")->check(CLI::PositiveNumber);

    std::function<void()> action;

    // simulate
    EnsembleArgs sim_ens;
    Output sim_out;
    double sim_r = 1.0, sim_horizon = 100.0;
    std::string sim_policy = "uniform-rate";
    std::string sim_trace;
    bool sim_stale = false;
    auto* sim = app.add_subcommand("simulate", "Simulate a crawl and report its utility");
    add_ensemble(sim, sim_ens);
    add_output(sim, sim_out, false);
    sim->add_option("--R", sim_r, "Bandwidth")->required();
    sim->add_option("--horizon", sim_horizon, "Simulated duration");
    sim->add_option("--policy", sim_policy, "uniform-rate, uniform-interval or optimal")
        ->check(CLI::IsMember({"uniform-rate", "uniform-interval", "optimal"}));
    sim->add_option("--trace", sim_trace, "Write the event trace to this CSV file");
    sim->add_flag("--stale-start", sim_stale, "Start every cached copy stale");
    sim->callback([&] {
        action = [&] {
            const auto ens = sim_ens.load();
            const std::size_t m = ens.size();
            Policy policy = sim_policy == "uniform-interval" ? uniform_interval_policy(m, sim_r)
                            : sim_policy == "optimal"
                                ? Policy::rates(solve_freshness_allocation(ens.request_rates(), ens.change_rates(), sim_r).rates,
                                                sim_r)
                                : uniform_rate_policy(m, sim_r);
            SimulationOptions options;
            options.initially_fresh.assign(m, !sim_stale);
            const Horizon h{0.0, sim_horizon};
            const auto trace = simulate_crawl(ens, policy, h, seed, options);
            if (!sim_trace.empty())
                write_file_atomic(sim_trace, [&](std::ostream& out) { write_trace_csv(out, trace); });
            double expected = 0.0;
            if (policy.kind() == PolicyKind::Intervals && !sim_stale)
                expected = expected_utility_interval_policy(policy.values(), ens, sim_horizon);
            else if (policy.kind() == PolicyKind::Rates)
                expected = expected_utility_rate_policy(policy.values(), ens, sim_horizon);
            json summary{{"policy", sim_policy},
                         {"pages", m},
                         {"bandwidth", sim_r},
                         {"horizon", sim_horizon},
                         {"seed", seed},
                         {"simulated_utility", empirical_utility(trace)}};
            summary["stationary_or_closed_form_utility"] =
                (policy.kind() == PolicyKind::Intervals && sim_stale) ? json(nullptr) : json(expected);
            emit(sim_out, summary);
        };
    });

    // estimate
    std::string est_input, est_method = "mm";
    double est_xi_min = 0.1, est_xi_max = 1.0, est_delta = 0.1;
    Output est_out;
    auto* est = app.add_subcommand("estimate", "Estimate change rates from an observation CSV");
    est->add_option("--input", est_input, "page_id,y_time,bit (or count for --method full)")->required();
    est->add_option("--method", est_method, "mm, mle or full")->check(CLI::IsMember({"mm", "mle", "full"}));
    est->add_option("--xi-min", est_xi_min, "Lower rate bound");
    est->add_option("--xi-max", est_xi_max, "Upper rate bound");
    est->add_option("--delta", est_delta, "Confidence level parameter");
    add_output(est, est_out, false);
    est->callback([&] {
        action = [&] {
            const auto kind = kEstimators.at(est_method);
            std::ifstream in(est_input);
            if (!in) throw Error(ErrorKind::Data, "cannot open " + est_input);
            const auto logs =
                read_observation_csv(in, kind == EstimatorKind::FullObs ? ObservationMode::Full : ObservationMode::Partial);
            EstimateOptions options{{est_xi_min, est_xi_max}, 1e-10, est_delta};
            json pages = json::array();
            for (std::size_t i = 0; i < logs.logs.size(); ++i) {
                const auto& log = logs.logs[i];
                const auto e = kind == EstimatorKind::MomentMatch ? moment_match_estimate(log, options)
                               : kind == EstimatorKind::MLE       ? mle_estimate(log, options)
                                                                  : full_obs_estimate(log, options);
                auto row = estimate_json(e);
                row["page_id"] = logs.page_ids[i];
                row["observations"] = log.size();
                pages.push_back(row);
            }
            emit(est_out, {{"method", est_method}, {"pages", pages}});
        };
    });

    // allocate
    EnsembleArgs al_ens;
    std::string al_objective = "freshness";
    double al_r = 1.0;
    Output al_out;
    auto* al = app.add_subcommand("allocate", "Solve the refresh-rate allocation for known rates");
    add_ensemble(al, al_ens);
    al->add_option("--objective", al_objective, "freshness, harmonic or delay")
        ->check(CLI::IsMember({"freshness", "harmonic", "delay"}));
    al->add_option("--R", al_r, "Bandwidth")->required();
    add_output(al, al_out, false);
    al->callback([&] {
        action = [&] {
            const auto ens = al_ens.load();
            const auto res = solve_allocation(kObjectives.at(al_objective), ens.request_rates(), ens.change_rates(), al_r);
            emit(al_out, {{"objective", al_objective},
                          {"rates", res.rates},
                          {"objective_value", res.objective_value},
                          {"kkt_residual", res.kkt_residual},
                          {"multiplier", res.multiplier}});
        };
    });

    // etc and the ETC-driven experiments share these flags
    struct EtcArgs {
        EnsembleArgs ens;
        double r = 1.0, horizon = 1e4, delta = 0.1;
        std::optional<double> tau;
        bool auto_tau = false;
        std::string charge = "interval", mode = "aggregated", estimator = "mm";
        bool simulate_commit = false;

        EtcConfig config() const {
            EtcConfig c;
            c.bandwidth = r;
            c.horizon = horizon;
            c.delta = delta;
            c.charge = kCharges.at(charge);
            c.mode = kModes.at(mode);
            c.estimator = kEstimators.at(estimator);
            c.simulate_commit = simulate_commit;
            return c;
        }
    };
    auto add_etc = [](CLI::App* cmd, EtcArgs& a, bool with_r) {
        add_ensemble(cmd, a.ens);
        if (with_r) cmd->add_option("--R", a.r, "Bandwidth")->required();
        cmd->add_option("--T", a.horizon, "Horizon");
        cmd->add_option("--delta", a.delta, "Failure probability of the confidence bound");
        cmd->add_option("--charge", a.charge, "Exploration utility accounting: interval, uniform-rate or zero")
            ->check(CLI::IsMember({"interval", "uniform-rate", "zero"}));
        cmd->add_option("--mode", a.mode, "aggregated or event")->check(CLI::IsMember({"aggregated", "event"}));
        cmd->add_option("--estimator", a.estimator, "mm or mle")->check(CLI::IsMember({"mm", "mle"}));
    };

    EtcArgs etc_args;
    Output etc_out;
    auto* etc = app.add_subcommand("etc", "Run explore-then-commit once");
    add_etc(etc, etc_args, true);
    auto* tau_opt = etc->add_option("--tau", etc_args.tau, "Exploration horizon");
    etc->add_flag("--auto-tau", etc_args.auto_tau, "Use the rounded theoretical optimum")->excludes(tau_opt);
    etc->add_flag("--simulate-commit", etc_args.simulate_commit, "Simulate the commit phase event by event");
    add_output(etc, etc_out, false);
    etc->callback([&] {
        action = [&] {
            const auto ens = etc_args.ens.load();
            auto c = etc_args.config();
            if (!etc_args.auto_tau) c.tau = etc_args.tau;
            const auto bound = regret_bound_etc(c, ens);
            auto summary = record_json(run_etc(c, ens, seed));
            summary["auto_tau"] = !c.tau.has_value();
            summary["round_length"] = static_cast<double>(ens.size()) / c.bandwidth;
            summary["tau_star_unrounded"] = bound.tau_star;
            summary["bound_a"] = bound.a;
            summary["bound_b"] = bound.b;
            emit(etc_out, summary);
        };
    });

    // sweep-tau
    EtcArgs sw_args;
    std::size_t sw_seeds = 50, sw_grid_points = 0;
    std::vector<double> sw_grid;
    Output sw_out;
    auto* sw = app.add_subcommand("sweep-tau", "Mean regret of ETC as a function of tau");
    add_etc(sw, sw_args, true);
    sw->add_option("--seeds", sw_seeds, "Seeds per tau")->check(CLI::PositiveNumber);
    sw->add_option("--grid", sw_grid, "Explicit tau grid")->delimiter(',');
    sw->add_option("--grid-points", sw_grid_points, "Geometric tau grid size (0: ternary search)");
    add_output(sw, sw_out, true);
    sw->callback([&] {
        action = [&] {
            const auto ens = sw_args.ens.load();
            const auto c = sw_args.config();
            SweepOptions o;
            o.seeds = sw_seeds;
            o.root_seed = seed;
            o.jobs = jobs;
            if (!sw_grid.empty()) {
                o.mode = SearchMode::Grid;
                o.grid = sw_grid;
            } else if (sw_grid_points > 0) {
                o.mode = SearchMode::Grid;
                o.grid = geometric_tau_grid(ens.size(), c.bandwidth, c.horizon, sw_grid_points);
            }
            const auto r = sweep_exploration_horizon(c, ens, o);
            maybe_csv(sw_out, [&](std::ostream& out) { write_sweep_csv(out, r); });
            emit(sw_out, sweep_json(r));
        };
    });

    // scaling
    EtcArgs sc_args;
    std::vector<double> sc_bandwidths{100.0, 1000.0};
    std::vector<double> sc_horizons;
    std::size_t sc_seeds = 50;
    Output sc_out;
    auto* sc = app.add_subcommand("scaling", "Empirical tau* and regret across horizons");
    add_etc(sc, sc_args, false);
    sc->add_option("--bandwidths", sc_bandwidths, "Bandwidths")->delimiter(',');
    sc->add_option("--horizons", sc_horizons, "Horizons (default 10^2 to 10^5 in half decades)")->delimiter(',');
    sc->add_option("--seeds", sc_seeds, "Seeds per tau")->check(CLI::PositiveNumber);
    add_output(sc, sc_out, true);
    sc->callback([&] {
        action = [&] {
            const auto ens = sc_args.ens.load();
            if (sc_horizons.empty())
                for (int k = 0; k <= 6; ++k) sc_horizons.push_back(std::pow(10.0, 2.0 + 0.5 * k));
            SweepOptions o;
            o.seeds = sc_seeds;
            o.root_seed = seed;
            o.jobs = jobs;
            const auto r = scaling_experiment(sc_args.config(), ens, sc_bandwidths, sc_horizons, o);
            maybe_csv(sc_out, [&](std::ostream& out) { write_scaling_csv(out, r); });
            json fits = json::array();
            for (std::size_t k = 0; k < r.bandwidths.size(); ++k)
                fits.push_back({{"bandwidth", r.bandwidths[k]},
                                {"tau_slope", r.tau_fits[k].slope},
                                {"tau_r_squared", r.tau_fits[k].r_squared},
                                {"normalized_regret_slope", r.regret_fits[k].slope},
                                {"normalized_regret_r_squared", r.regret_fits[k].r_squared}});
            json rows = json::array();
            for (const auto& row : r.rows)
                rows.push_back({{"bandwidth", row.bandwidth},
                                {"horizon", row.horizon},
                                {"tau_star", row.tau_star},
                                {"mean_regret", row.regret},
                                {"normalized_regret", row.normalized_regret}});
            emit(sc_out, {{"fits", fits}, {"rows", rows}});
        };
    });

    // coverage
    double cov_xi = 0.5, cov_window = 4.0, cov_delta = 0.1, cov_xi_min = 0.1, cov_xi_max = 1.0;
    std::size_t cov_n = 100, cov_trials = 1000;
    std::string cov_method = "mm";
    Output cov_out;
    auto* cov = app.add_subcommand("coverage", "Miss rate of an estimator's confidence width");
    cov->add_option("--xi", cov_xi, "True change rate");
    cov->add_option("--window", cov_window, "Refresh window");
    cov->add_option("--n", cov_n, "Observations per trial")->check(CLI::PositiveNumber);
    cov->add_option("--trials", cov_trials, "Trials")->check(CLI::PositiveNumber);
    cov->add_option("--delta", cov_delta, "Confidence level parameter");
    cov->add_option("--method", cov_method, "mm, mle or full")->check(CLI::IsMember({"mm", "mle", "full"}));
    cov->add_option("--xi-min", cov_xi_min, "Lower rate bound");
    cov->add_option("--xi-max", cov_xi_max, "Upper rate bound");
    add_output(cov, cov_out, false);
    cov->callback([&] {
        action = [&] {
            const std::vector<double> windows(cov_n, cov_window);
            const auto r = coverage_experiment(kEstimators.at(cov_method), windows, cov_xi, cov_delta, cov_trials, seed,
                                               {cov_xi_min, cov_xi_max});
            emit(cov_out, {{"method", cov_method},
                           {"xi", cov_xi},
                           {"window", cov_window},
                           {"n", cov_n},
                           {"trials", r.trials},
                           {"misses", r.misses},
                           {"miss_rate", r.miss_rate},
                           {"width", finite_or_null(r.width)}});
        };
    });

    // compare-estimators
    std::vector<double> ce_xis{0.15, 0.5, 0.95}, ce_rhos{0.25, 0.75};
    std::vector<std::size_t> ce_sizes{100, 400};
    std::size_t ce_seeds = 200;
    double ce_delta = 0.1, ce_xi_min = 0.1, ce_xi_max = 1.0;
    Output ce_out;
    auto* ce = app.add_subcommand("compare-estimators", "Error quantiles of MLE and moment matching");
    ce->add_option("--xi", ce_xis, "True change rates")->delimiter(',');
    ce->add_option("--rho", ce_rhos, "Refresh rates")->delimiter(',');
    ce->add_option("--n", ce_sizes, "Observation counts")->delimiter(',');
    ce->add_option("--seeds", ce_seeds, "Seeds per grid point")->check(CLI::PositiveNumber);
    ce->add_option("--delta", ce_delta, "Confidence level parameter");
    ce->add_option("--xi-min", ce_xi_min, "Lower rate bound");
    ce->add_option("--xi-max", ce_xi_max, "Upper rate bound");
    add_output(ce, ce_out, true);
    ce->callback([&] {
        action = [&] {
            const auto rows =
                estimator_comparison(ce_xis, ce_rhos, ce_sizes, ce_seeds, ce_delta, seed, {ce_xi_min, ce_xi_max}, jobs);
            maybe_csv(ce_out, [&](std::ostream& out) { write_estimator_csv(out, rows); });
            json out = json::array();
            for (const auto& r : rows)
                out.push_back({{"xi", r.xi},
                               {"rho", r.rho},
                               {"n", r.observations},
                               {"mle_median_error", r.mle_q50},
                               {"mm_median_error", r.mm_q50},
                               {"median_gap", r.median_gap},
                               {"bound", r.bound}});
            emit(ce_out, {{"rows", out}});
        };
    });

    // phased
    EnsembleArgs ph_ens;
    double ph_r = 1.0, ph_horizon = 1e4, ph_epsilon = 0.1;
    std::size_t ph_phases = 9, ph_seeds = 50;
    Output ph_out;
    auto* ph = app.add_subcommand("phased", "Phased epsilon-greedy learning");
    add_ensemble(ph, ph_ens);
    ph->add_option("--R", ph_r, "Bandwidth")->required();
    ph->add_option("--T", ph_horizon, "Horizon");
    ph->add_option("--epsilon", ph_epsilon, "Uniform mixing weight");
    ph->add_option("--phases", ph_phases, "Number of phases")->check(CLI::PositiveNumber);
    ph->add_option("--seeds", ph_seeds, "Independent runs")->check(CLI::PositiveNumber);
    add_output(ph, ph_out, true);
    ph->callback([&] {
        action = [&] {
            const auto ens = ph_ens.load();
            PhasedConfig c;
            c.bandwidth = ph_r;
            c.horizon = ph_horizon;
            c.epsilon = ph_epsilon;
            c.phases = ph_phases;
            const auto seeds = seed_list(seed, ph_seeds);
            std::vector<PhasedResult> runs(seeds.size());
            parallel_for(seeds.size(), jobs, [&](std::size_t k) { runs[k] = run_phased_eps_greedy(c, ens, seeds[k]); });
            maybe_csv(ph_out, [&](std::ostream& out) { write_phases_csv(out, runs); });
            std::vector<double> regrets;
            for (const auto& r : runs) regrets.push_back(r.regret);
            emit(ph_out, {{"phases", ph_phases},
                          {"epsilon", ph_epsilon},
                          {"phase_length", runs.front().phase_length},
                          {"regret", stats_json(summarize(regrets))}});
        };
    });

    // ingest
    std::string in_input;
    double in_xi_min = kDatasetBounds.xi_min, in_xi_max = kDatasetBounds.xi_max;
    Output in_out;
    auto* ing = app.add_subcommand("ingest", "Fit change rates to a crawl log and write an ensemble JSON");
    ing->add_option("--input", in_input, "page_id,crawl_time,changed,importance")->required();
    ing->add_option("--xi-min", in_xi_min, "Lower rate bound");
    ing->add_option("--xi-max", in_xi_max, "Upper rate bound");
    add_output(ing, in_out, false);
    ing->callback([&] {
        action = [&] {
            std::ifstream in(in_input);
            if (!in) throw Error(ErrorKind::Data, "cannot open " + in_input);
            const auto r = ingest_crawl_log(in, {in_xi_min, in_xi_max});
            for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
            json pages = json::array();
            for (std::size_t i = 0; i < r.page_ids.size(); ++i)
                pages.push_back({{"page_id", r.page_ids[i]},
                                 {"xi", r.ensemble.change_rates()[i]},
                                 {"zeta", r.ensemble.request_rates()[i]},
                                 {"observations", r.logs[i].size()}});
            emit(in_out, {{"xi_min", in_xi_min},
                          {"xi_max", in_xi_max},
                          {"excluded_never_changed", r.excluded_never_changed},
                          {"excluded_always_changed", r.excluded_always_changed},
                          {"warnings", r.warnings},
                          {"pages", pages}});
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        action();
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.kind()) << ": " << one_line(e.what()) << '\n';
        return exit_code(e.kind());
    } catch (const json::exception& e) {
        std::cerr << "error: data_error: " << one_line(e.what()) << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: failure: " << one_line(e.what()) << '\n';
        return 2;
    }
    return 0;
}
