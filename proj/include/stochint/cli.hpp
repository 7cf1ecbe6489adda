#pragma once

#include "stochint/experiments.hpp"
#include "stochint/milstein.hpp"
#include "stochint/report.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace stochint::cli {

enum ExitCode { pass = 0, check_failed = 1, usage_error = 2 };

/// Parsed settings for one subcommand. The meaning of `q` depends on the command:
/// truncation orders (levy-error, hermite-check), the largest basis index
/// (basis-check), the bridge truncation R (bridge-check) or a fixed Milstein q
/// (0: q = max(1, round(1/(16 Delta)))).
struct ExperimentConfig {
    std::string command;
    std::uint64_t seed = 1;
    double t0 = 0.0;
    double t1 = 1.0;
    std::vector<int> q;
    int paths = 1;
    int grid_n = 1;
    std::vector<std::string> basis;
    bool tail = false;
    int tail_modes = 0;
    std::string out;
    std::string format = "csv";
    unsigned threads = 0;
    // command specific
    double tol = 1e-8;
    std::vector<int> k;
    std::string problem = "noncommutative-2x2";
    std::string source = "oracle";
    std::vector<int> steps;
    int reference_steps = 1 << 13;
    int components = 2;

    Interval interval() const { return {t0, t1}; }

    void validate() const {
        if (q.empty()) throw std::invalid_argument("--q needs at least one value");
        for (int v : q)
            if (v < 0 || (v == 0 && command != "basis-check" && command != "milstein-order")) throw std::invalid_argument("--q values must be positive");
        if (paths < 1) throw std::invalid_argument("--paths must be positive");
        if (grid_n < 1) throw std::invalid_argument("--grid-n must be positive");
        if (tail_modes < 0) throw std::invalid_argument("--tail-modes must be positive");
        if (!(tol > 0.0)) throw std::invalid_argument("--tol must be positive");
        if (components < 1) throw std::invalid_argument("--components must be positive");
        if (reference_steps < 1) throw std::invalid_argument("--ref-steps must be positive");
        for (int s : steps)
            if (s < 1) throw std::invalid_argument("--steps values must be positive");
        (void)interval();
        for (const std::string& b : basis) (void)parse_basis_kind(b);
    }
};

inline ExperimentConfig defaults_for(const std::string& command) {
    ExperimentConfig c;
    c.command = command;
    if (command == "basis-check") {
        c.q = {32};
        c.basis = {"legendre", "trig"};
    } else if (command == "levy-error") {
        c.q = {1, 2, 4, 8, 16, 32};
        c.paths = 100000;
        c.grid_n = 1 << 14;
        c.basis = {"legendre", "trig"};
    } else if (command == "milstein-order") {
        c.q = {0};
        c.paths = 500;
        c.grid_n = 1 << 16;
        c.steps = {16, 32, 64, 128, 256, 512};
    } else if (command == "hermite-check") {
        c.q = {64};
        c.paths = 10000;
        c.basis = {"legendre"};
        c.k = {1, 2, 3, 4, 5};
    } else if (command == "bridge-check") {
        c.q = {3};
        c.paths = 1000000;
    }
    return c;
}

namespace detail {

inline int single(const std::vector<int>& v, const char* what) {
    if (v.size() != 1) throw std::invalid_argument(std::string(what) + " takes a single value for this command");
    return v.front();
}

inline std::vector<BasisKind> kinds(const ExperimentConfig& c) {
    std::vector<BasisKind> out;
    for (const std::string& b : c.basis) {
        const BasisKind k = parse_basis_kind(b);
        if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
    }
    if (out.empty()) throw std::invalid_argument("--basis needs at least one value");
    return out;
}

inline std::int64_t i64(int v) { return v; }

} // namespace detail

inline Report basis_check(const ExperimentConfig& c) {
    const int J = detail::single(c.q, "--q");
    Report r{"basis-check", {"basis", "check", "row", "col", "residual", "pass"}, {}, true};
    for (BasisKind kind : detail::kinds(c))
        for (const BasisCheckRow& row : run_basis_check(kind, J, c.interval())) {
            const bool ok = row.residual <= c.tol;
            r.pass = r.pass && ok;
            r.add({std::string(to_string(row.kind)), row.check, detail::i64(row.row), detail::i64(row.col), row.residual, ok});
        }
    return r;
}

inline Report levy_error(const ExperimentConfig& c) {
    LevyErrorConfig lc;
    lc.bases = detail::kinds(c);
    lc.qs = c.q;
    lc.paths = c.paths;
    lc.cells = c.grid_n;
    lc.interval = c.interval();
    lc.seed = c.seed;
    lc.tail = c.tail;
    lc.tail_modes = c.tail_modes;
    lc.threads = c.threads;
    const std::vector<LevyErrorRow> rows = run_levy_error(lc);

    // fitted log-log slope of the Monte Carlo error against q, per basis
    std::map<BasisKind, double> slope;
    bool have_slope = false;
    for (BasisKind kind : lc.bases) {
        std::vector<double> x, y;
        for (const LevyErrorRow& row : rows)
            if (row.kind == kind) {
                x.push_back(row.q);
                y.push_back(row.mc_ms);
            }
        if (x.size() >= 2) {
            slope[kind] = fit_loglog_slope(x, y);
            have_slope = true;
        }
    }
    Report r{"levy-error", {"basis", "tail", "q", "n", "analytic_ms", "mc_ms", "mc_stderr", "bound_2n", "mc_2n", "envelope"}, {}, true};
    if (have_slope) r.columns.push_back("slope");
    r.columns.push_back("pass");
    for (const LevyErrorRow& row : rows) {
        bool ok = row.within(3.0) && row.bound_holds();
        std::vector<Cell> cells{std::string(to_string(row.kind)), row.tail, detail::i64(row.q), detail::i64(row.paths), row.analytic_ms,
                                row.mc_ms, row.mc_stderr, row.bound_2n, row.mc_2n, row.envelope};
        if (have_slope) {
            // the coupled tail leaves a floor set by --tail-modes, so only untailed curves follow 1/q
            const double s = slope.at(row.kind);
            if (!row.tail) ok = ok && s >= -1.2 && s <= -0.8;
            cells.emplace_back(s);
        }
        cells.emplace_back(ok);
        r.pass = r.pass && ok;
        r.add(std::move(cells));
    }
    return r;
}

inline Report milstein_order(const ExperimentConfig& c) {
    OrderConfig oc;
    oc.problem = c.problem;
    oc.seed = c.seed;
    oc.paths = c.paths;
    oc.base_cells = c.grid_n;
    oc.reference_steps = c.reference_steps;
    oc.steps = c.steps;
    oc.source = parse_area_source(c.source);
    const int q = detail::single(c.q, "--q");
    if (q > 0) oc.fixed_q = q;
    oc.tail = c.tail;
    oc.tail_modes = c.tail_modes;
    oc.threads = c.threads;
    (void)make_problem(oc.problem);
    const OrderReport rep = run_strong_order(oc);
    const double lo = oc.source == AreaSource::Euler ? 0.35 : 0.85;
    const double hi = oc.source == AreaSource::Euler ? 0.65 : 1.15;
    Report r{"milstein-order", {"problem", "source", "steps", "delta", "q", "strong_error", "stderr", "slope", "slope_min", "slope_max", "pass"}, {}, true};
    r.pass = rep.slope >= lo && rep.slope <= hi;
    for (const OrderRow& row : rep.rows)
        r.add({oc.problem, to_string(oc.source), detail::i64(row.steps), row.delta, detail::i64(row.q), row.strong_error, row.stderr_error,
               rep.slope, lo, hi, r.pass});
    return r;
}

inline Report hermite_check(const ExperimentConfig& c) {
    const std::vector<BasisKind> kinds = detail::kinds(c);
    Report r{"hermite-check", {"basis", "k", "p", "n", "rms_gap", "max_gap", "predicted_rms", "pass"}, {}, true};
    for (BasisKind kind : kinds)
        for (int p : c.q) {
            HermiteConfig hc;
            hc.ks = c.k;
            hc.p = p;
            hc.paths = c.paths;
            hc.interval = c.interval();
            hc.kind = kind;
            hc.seed = c.seed;
            hc.threads = c.threads;
            for (const HermiteRow& row : run_hermite_check(hc)) {
                const bool ok = row.pass();
                r.pass = r.pass && ok;
                r.add({std::string(to_string(row.kind)), detail::i64(row.k), detail::i64(row.p), detail::i64(row.paths), row.rms_gap,
                       row.max_gap, row.predicted_rms, ok});
            }
        }
    return r;
}

inline Report bridge_check(const ExperimentConfig& c) {
    BridgeConfig bc;
    bc.delta = c.interval().length();
    bc.R = detail::single(c.q, "--q");
    bc.components = c.components;
    bc.paths = c.paths;
    bc.seed = c.seed;
    bc.threads = c.threads;
    Report r{"bridge-check", {"quantity", "u", "v", "estimate", "expected", "deviation", "tolerance", "pass"}, {}, true};
    for (const BridgeRow& row : run_bridge_check(bc)) {
        const bool ok = row.pass();
        r.pass = r.pass && ok;
        r.add({row.quantity, row.u, row.v, row.estimate, row.expected, row.deviation(), row.tolerance, ok});
    }
    return r;
}

inline Report run_command(const ExperimentConfig& c) {
    c.validate();
    if (c.command == "basis-check") return basis_check(c);
    if (c.command == "levy-error") return levy_error(c);
    if (c.command == "milstein-order") return milstein_order(c);
    if (c.command == "hermite-check") return hermite_check(c);
    if (c.command == "bridge-check") return bridge_check(c);
    throw std::invalid_argument("unknown command '" + c.command + "'");
}

inline void write_report(std::ostream& os, const Report& r, const std::string& format) {
    if (format == "json")
        write_json(os, r);
    else
        write_csv(os, r);
}

/// args excludes the program name. Returns the process exit code.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Iterated Ito integral experiments", "stochint"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI file with option values; command-line flags take precedence");

    const std::vector<std::string> commands{"basis-check", "levy-error", "milstein-order", "hermite-check", "bridge-check"};
    const std::map<std::string, std::string> help{
        {"basis-check", "orthonormality and antiderivative residuals of the bases"},
        {"levy-error", "Monte Carlo mean-square truncation error of the Levy area against the coupled oracle"},
        {"milstein-order", "strong convergence order of the Milstein scheme"},
        {"hermite-check", "equal-index expansions against the Hermite closed forms"},
        {"bridge-check", "sample covariances of the Brownian bridge coefficients"},
    };
    std::map<std::string, ExperimentConfig> configs;
    for (const std::string& name : commands) {
        configs[name] = defaults_for(name);
        ExperimentConfig& c = configs[name];
        CLI::App* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--seed", c.seed, "root seed")->capture_default_str();
        sub->add_option("--paths", c.paths, "number of Monte Carlo paths")->capture_default_str();
        sub->add_option("--q", c.q, "truncation order(s), comma separated")->delimiter(',')->capture_default_str();
        sub->add_option("--threads", c.threads, "worker threads, 0 for all cores")->capture_default_str();
        sub->add_option("--out", c.out, "output file (default stdout)");
        sub->add_option("--format", c.format, "report format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
        if (name != "milstein-order") {
            sub->add_option("--t0", c.t0, "interval start")->capture_default_str();
            sub->add_option("--t1", c.t1, "interval end")->capture_default_str();
        }
        if (name != "bridge-check" && name != "milstein-order")
            sub->add_option("--basis", c.basis, "legendre and/or trig, comma separated")
                ->delimiter(',')
                ->check(CLI::IsMember({"legendre", "trig"}))
                ->capture_default_str();
        if (name == "levy-error" || name == "milstein-order") {
            sub->add_flag("--tail", c.tail, "add the trigonometric tail variate");
            sub->add_option("--tail-modes", c.tail_modes, "sine modes behind the coupled tail (0: four times q)")->capture_default_str();
            sub->add_option("--grid-n", c.grid_n, "oracle grid cells")->capture_default_str();
        }
        if (name == "basis-check") sub->add_option("--tol", c.tol, "residual tolerance")->capture_default_str();
        if (name == "hermite-check") sub->add_option("--k", c.k, "multiplicities 1..5, comma separated")->delimiter(',')->capture_default_str();
        if (name == "bridge-check") sub->add_option("--components", c.components, "Wiener components")->capture_default_str();
        if (name == "milstein-order") {
            sub->add_option("--problem", c.problem, "registered problem")->capture_default_str();
            sub->add_option("--source", c.source, "area source")->check(CLI::IsMember({"oracle", "legendre", "trig", "euler"}))->capture_default_str();
            sub->add_option("--steps", c.steps, "coarse step counts, comma separated")->delimiter(',')->capture_default_str();
            sub->add_option("--ref-steps", c.reference_steps, "steps of the reference solution")->capture_default_str();
        }
    }

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::ParseError& e) {
        const int code = e.get_exit_code();
        app.exit(e, out, err);
        return code == 0 ? pass : usage_error;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    const ExperimentConfig& c = configs.at(name);
    Report report;
    try {
        report = run_command(c);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return usage_error;
    } catch (const std::length_error& e) {
        err << "error: " << e.what() << '\n';
        return usage_error;
    } catch (const std::exception& e) {
        err << "failed: " << e.what() << '\n';
        return check_failed;
    }
    if (c.out.empty()) {
        write_report(out, report, c.format);
    } else {
        std::ofstream file(c.out, std::ios::binary);
        if (!file) {
            err << "error: cannot open " << c.out << '\n';
            return usage_error;
        }
        write_report(file, report, c.format);
    }
    if (!report.pass) err << name << ": check failed\n";
    return report.pass ? pass : check_failed;
}

} // namespace stochint::cli
