#pragma once

#include "stochint/levy_area.hpp"
#include "stochint/oracle.hpp"
#include "stochint/parallel.hpp"
#include "stochint/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stochint {

/// dx = a(x, t) dt + B(x, t) dw on [0, horizon], w of dimension m.
struct SdeProblem {
    using Field = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;
    using MatrixField = std::function<Eigen::MatrixXd(const Eigen::VectorXd&, double)>;
    /// (x, t, i1, i2) -> sum_j B_{j i1} d/dx_j of column i2 of B; components 1-based.
    using Derivative = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double, int, int)>;

    std::string name;
    int n = 0;
    int m = 0;
    Field drift;
    MatrixField diffusion;
    Derivative derivative; // empty: central differences
    Eigen::VectorXd x0;
    double horizon = 1.0;

    void validate() const {
        if (n < 1 || m < 1) throw std::invalid_argument("problem dimensions must be positive");
        if (x0.size() != n) throw std::invalid_argument("initial state has the wrong dimension");
        if (!drift || !diffusion) throw std::invalid_argument("problem needs drift and diffusion");
        if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("horizon must be positive");
    }
};

class StepFailure : public std::runtime_error {
public:
    StepFailure(const std::string& what, int step, double time, Eigen::VectorXd state)
        : std::runtime_error(describe(what, step, time, state)), step_(step), time_(time), state_(std::move(state)) {}

    int step() const { return step_; }
    double time() const { return time_; }
    const Eigen::VectorXd& state() const { return state_; }

private:
    static std::string describe(const std::string& what, int step, double time, const Eigen::VectorXd& state) {
        std::ostringstream os;
        os.precision(17);
        os << what << " at step " << step << ", t=" << time << ", state=(";
        for (Eigen::Index i = 0; i < state.size(); ++i) os << (i ? ", " : "") << state(i);
        os << ")";
        return os.str();
    }

    int step_;
    double time_;
    Eigen::VectorXd state_;
};

/// G_{i1} B_{i2} by a central difference along column i1, h = sqrt(eps) (1 + |x|).
inline Eigen::VectorXd finite_difference_derivative(const SdeProblem& p, const Eigen::VectorXd& x, double t, int i1, int i2) {
    const Eigen::VectorXd dir = p.diffusion(x, t).col(i1 - 1);
    const double h = std::sqrt(std::numeric_limits<double>::epsilon()) * (1.0 + x.norm());
    const Eigen::MatrixXd plus = p.diffusion(x + h * dir, t);
    const Eigen::MatrixXd minus = p.diffusion(x - h * dir, t);
    return (plus.col(i2 - 1) - minus.col(i2 - 1)) / (2.0 * h);
}

inline Eigen::VectorXd derivative_field(const SdeProblem& p, const Eigen::VectorXd& x, double t, int i1, int i2) {
    return p.derivative ? p.derivative(x, t, i1, i2) : finite_difference_derivative(p, x, t, i1, i2);
}

namespace detail {

inline void check_finite(const Eigen::VectorXd& v, const char* what, int step, double t, const Eigen::VectorXd& y) {
    if (!v.allFinite()) throw StepFailure(std::string("non-finite ") + what, step, t, y);
}

} // namespace detail

/// y + Delta a + sum_i B_i I^{(i)} + sum_{i1,i2} G_{i1} B_{i2} I^{(i1 i2)}.
/// Only the off-diagonal entries of `double_integrals` are read; the diagonal is the
/// exact (I^2 - Delta)/2.
inline Eigen::VectorXd milstein_step(const SdeProblem& p, const Eigen::VectorXd& y, double tau, double delta,
                                     const Eigen::VectorXd& increments, const Eigen::MatrixXd& double_integrals, int step = 0) {
    const Eigen::VectorXd a = p.drift(y, tau);
    detail::check_finite(a, "drift", step, tau, y);
    const Eigen::MatrixXd b = p.diffusion(y, tau);
    if (!b.allFinite()) throw StepFailure("non-finite diffusion", step, tau, y);
    Eigen::VectorXd next = y + delta * a;
    next += b * increments;
    for (int i1 = 1; i1 <= p.m; ++i1) {
        for (int i2 = 1; i2 <= p.m; ++i2) {
            const double w = i1 == i2 ? 0.5 * (increments(i1 - 1) * increments(i1 - 1) - delta) : double_integrals(i1 - 1, i2 - 1);
            const Eigen::VectorXd g = derivative_field(p, y, tau, i1, i2);
            detail::check_finite(g, "diffusion derivative", step, tau, y);
            next += w * g;
        }
    }
    detail::check_finite(next, "state", step, tau, y);
    return next;
}

inline Eigen::VectorXd euler_step(const SdeProblem& p, const Eigen::VectorXd& y, double tau, double delta,
                                  const Eigen::VectorXd& increments, int step = 0) {
    const Eigen::VectorXd a = p.drift(y, tau);
    detail::check_finite(a, "drift", step, tau, y);
    const Eigen::MatrixXd b = p.diffusion(y, tau);
    if (!b.allFinite()) throw StepFailure("non-finite diffusion", step, tau, y);
    Eigen::VectorXd next = y + delta * a;
    next += b * increments;
    detail::check_finite(next, "state", step, tau, y);
    return next;
}

// ---------------------------------------------------------------------------
// registered test problems

/// dx = lambda x dt + mu x dw.
inline SdeProblem scalar_linear_problem(double lambda = 0.5, double mu = 0.8, double x0 = 1.0) {
    SdeProblem p;
    p.name = "scalar-linear";
    p.n = p.m = 1;
    p.drift = [lambda](const Eigen::VectorXd& x, double) { return Eigen::VectorXd(lambda * x); };
    p.diffusion = [mu](const Eigen::VectorXd& x, double) { return Eigen::MatrixXd(mu * x); };
    p.derivative = [mu](const Eigen::VectorXd& x, double, int, int) { return Eigen::VectorXd(mu * mu * x); };
    p.x0 = Eigen::VectorXd::Constant(1, x0);
    return p;
}

/// dx = A x dt + M_1 x dw^{(1)} + M_2 x dw^{(2)} with a rotation generator M_1 and a
/// stretch M_2 that do not commute, so the Levy area enters the Milstein step.
inline SdeProblem noncommutative_problem() {
    Eigen::Matrix2d A, M1, M2;
    A << -0.2, 0.4, -0.4, -0.2;
    M1 << 0.0, -0.6, 0.6, 0.0;
    M2 << 0.5, 0.0, 0.0, -0.5;
    SdeProblem p;
    p.name = "noncommutative-2x2";
    p.n = p.m = 2;
    p.drift = [A](const Eigen::VectorXd& x, double) { return Eigen::VectorXd(A * x); };
    p.diffusion = [M1, M2](const Eigen::VectorXd& x, double) {
        Eigen::MatrixXd b(2, 2);
        b.col(0) = M1 * x;
        b.col(1) = M2 * x;
        return b;
    };
    // column i2 is M_{i2} x, its derivative along M_{i1} x is M_{i2} M_{i1} x
    p.derivative = [M1, M2](const Eigen::VectorXd& x, double, int i1, int i2) {
        const Eigen::Matrix2d& inner = i1 == 1 ? M1 : M2;
        const Eigen::Matrix2d& outer = i2 == 1 ? M1 : M2;
        return Eigen::VectorXd(outer * (inner * x));
    };
    p.x0 = Eigen::Vector2d(1.0, 0.0);
    return p;
}

inline std::vector<std::string> problem_names() { return {"noncommutative-2x2", "scalar-linear"}; }

inline SdeProblem make_problem(const std::string& name) {
    if (name == "noncommutative-2x2") return noncommutative_problem();
    if (name == "scalar-linear") return scalar_linear_problem();
    throw std::invalid_argument("unknown problem '" + name + "'");
}

// ---------------------------------------------------------------------------
// step plans and ensembles

enum class AreaSource { Oracle, Legendre, Trigonometric, Euler };

inline std::string to_string(AreaSource s) {
    switch (s) {
    case AreaSource::Oracle: return "oracle";
    case AreaSource::Legendre: return "legendre";
    case AreaSource::Trigonometric: return "trig";
    case AreaSource::Euler: return "euler";
    }
    return "?";
}

inline AreaSource parse_area_source(const std::string& s) {
    if (s == "oracle") return AreaSource::Oracle;
    if (s == "legendre") return AreaSource::Legendre;
    if (s == "trig" || s == "trigonometric") return AreaSource::Trigonometric;
    if (s == "euler") return AreaSource::Euler;
    throw std::invalid_argument("unknown area source '" + s + "'");
}

struct StepPlan {
    int steps = 1;
    AreaSource source = AreaSource::Oracle;
    int q = 1;             // truncation order of the expansion sources
    bool tail = false;     // trigonometric tail correction
    int oracle_cells = 64; // fine cells per step when the oracle draws its own grid

    double delta(double horizon) const { return horizon / steps; }

    void validate() const {
        if (steps < 1) throw std::invalid_argument("step count must be >= 1");
        if ((source == AreaSource::Legendre || source == AreaSource::Trigonometric) && q < 0)
            throw std::invalid_argument("truncation order must be non-negative");
        if (tail && source != AreaSource::Trigonometric) throw std::invalid_argument("the tail flag needs the trigonometric source");
        if (source == AreaSource::Oracle && oracle_cells < 2) throw std::invalid_argument("oracle needs at least two cells per step");
    }

    std::string describe() const {
        std::ostringstream os;
        os << to_string(source) << ":steps=" << steps;
        if (source == AreaSource::Legendre || source == AreaSource::Trigonometric) os << ":q=" << q;
        if (tail) os << ":tail";
        if (source == AreaSource::Oracle) os << ":cells=" << oracle_cells;
        return os.str();
    }
};

/// Identifies the driving noise. Ensembles are comparable path by path only when
/// their keys are equal.
struct CouplingKey {
    std::uint64_t seed = 0;
    std::string driver;

    bool operator==(const CouplingKey&) const = default;
};

struct Ensemble {
    Eigen::MatrixXd terminal; // n x paths
    CouplingKey coupling;

    int paths() const { return static_cast<int>(terminal.cols()); }
};

/// sqrt(mean over paths of |y - y_ref|^2).
inline double strong_error(const Ensemble& e, const Ensemble& ref) {
    if (!(e.coupling == ref.coupling)) throw std::invalid_argument("strong error needs ensembles driven by the same noise");
    if (e.terminal.rows() != ref.terminal.rows() || e.terminal.cols() != ref.terminal.cols())
        throw std::invalid_argument("ensembles have different shapes");
    if (e.paths() == 0) throw std::invalid_argument("empty ensemble");
    return std::sqrt((e.terminal - ref.terminal).colwise().squaredNorm().sum() / e.paths());
}

namespace detail {

/// Increments and double integrals for one step from a fresh draw of the step's noise.
inline void draw_step_noise(RandomStream& stream, const SdeProblem& p, const StepPlan& plan, double tau, double delta,
                            Eigen::VectorXd& inc, Eigen::MatrixXd& dbl) {
    const int m = p.m;
    switch (plan.source) {
    case AreaSource::Euler:
        for (int i = 0; i < m; ++i) inc(i) = std::sqrt(delta) * stream.normal();
        return;
    case AreaSource::Oracle: {
        const BrownianGridPath path = sample_grid_path(stream, m, TimeGrid::uniform({tau, tau + delta}, plan.oracle_cells));
        inc = path.increments.rowwise().sum();
        for (int i1 = 1; i1 <= m; ++i1)
            for (int i2 = 1; i2 <= m; ++i2)
                if (i1 != i2) dbl(i1 - 1, i2 - 1) = oracle_double_integral(path, i1, i2);
        return;
    }
    case AreaSource::Legendre:
    case AreaSource::Trigonometric: {
        const bool legendre = plan.source == AreaSource::Legendre;
        const GaussianPanel panel = sample_panel(stream, m, legendre ? plan.q : 2 * plan.q);
        std::optional<TailVariate> tail;
        if (plan.tail) tail = sample_tail(stream, m);
        const Interval iv{tau, tau + delta};
        inc = std::sqrt(delta) * panel.values.col(0);
        const BasisKind kind = legendre ? BasisKind::Legendre : BasisKind::Trigonometric;
        for (int i1 = 1; i1 <= m; ++i1)
            for (int i2 = 1; i2 <= m; ++i2)
                if (i1 != i2) dbl(i1 - 1, i2 - 1) = double_integral(panel, plan.q, i1, i2, kind, iv, tail ? &*tail : nullptr);
        return;
    }
    }
}

} // namespace detail

/// Terminal states of `paths` independent solutions. Path p uses substream p of the
/// seed; each step draws its own noise in order. The result does not depend on `threads`.
inline Ensemble integrate(const SdeProblem& p, const StepPlan& plan, std::uint64_t seed, int paths, unsigned threads = 1) {
    p.validate();
    plan.validate();
    if (paths < 1) throw std::invalid_argument("need at least one path");
    Ensemble out{Eigen::MatrixXd(p.n, paths), {seed, "steps:" + plan.describe()}};
    const double delta = plan.delta(p.horizon);
    const RandomStream root(seed);
    parallel_for(static_cast<std::size_t>(paths), threads, [&](std::size_t k) {
        RandomStream stream = root.substream(k);
        Eigen::VectorXd y = p.x0, inc(p.m);
        Eigen::MatrixXd dbl = Eigen::MatrixXd::Zero(p.m, p.m);
        for (int s = 0; s < plan.steps; ++s) {
            const double tau = s * delta;
            detail::draw_step_noise(stream, p, plan, tau, delta, inc, dbl);
            y = plan.source == AreaSource::Euler ? euler_step(p, y, tau, delta, inc, s) : milstein_step(p, y, tau, delta, inc, dbl, s);
        }
        out.terminal.col(static_cast<Eigen::Index>(k)) = y;
    });
    return out;
}

/// Runs a plan on a given fine Brownian path; each step covers cells/steps fine cells.
/// Oracle areas are the left-point sums over the step's cells; expansion areas use the
/// step's projection onto the basis, so all sources see the same path.
class PathStepper {
public:
    PathStepper(const SdeProblem& p, const StepPlan& plan, int cells, int tail_modes = 0)
        : problem_(p), plan_(plan), cells_(cells), tail_modes_(tail_modes) {
        p.validate();
        plan.validate();
        if (cells % plan.steps != 0) throw std::invalid_argument("step count must divide the fine grid");
        block_ = cells / plan.steps;
        if (block_ < 2 && plan.source == AreaSource::Oracle) throw std::invalid_argument("oracle needs at least two cells per step");
        delta_ = plan.delta(p.horizon);
        if (plan.source == AreaSource::Legendre || plan.source == AreaSource::Trigonometric) {
            const bool legendre = plan.source == AreaSource::Legendre;
            if (plan.tail && tail_modes_ <= plan.q) tail_modes_ = 4 * std::max(1, plan.q);
            const int J = legendre ? plan.q : std::max(2 * plan.q, plan.tail ? 2 * tail_modes_ - 1 : 0);
            const BasisSystem basis{legendre ? BasisKind::Legendre : BasisKind::Trigonometric, {0.0, delta_}};
            projector_.emplace(TimeGrid::uniform(basis.interval, block_), basis, J);
        }
    }

    int block() const { return block_; }
    int tail_modes() const { return tail_modes_; }

    Eigen::VectorXd run(const BrownianGridPath& path) const {
        if (path.grid.cells() != cells_ || path.components() != problem_.m) throw std::invalid_argument("path does not match the stepper");
        const int m = problem_.m;
        Eigen::VectorXd y = problem_.x0, inc(m);
        Eigen::MatrixXd dbl = Eigen::MatrixXd::Zero(m, m);
        const TimeGrid local = TimeGrid::uniform({0.0, delta_}, block_);
        for (int s = 0; s < plan_.steps; ++s) {
            const double tau = s * delta_;
            const Eigen::MatrixXd cells = path.increments.middleCols(static_cast<Eigen::Index>(s) * block_, block_);
            inc = cells.rowwise().sum();
            switch (plan_.source) {
            case AreaSource::Euler: break;
            case AreaSource::Oracle: {
                const BrownianGridPath sub{local, cells};
                for (int i1 = 1; i1 <= m; ++i1)
                    for (int i2 = 1; i2 <= m; ++i2)
                        if (i1 != i2) dbl(i1 - 1, i2 - 1) = oracle_double_integral(sub, i1, i2);
                break;
            }
            case AreaSource::Legendre:
            case AreaSource::Trigonometric: {
                GaussianPanel panel;
                panel.values = projector_->project(cells);
                std::optional<TailVariate> tail;
                if (plan_.tail) tail = coupled_tail(panel, plan_.q, tail_modes_);
                const BasisKind kind = plan_.source == AreaSource::Legendre ? BasisKind::Legendre : BasisKind::Trigonometric;
                const Interval iv{0.0, delta_};
                for (int i1 = 1; i1 <= m; ++i1)
                    for (int i2 = 1; i2 <= m; ++i2)
                        if (i1 != i2) dbl(i1 - 1, i2 - 1) = double_integral(panel, plan_.q, i1, i2, kind, iv, tail ? &*tail : nullptr);
                break;
            }
            }
            y = plan_.source == AreaSource::Euler ? euler_step(problem_, y, tau, delta_, inc, s)
                                                  : milstein_step(problem_, y, tau, delta_, inc, dbl, s);
        }
        return y;
    }

private:
    SdeProblem problem_;
    StepPlan plan_;
    int cells_;
    int tail_modes_;
    int block_ = 1;
    double delta_ = 0.0;
    std::optional<PanelProjector> projector_;
};

/// Path-coupled ensemble: path k is the fine grid path drawn from substream k.
inline Ensemble integrate_on_paths(const SdeProblem& p, const StepPlan& plan, std::uint64_t seed, int paths, int cells,
                                   unsigned threads = 1) {
    if (paths < 1) throw std::invalid_argument("need at least one path");
    const PathStepper stepper(p, plan, cells);
    const TimeGrid grid = TimeGrid::uniform({0.0, p.horizon}, cells);
    Ensemble out{Eigen::MatrixXd(p.n, paths), {seed, "grid:" + std::to_string(cells)}};
    const RandomStream root(seed);
    parallel_for(static_cast<std::size_t>(paths), threads, [&](std::size_t k) {
        RandomStream stream = root.substream(k);
        out.terminal.col(static_cast<Eigen::Index>(k)) = stepper.run(sample_grid_path(stream, p.m, grid));
    });
    return out;
}

// ---------------------------------------------------------------------------
// strong order experiment

struct OrderConfig {
    std::string problem = "noncommutative-2x2";
    std::uint64_t seed = 1;
    int paths = 500;
    int base_cells = 1 << 16;
    int reference_steps = 1 << 13;
    std::vector<int> steps{16, 32, 64, 128, 256, 512};
    AreaSource source = AreaSource::Oracle;
    std::optional<int> fixed_q;     // otherwise q = max(1, round(q_rate / Delta))
    double q_rate = 1.0 / 16.0;
    bool tail = false;
    int tail_modes = 0;             // 0: four times q
    unsigned threads = 1;
};

struct OrderRow {
    int steps;
    double delta;
    int q;
    double strong_error;
    double stderr_error;
};

struct OrderReport {
    std::vector<OrderRow> rows;
    double slope;
};

inline double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("slope fit: mismatched data");
    if (x.size() < 2) throw std::invalid_argument("slope fit needs at least two points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("slope fit needs positive data");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double n = static_cast<double>(x.size());
    const double den = n * sxx - sx * sx;
    if (den == 0.0) throw std::invalid_argument("slope fit needs distinct abscissae");
    return (n * sxy - sx * sy) / den;
}

inline int order_q(const OrderConfig& c, double delta) {
    if (c.fixed_q) return *c.fixed_q;
    return std::max(1, static_cast<int>(std::lround(c.q_rate / delta)));
}

/// Strong error of each coarse plan against a Milstein reference with oracle areas,
/// all driven by the same fine path per sample.
inline OrderReport run_strong_order(const OrderConfig& c) {
    const SdeProblem p = make_problem(c.problem);
    if (c.steps.size() < 2) throw std::invalid_argument("the order fit needs at least two step counts");
    if (c.paths < 2) throw std::invalid_argument("need at least two paths");
    std::vector<PathStepper> steppers;
    std::vector<int> qs;
    for (int n : c.steps) {
        StepPlan plan;
        plan.steps = n;
        plan.source = c.source;
        plan.q = order_q(c, p.horizon / n);
        plan.tail = c.tail;
        steppers.emplace_back(p, plan, c.base_cells, c.tail_modes);
        // reported as 0 for sources without a truncation order
        qs.push_back(c.source == AreaSource::Legendre || c.source == AreaSource::Trigonometric ? plan.q : 0);
    }
    StepPlan ref_plan;
    ref_plan.steps = c.reference_steps;
    ref_plan.source = AreaSource::Oracle;
    const PathStepper reference(p, ref_plan, c.base_cells);
    const TimeGrid grid = TimeGrid::uniform({0.0, p.horizon}, c.base_cells);
    const std::size_t levels = c.steps.size();
    Eigen::MatrixXd sq(static_cast<Eigen::Index>(levels), c.paths);
    const RandomStream root(c.seed);
    parallel_for(static_cast<std::size_t>(c.paths), c.threads, [&](std::size_t k) {
        RandomStream stream = root.substream(k);
        const BrownianGridPath path = sample_grid_path(stream, p.m, grid);
        const Eigen::VectorXd y_ref = reference.run(path);
        for (std::size_t l = 0; l < levels; ++l)
            sq(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = (steppers[l].run(path) - y_ref).squaredNorm();
    });
    OrderReport r;
    std::vector<double> xs, ys;
    for (std::size_t l = 0; l < levels; ++l) {
        double s1 = 0.0, s2 = 0.0;
        for (int k = 0; k < c.paths; ++k) {
            const double v = sq(static_cast<Eigen::Index>(l), k);
            s1 += v;
            s2 += v * v;
        }
        const double mean = s1 / c.paths;
        const double var = std::max(0.0, (s2 / c.paths - mean * mean) / (c.paths - 1.0));
        const double err = std::sqrt(mean);
        const double delta = p.horizon / c.steps[l];
        r.rows.push_back({c.steps[l], delta, qs[l], err, err > 0.0 ? std::sqrt(var) / (2.0 * err) : 0.0});
        xs.push_back(delta);
        ys.push_back(err);
    }
    r.slope = fit_loglog_slope(xs, ys);
    return r;
}

} // namespace stochint
