#include "cubicon/dynamics.hpp"
#include "cubicon/errors.hpp"
#include "cubicon/expression.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace cubicon {

namespace {

// Dormand-Prince 5(4) coefficients.  The 5th-order solution is propagated
// (local extrapolation) and the embedded 4th-order difference drives the
// step controller.
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                 A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247,
                 A64 = 49.0 / 176, A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192,
                 B5 = -2187.0 / 6784, B6 = 11.0 / 84;
constexpr double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920,
                 E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40;

constexpr double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9;

// The controller aims an order of magnitude below the requested tolerance:
// the step estimate bounds the embedded 4th-order error while the 5th-order
// solution is propagated, and the slack keeps accumulated drift over long
// horizons within a few multiples of tol.
constexpr double kErrTarget = 0.1;

double sq_norm(const double* x, int n) {
    double s = 0;
    for (int i = 0; i < n; ++i) s += x[i] * x[i];
    return s;
}

constexpr int kMaxDim = 16;

struct Stepper {
    const ParametrizedFlow& flow;
    double lambda;
    int n;
    bool reversed;
    // fixed-size workspaces keep the step loop free of heap traffic
    double k1[kMaxDim], k2[kMaxDim], k3[kMaxDim], k4[kMaxDim], k5[kMaxDim],
        k6[kMaxDim], k7[kMaxDim], ytmp[kMaxDim], y5[kMaxDim];

    Stepper(const ParametrizedFlow& f, double lam, bool rev)
        : flow(f), lambda(lam), n(f.dim), reversed(rev) {
        if (n < 1 || n > kMaxDim)
            throw ConfigError("flow dimension must be between 1 and 16");
    }

    void deriv(const double* y, double* out) {
        flow.eval(y, lambda, out);
        if (reversed)
            for (int i = 0; i < n; ++i) out[i] = -out[i];
        for (int i = 0; i < n; ++i)
            if (!std::isfinite(out[i]))
                throw NonFiniteState("vector field returned a non-finite value");
    }

    // One trial step of size h from y (k1 already holds f(y)).  On output
    // y5 holds the 5th-order result, k7 holds f(y5), returns the scaled
    // error estimate.
    double try_step(const double* y, double h, double tol) {
        for (int i = 0; i < n; ++i) ytmp[i] = y[i] + h * A21 * k1[i];
        deriv(ytmp, k2);
        for (int i = 0; i < n; ++i) ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        deriv(ytmp, k3);
        for (int i = 0; i < n; ++i) ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        deriv(ytmp, k4);
        for (int i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        deriv(ytmp, k5);
        for (int i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        deriv(ytmp, k6);
        for (int i = 0; i < n; ++i)
            y5[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        deriv(y5, k7);

        double err = 0;
        for (int i = 0; i < n; ++i) {
            double e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            double sc = tol * (1.0 + std::max(std::abs(y[i]), std::abs(y5[i])));
            double q = e / sc;
            err += q * q;
        }
        return std::sqrt(err / n);
    }
};

double initial_step(const double* y, const double* f, int n, double span) {
    double ny = std::sqrt(sq_norm(y, n));
    double nf = std::sqrt(sq_norm(f, n));
    double h = 0.01 * (1.0 + ny) / (1.0 + nf);
    return std::min(h, span);
}

// Shared integration driver.  on_sample is called after each accepted step
// with the internal elapsed time s in [0, span]; it may be null.
template <class SampleFn>
bool drive(Stepper& st, std::vector<double>& y, double span, double esc_radius_sq,
           const IntegrateOptions& opts, double* escape_s, SampleFn&& on_sample) {
    const int n = st.n;
    st.deriv(y.data(), st.k1);
    double s = 0;
    double h = initial_step(y.data(), st.k1, n, span);
    long steps = 0;
    const bool has_stop = opts.stop_hi >= 0;
    const double stop_lo_sq = has_stop && opts.stop_lo > 0 ? opts.stop_lo * opts.stop_lo : 0;
    const double stop_hi_sq = has_stop ? opts.stop_hi * opts.stop_hi : 0;
    while (s < span) {
        if (h < opts.min_step)
            throw StepUnderflow("adaptive step fell below minimum step size");
        if (++steps > opts.max_steps)
            throw Error("integration exceeded maximum step count");
        bool clipped = false;
        if (s + h >= span) { h = span - s; clipped = true; }
        double err = st.try_step(y.data(), h, opts.tol);
        if (err <= kErrTarget) {
            s += h;
            std::memcpy(y.data(), st.y5, sizeof(double) * n);
            std::memcpy(st.k1, st.k7, sizeof(double) * n); // FSAL
            on_sample(s, y);
            double r2 = sq_norm(y.data(), n);
            if (esc_radius_sq > 0 && r2 >= esc_radius_sq) {
                if (escape_s) *escape_s = s;
                return false;
            }
            if (has_stop && (r2 > stop_hi_sq || r2 < stop_lo_sq)) {
                if (escape_s) *escape_s = s;
                return false;
            }
            double fac = 0.9 * std::pow(std::max(err, 1e-12) / kErrTarget, -0.2);
            h *= std::clamp(fac, 0.2, 5.0);
        } else {
            double fac = 0.9 * std::pow(err / kErrTarget, -0.2);
            h *= std::clamp(fac, 0.2, 0.9);
            if (clipped && h <= 0)
                throw StepUnderflow("step collapsed at interval end");
        }
    }
    return true;
}

void check_x0(const std::vector<double>& x0, int dim) {
    if (static_cast<int>(x0.size()) != dim)
        throw ConfigError("initial state dimension mismatch");
    for (double v : x0)
        if (!std::isfinite(v))
            throw NonFiniteState("initial state is not finite");
}

} // namespace

Trajectory integrate(const ParametrizedFlow& flow, double lambda,
                     const std::vector<double>& x0, double t_end,
                     const EscapePolicy& policy, const IntegrateOptions& opts) {
    check_x0(x0, flow.dim);
    if (opts.tol <= 0)
        throw ConfigError("integration tolerance must be positive");
    const bool backward = t_end < 0;
    const double span = std::abs(t_end);
    const double esc_sq = policy.radius > 0 ? policy.radius * policy.radius : 0.0;

    Stepper st(flow, lambda, backward);
    std::vector<double> y = x0;
    Trajectory traj;
    traj.samples.push_back({0.0, y});

    double escape_s = 0;
    bool finished = true;
    if (span > 0) {
        finished = drive(st, y, span, esc_sq, opts, &escape_s,
                         [&](double s, const std::vector<double>& yy) {
                             traj.samples.push_back({backward ? -s : s, yy});
                         });
    }
    if (!finished) {
        traj.escaped = true;
        traj.escape_time = backward ? -escape_s : escape_s;
    }
    if (backward)
        std::reverse(traj.samples.begin(), traj.samples.end());
    return traj;
}

bool integrate_endpoint(const ParametrizedFlow& flow, double lambda,
                        const double* x0, double t_end,
                        const EscapePolicy& policy, const IntegrateOptions& opts,
                        double* out) {
    const bool backward = t_end < 0;
    const double span = std::abs(t_end);
    const double esc_sq = policy.radius > 0 ? policy.radius * policy.radius : 0.0;

    thread_local std::unique_ptr<Stepper> st;
    thread_local const ParametrizedFlow* st_flow = nullptr;
    thread_local double st_lambda = 0;
    thread_local bool st_rev = false;
    if (!st || st_flow != &flow || st_lambda != lambda || st_rev != backward) {
        st = std::make_unique<Stepper>(flow, lambda, backward);
        st_flow = &flow;
        st_lambda = lambda;
        st_rev = backward;
    }

    thread_local std::vector<double> y;
    y.assign(x0, x0 + flow.dim);
    bool finished = span == 0 ? true
                              : drive(*st, y, span, esc_sq, opts, nullptr,
                                      [](double, const std::vector<double>&) {});
    std::memcpy(out, y.data(), sizeof(double) * flow.dim);
    return finished;
}

ParametrizedFlow reverse_flow(const ParametrizedFlow& flow) {
    ParametrizedFlow r = flow;
    auto inner = flow.eval;
    int n = flow.dim;
    r.eval = [inner, n](const double* x, double lam, double* out) {
        inner(x, lam, out);
        for (int i = 0; i < n; ++i) out[i] = -out[i];
    };
    r.name = flow.name + "_reversed";
    return r;
}

ParametrizedFlow builtin_eqn1() {
    ParametrizedFlow f;
    f.dim = 2;
    f.name = "eqn1";
    f.param_range = {0.0, 1.0};
    // dr/dt = -r^3 (1/r - lambda)^2 = -r (1 - lambda r)^2, dtheta/dt = 1.
    // Cartesian form: dx/dt = -x (1 - lambda r)^2 - y,
    //                 dy/dt = -y (1 - lambda r)^2 + x, continuous at r = 0.
    f.eval = [](const double* x, double lam, double* out) {
        double r = std::sqrt(x[0] * x[0] + x[1] * x[1]);
        double s = 1.0 - lam * r;
        double c = s * s;
        out[0] = -x[0] * c - x[1];
        out[1] = -x[1] * c + x[0];
    };
    return f;
}

ParametrizedFlow builtin_lorenz(const LorenzParams& p) {
    ParametrizedFlow f;
    f.dim = 3;
    f.name = "lorenz";
    f.param_range = {0.0, 1.0};
    double sigma = p.sigma, b = p.b, c = p.r_min, d = p.r_max;
    f.eval = [sigma, b, c, d](const double* x, double lam, double* out) {
        double r = c + lam * (d - c);
        out[0] = sigma * (x[1] - x[0]);
        out[1] = r * x[0] - x[1] - x[0] * x[2];
        out[2] = x[0] * x[1] - b * x[2];
    };
    return f;
}

double lorenz_lyapunov(const double* s, double sigma, double r) {
    double dz = s[2] - 2.0 * r;
    return r * s[0] * s[0] + sigma * s[1] * s[1] + sigma * dz * dz;
}

namespace {

// dV/dt = -2 sigma (r x^2 + y^2 + b (z - r)^2 - b r^2).
double lorenz_lyapunov_rate(const double* s, double sigma, double b, double r) {
    double dz = s[2] - r;
    return -2.0 * sigma * (r * s[0] * s[0] + s[1] * s[1] + b * dz * dz - b * r * r);
}

// Max of |p| over the axis-aligned ellipsoid u^2/su^2 + v^2/sv^2 = 1 in a
// plane through the origin where the v-axis is offset by center c:
// maximize u^2 + (c + w)^2 with (u/su)^2 + (w/sv)^2 = 1.
double plane_max_sq(double su, double sv, double c) {
    double best = (std::abs(c) + sv) * (std::abs(c) + sv); // u = 0 endpoints
    if (su > sv) {
        // interior stationary point of f(w) = su^2 (1 - w^2/sv^2) + (c+w)^2
        double denom = su * su - sv * sv;
        double w = c * sv * sv / denom;
        if (std::abs(w) <= sv) {
            double u2 = su * su * (1.0 - w * w / (sv * sv));
            best = std::max(best, u2 + (c + w) * (c + w));
        }
    }
    return best;
}

} // namespace

double lorenz_trapping_radius(double sigma, double b, double r, int validation_samples) {
    if (sigma <= 0 || b <= 0 || r <= 0)
        throw ConfigError("lorenz_trapping_radius requires positive sigma, b, r");
    // dV/dt >= 0 exactly on E = { r x^2 + y^2 + b (z-r)^2 <= b r^2 }:
    // semiaxes sx = sqrt(b r), sy = sqrt(b) r, sz = r, center (0, 0, r).
    double sx = std::sqrt(b * r), sy = std::sqrt(b) * r, sz = r;
    double rho_sq = std::max(plane_max_sq(sy, sz, r), plane_max_sq(sx, sz, r));
    rho_sq = std::max(rho_sq, 4.0 * r * r);
    double rho = std::sqrt(rho_sq);

    // Validate on a deterministic Fibonacci sphere of radius 1.01 rho.
    double R = 1.01 * rho;
    const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
    for (int i = 0; i < validation_samples; ++i) {
        double z = 1.0 - 2.0 * (i + 0.5) / validation_samples;
        double phi = 2.0 * 3.14159265358979323846 * std::fmod(i / golden, 1.0);
        double rr = std::sqrt(std::max(0.0, 1.0 - z * z));
        double p[3] = {R * rr * std::cos(phi), R * rr * std::sin(phi), R * z};
        if (lorenz_lyapunov_rate(p, sigma, b, r) >= 0)
            throw ValidationFailed("dV/dt >= 0 on the inflated trapping sphere");
    }
    return rho;
}

std::vector<std::pair<double, double>> lorenz_trapping_box(double sigma, double b,
                                                           double r, double margin) {
    if (margin < 1.0)
        throw ConfigError("trapping box margin must be >= 1");
    // Largest V-value attained on E (see above); every sublevel {V <= c}
    // with c >= c_star is forward invariant.
    double sx = std::sqrt(b * r), sy = std::sqrt(b) * r, sz = r;
    // Dense deterministic sampling of V on the boundary of E (a smooth
    // compact surface; 2e5 samples give c_star to ample accuracy and the
    // margin absorbs the sampling slack).
    double c_star = 0.0;
    const int NU = 400, NV = 500;
    for (int i = 0; i < NU; ++i) {
        double u = 3.14159265358979323846 * (i + 0.5) / NU; // polar angle
        for (int j = 0; j < NV; ++j) {
            double v = 2.0 * 3.14159265358979323846 * j / NV;
            double p[3] = {sx * std::sin(u) * std::cos(v),
                           sy * std::sin(u) * std::sin(v),
                           r + sz * std::cos(u)};
            c_star = std::max(c_star, lorenz_lyapunov(p, sigma, r));
        }
    }
    c_star *= margin * margin;
    double ex = std::sqrt(c_star / r), ey = std::sqrt(c_star / sigma);
    return {{-ex, ex}, {-ey, ey}, {2.0 * r - ey, 2.0 * r + ey}};
}

ParametrizedFlow flow_from_expression_text(const std::string& text) {
    auto field = std::make_shared<ExpressionField>(ExpressionField::parse_text(text));
    ParametrizedFlow f;
    f.dim = field->dim();
    f.name = "expression";
    f.eval = [field](const double* x, double lam, double* out) {
        field->eval(x, lam, out);
    };
    return f;
}

ParametrizedFlow flow_from_expression_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open vector field file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    ParametrizedFlow f = flow_from_expression_text(ss.str());
    f.name = path;
    return f;
}

} // namespace cubicon
