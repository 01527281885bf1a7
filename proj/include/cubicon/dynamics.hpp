#ifndef CUBICON_DYNAMICS_HPP
#define CUBICON_DYNAMICS_HPP

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cubicon {

// A parametrized vector field family f(x, lambda) on R^n.  eval must be a
// pure function: identical inputs give bit-identical outputs.
struct ParametrizedFlow {
    int dim = 0;
    std::function<void(const double* x, double lambda, double* out)> eval;
    std::pair<double, double> param_range{0.0, 1.0};
    std::optional<double> lipschitz_hint;
    std::string name;
};

// Leaving the ball of radius `radius` is treated as reaching infinity.
struct EscapePolicy {
    double radius = 0.0;
};

struct TrajectorySample {
    double t;
    std::vector<double> state;
};

// Numerical orbit segment.  Samples are stored in ascending physical time;
// for backward runs the escape (if any) therefore happens at the first sample.
struct Trajectory {
    std::vector<TrajectorySample> samples;
    bool escaped = false;
    std::optional<double> escape_time;

    const std::vector<double>& initial_state() const { return samples.front().state; }
    // State at the end of the integration run (most negative time for
    // backward runs, largest time for forward runs).
    const TrajectorySample& integration_end(double t_end) const {
        return t_end < 0 ? samples.front() : samples.back();
    }
};

struct IntegrateOptions {
    double tol = 1e-8;
    double min_step = 1e-12;
    long max_steps = 50'000'000;
    // When stop_hi >= 0, integration also halts (reported like an escape)
    // once the iterate's norm leaves [stop_lo, stop_hi].
    double stop_lo = -1.0;
    double stop_hi = -1.0;
};

// Adaptive embedded Runge-Kutta 4(5) integration of flow at parameter lambda
// from x0 until |t| reaches |t_end| or the iterate leaves the escape ball.
// Negative t_end integrates the reverse flow.
Trajectory integrate(const ParametrizedFlow& flow, double lambda,
                     const std::vector<double>& x0, double t_end,
                     const EscapePolicy& policy, const IntegrateOptions& opts = {});

// Endpoint-only variant used by the grid machinery: no sample recording.
// Returns false if the iterate escaped (out holds the escaping state).
bool integrate_endpoint(const ParametrizedFlow& flow, double lambda,
                        const double* x0, double t_end,
                        const EscapePolicy& policy, const IntegrateOptions& opts,
                        double* out);

// The flow with its velocity field negated.
ParametrizedFlow reverse_flow(const ParametrizedFlow& flow);

// Planar family: in polar coordinates dr/dt = -r^3 (1/r - lambda)^2,
// dtheta/dt = 1, written in Cartesian coordinates (smooth at the origin).
// For lambda > 0 the circle of radius 1/lambda is invariant.
ParametrizedFlow builtin_eqn1();

struct LorenzParams {
    double sigma = 10.0;
    double b = 8.0 / 3.0;
    double r_min = 20.0;
    double r_max = 28.0;
};

// Lorenz family; lambda in [0,1] maps affinely onto r in [r_min, r_max].
ParametrizedFlow builtin_lorenz(const LorenzParams& p = {});

// Lyapunov function V = r x^2 + sigma y^2 + sigma (z - 2r)^2 for the Lorenz
// system with fixed sigma.
double lorenz_lyapunov(const double* state, double sigma, double r);

// Radius rho(r) such that dV/dt < 0 outside the ball of radius rho,
// obtained by maximizing |p| over the ellipsoid where dV/dt >= 0 and
// validated by dense sampling of dV/dt on the sphere of radius 1.01 rho.
// Throws ValidationFailed if any sampled point has dV/dt >= 0.
double lorenz_trapping_radius(double sigma, double b, double r,
                              int validation_samples = 20000);

struct Box; // grid.hpp

// Axis-aligned bounding box of an invariant sublevel set of V, inflated by
// `margin` (>= 1).  Every orbit eventually enters it, which makes it a
// candidate trapping box for grid analysis.
std::vector<std::pair<double, double>> lorenz_trapping_box(double sigma, double b,
                                                           double r, double margin = 1.15);

// Vector field loaded from an expression file (one component per line).
ParametrizedFlow flow_from_expression_file(const std::string& path);
ParametrizedFlow flow_from_expression_text(const std::string& text);

} // namespace cubicon

#endif
