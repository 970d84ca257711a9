#pragma once

// Single-wheel longitudinal EV plant: wheel spin, chassis translation,
// first-order motor lag and driving resistance.

#include <tcsim/error.hpp>
#include <tcsim/format.hpp>
#include <tcsim/tire_road.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace tcsim {

struct VehicleParams {
    double Jw = 0.6;        // wheel + shaft inertia, kg m^2
    double r = 0.28;        // tire radius, m
    double M = 1400.0;      // vehicle mass, kg
    double m = 10.0;        // wheel mass, kg
    double tau1 = 0.05;     // motor lag / observer filter time constant, s
    double tau2 = 1000.0;   // MFC high-pass time constant, s
    double g = 9.81;        // m/s^2
    double mu_roll = 0.015; // rolling resistance coefficient
    double cda = 0.6;       // lumped drag area coefficient
    double rho_air = 1.2;   // kg/m^3
    double torque_limit = 700.0;  // |T_applied| bound, N m
    // Fraction of the vehicle (mass and resistance) carried by the driven
    // wheel in the quarter-vehicle abstraction.
    double chassis_share = 0.25;

    /// Chassis-equivalent inertia at zero slip.
    double nominal_inertia() const noexcept { return Jw + M * r * r; }
    /// Normal load carried by the driven wheel.
    double normal_load() const noexcept { return (M / 4.0 + m) * g; }
    /// Chassis mass accelerated by the driven wheel.
    double chassis_mass() const noexcept { return M * chassis_share; }
};

inline void validate(const VehicleParams& p) {
    const bool positive = p.Jw > 0 && p.r > 0 && p.M > 0 && p.m > 0 && p.tau1 > 0 && p.tau2 > 0 && p.g > 0 &&
                          p.torque_limit > 0 && p.chassis_share > 0 && p.chassis_share <= 1;
    // Resistance coefficients may be zero to isolate the tire force in tests.
    const bool non_negative = p.mu_roll >= 0 && p.cda >= 0 && p.rho_air >= 0;
    if (!positive || !non_negative) throw ConfigError("vehicle parameters must be positive");
}

struct SimState {
    double t = 0.0;         // s
    double V = 0.0;         // chassis speed, m/s
    double w = 0.0;         // wheel angular speed, rad/s
    double T_actual = 0.0;  // motor torque after lag, N m
};

inline constexpr double kSlipSpeedFloor = 0.1;  // m/s

/// (Vw - V) / max(Vw, V, 0.1), clamped to [-1, 1].
inline double slip_ratio(double V, double Vw) noexcept {
    const double denom = std::max({Vw, V, kSlipSpeedFloor});
    return std::clamp((Vw - V) / denom, -1.0, 1.0);
}

/// Rolling plus aerodynamic resistance, N.
inline double driving_resistance(double V, const VehicleParams& p) noexcept {
    return p.mu_roll * p.M * p.g + 0.5 * p.rho_air * p.cda * V * V;
}

/// Exact zero-order-hold discretization of x' = (u - x) / tau.
inline double first_order_lag(double x, double u, double tau, double dt) {
    if (!(tau > 0.0) || !(dt > 0.0)) throw ConfigError("first_order_lag: tau and dt must be positive");
    if (dt > tau / 5.0) throw ConfigError("first_order_lag: dt must not exceed tau/5");
    return x + (1.0 - std::exp(-dt / tau)) * (u - x);
}

inline constexpr double kMaxPlantStep = 5e-3;

namespace detail {

struct Derivative {
    double dw;
    double dV;
};

inline Derivative wheel_chassis_rates(double w, double V, double torque, const MuLambdaCurve& curve,
                                      const VehicleParams& p) noexcept {
    const double lambda = slip_ratio(V, p.r * w);
    const double Fd = mu(curve, lambda) * p.normal_load();
    const double net = Fd - p.chassis_share * driving_resistance(V, p);
    const double dV = (V <= 0.0 && net < 0.0) ? 0.0 : net / p.chassis_mass();
    return {(torque - p.r * Fd) / p.Jw, dV};
}

// Local stiffness of the slip dynamics, 1/s. The slip ratio gain is
// 1/max(Vw, V, floor), so the wheel mode gets stiff near standstill.
inline double slip_stiffness(double w, double V, const MuLambdaCurve& curve, const VehicleParams& p) noexcept {
    const double speed = std::max({p.r * w, V, kSlipSpeedFloor});
    const double lambda = slip_ratio(V, p.r * w);
    const double slope = std::max(std::abs(mu_slope(curve, lambda)), std::abs(mu_slope(curve, 0.0)));
    return p.r * p.r * p.normal_load() * slope / (speed * p.Jw);
}

}  // namespace detail

/// Advances the plant by `dt`. The commanded torque passes the motor lag,
/// then wheel and chassis speeds are integrated with RK4 holding the
/// applied torque. Substeps keep h * stiffness <= 0.5.
inline SimState plant_step(const SimState& s, double T_cmd, const MuLambdaCurve& curve, const VehicleParams& p,
                           double dt) {
    if (!(dt > 0.0 && dt <= kMaxPlantStep)) throw ConfigError("plant_step: dt must lie in (0, 5 ms]");
    SimState next = s;
    const double cmd = std::clamp(T_cmd, -p.torque_limit, p.torque_limit);
    next.T_actual = std::clamp(first_order_lag(s.T_actual, cmd, p.tau1, dt), -p.torque_limit, p.torque_limit);

    const double stiff = detail::slip_stiffness(s.w, s.V, curve, p);
    const int substeps = std::clamp(static_cast<int>(std::ceil(dt * stiff / 0.5)), 1, 4000);
    const double h = dt / substeps;
    double w = s.w;
    double V = s.V;
    const double T = next.T_actual;
    for (int i = 0; i < substeps; ++i) {
        const auto k1 = detail::wheel_chassis_rates(w, V, T, curve, p);
        const auto k2 = detail::wheel_chassis_rates(w + 0.5 * h * k1.dw, V + 0.5 * h * k1.dV, T, curve, p);
        const auto k3 = detail::wheel_chassis_rates(w + 0.5 * h * k2.dw, V + 0.5 * h * k2.dV, T, curve, p);
        const auto k4 = detail::wheel_chassis_rates(w + h * k3.dw, V + h * k3.dV, T, curve, p);
        w += h / 6.0 * (k1.dw + 2.0 * k2.dw + 2.0 * k3.dw + k4.dw);
        V += h / 6.0 * (k1.dV + 2.0 * k2.dV + 2.0 * k3.dV + k4.dV);
        V = std::max(V, 0.0);
    }
    next.w = w;
    next.V = V;
    next.t = s.t + dt;
    if (!std::isfinite(next.w) || !std::isfinite(next.V) || !std::isfinite(next.T_actual))
        throw DivergenceError("plant state became non-finite", std::lround(s.t / dt), s.t);
    return next;
}

inline SimState plant_step(const SimState& s, double T_cmd, RoadType road, const VehicleParams& p, double dt,
                           const CurveSet& curves = default_curves()) {
    return plant_step(s, T_cmd, curves.curve(road), p, dt);
}

struct TraceRow {
    double t = 0.0;
    double V = 0.0;
    double Vw = 0.0;
    double lambda = 0.0;
    double T_cmd = 0.0;
    double T_applied = 0.0;
    double mu = 0.0;
    RoadType road_true = RoadType::Asphalt;
    std::optional<RoadType> road_est;  // empty while no road estimate is in use
};

/// Time series of one run. Row k describes the interval [t_k, t_k + dt):
/// the state at t_k, the command issued for the interval and the torque
/// the motor delivered over it.
struct SimTrace {
    double dt = 1e-3;
    std::vector<TraceRow> rows;

    double duration() const noexcept { return dt * static_cast<double>(rows.size()); }
};

inline constexpr const char* kTraceHeader = "t,V,Vw,lambda,T_cmd,T_applied,mu,road_true,road_est";

inline void write_trace_csv(std::ostream& out, const SimTrace& trace) {
    out << kTraceHeader << '\n';
    for (const auto& r : trace.rows) {
        out << format_g9(r.t) << ',' << format_g9(r.V) << ',' << format_g9(r.Vw) << ',' << format_g9(r.lambda) << ','
            << format_g9(r.T_cmd) << ',' << format_g9(r.T_applied) << ',' << format_g9(r.mu) << ','
            << to_string(r.road_true) << ',' << (r.road_est ? to_string(*r.road_est) : std::string_view("none")) << '\n';
    }
}

}  // namespace tcsim
