#pragma once

// Traction-control laws as pure step functions: model following control
// (MFC), slip ratio control (SRC) and maximum transmissible torque
// estimation (MTTE). Each law exposes the hook through which the acoustic
// road estimate is injected.

#include <tcsim/error.hpp>
#include <tcsim/tire_road.hpp>
#include <tcsim/vehicle_plant.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

namespace tcsim {

enum class ControllerKind { MFC, SRC, MTTE };

inline constexpr std::array<ControllerKind, 3> kAllControllers = {ControllerKind::MFC, ControllerKind::SRC,
                                                                  ControllerKind::MTTE};

constexpr std::string_view to_string(ControllerKind k) noexcept {
    switch (k) {
        case ControllerKind::MFC: return "MFC";
        case ControllerKind::SRC: return "SRC";
        case ControllerKind::MTTE: return "MTTE";
    }
    return "?";
}

inline std::optional<ControllerKind> parse_controller(std::string_view name) {
    std::string upper(name);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    for (auto k : kAllControllers)
        if (upper == to_string(k)) return k;
    return std::nullopt;
}

/// Result of a guarded state update. A rejected update returns the input
/// state untouched with `accepted == false`.
template <typename State>
struct Guarded {
    State state;
    bool accepted = true;
};

template <typename State>
struct StepResult {
    double torque = 0.0;
    State state;
};

// ---------------------------------------------------------------------------
// MFC

struct MfcState {
    double w_model = 0.0;
    double e_prev = 0.0;     // high-pass filter input memory
    double y_prev = 0.0;     // high-pass filter output memory
    double J_model = 0.0;
    double K_gain = 50.0;
};

struct MfcConfig {
    double K_gain = 50.0;
    // Slip assumed by the reference model when no road estimate is available.
    double preset_slip = 0.0;
};

inline MfcState mfc_init(const VehicleParams& p, const MfcConfig& cfg = {}, double w0 = 0.0) {
    MfcState st;
    st.w_model = w0;
    st.J_model = p.Jw + p.M * p.r * p.r * (1.0 - cfg.preset_slip);
    st.K_gain = cfg.K_gain;
    return st;
}

inline void check_invariants(const MfcState& st, const VehicleParams& p) {
    if (!(st.J_model >= p.Jw && st.J_model <= p.nominal_inertia() * (1.0 + 1e-12)))
        throw ConfigError("MFC model inertia outside [Jw, Jw + M r^2]");
    if (!(st.K_gain > 0.0)) throw ConfigError("MFC feedback gain must be positive");
}

/// One MFC step. The reference model is a rigid vehicle of inertia
/// J_model driven by the demand against the driving resistance; the
/// wheel-speed error passes a bilinear high-pass tau2 s / (tau2 s + 1)
/// and is fed back through K_gain.
inline StepResult<MfcState> mfc_step(const MfcState& st, double T_dem, double w, const VehicleParams& p, double dt) {
    check_invariants(st, p);
    MfcState next = st;
    const double resist = p.r * driving_resistance(p.r * st.w_model, p);
    const double net = T_dem - resist;
    const double accel = (st.w_model <= 0.0 && net < 0.0) ? 0.0 : net / st.J_model;
    next.w_model = std::max(st.w_model + accel * dt, 0.0);

    const double e = w - next.w_model;
    const double c = 2.0 * p.tau2 / dt;
    const double y = ((c - 1.0) * st.y_prev + c * (e - st.e_prev)) / (c + 1.0);
    next.e_prev = e;
    next.y_prev = y;
    const double torque = std::clamp(T_dem - st.K_gain * y, 0.0, p.torque_limit);
    return {torque, next};
}

/// Model inertia follows the slip estimate: J = Jw + M r^2 (1 - lambda).
inline Guarded<MfcState> mfc_update_inertia(const MfcState& st, double lambda_est, const VehicleParams& p) {
    if (!(lambda_est >= 0.0 && lambda_est <= 1.0)) return {st, false};
    MfcState next = st;
    next.J_model = p.Jw + p.M * p.r * p.r * (1.0 - lambda_est);
    return {next, true};
}

// ---------------------------------------------------------------------------
// SRC

struct SrcState {
    double lambda_ref = 0.1;
    double integ = 0.0;
    double kp = 500.0;
    double ki = 2000.0;
    double T_sat = 300.0;
};

inline void check_invariants(const SrcState& st) {
    if (!(st.lambda_ref > 0.0 && st.lambda_ref < 0.5)) throw ConfigError("SRC reference slip outside (0, 0.5)");
    if (!(st.T_sat > 0.0) || st.kp < 0.0 || st.ki < 0.0) throw ConfigError("SRC gains must be non-negative");
}

/// PI slip tracking below the (saturated) demand:
/// T = clamp(base + kp e + integ, 0, base), base = min(T_dem, T_sat),
/// e = lambda_ref - lambda_meas. Conditional integration: while the output
/// is pinned at a bound the integrator only moves far enough to land the
/// output exactly on that bound, or back into range.
inline StepResult<SrcState> src_step(const SrcState& st, double T_dem, double lambda_meas, double dt) {
    check_invariants(st);
    SrcState next = st;
    const double base = std::clamp(T_dem, 0.0, st.T_sat);
    const double e = st.lambda_ref - lambda_meas;
    const double p_path = base + st.kp * e;
    const double candidate = st.integ + st.ki * e * dt;
    if (p_path + candidate > base && e >= 0.0)
        next.integ = std::min(candidate, std::max(st.integ, base - p_path));
    else if (p_path + candidate < 0.0 && e <= 0.0)
        next.integ = std::max(candidate, std::min(st.integ, -p_path));
    else
        next.integ = candidate;
    const double torque = std::clamp(p_path + next.integ, 0.0, base);
    return {torque, next};
}

inline Guarded<SrcState> src_set_reference(const SrcState& st, double lambda_opt) {
    if (!(lambda_opt > 0.0 && lambda_opt < 0.5)) return {st, false};
    SrcState next = st;
    next.lambda_ref = lambda_opt;
    return {next, true};
}

// ---------------------------------------------------------------------------
// MTTE

struct MtteState {
    double fd_hat = 0.0;
    double w_prev = 0.0;
    double alpha = 0.4;
    bool primed = false;  // w_prev holds a real sample
};

struct MtteConfig {
    double alpha = 0.4;          // relaxation factor without road information
    double T_floor = 10.0;       // launch torque when the observer reads ~0, N m
    double mass_share = 0.25;    // chassis mass seen by the driven wheel, fraction of M
    std::array<double, kRoadCount> alpha_schedule = {0.95, 0.80, 0.90, 0.85};  // asphalt, snow, stone, gravel
};

inline void check_invariants(const MtteState& st) {
    if (!(st.alpha > 0.0 && st.alpha <= 1.0)) throw ConfigError("MTTE relaxation factor outside (0, 1]");
    if (!std::isfinite(st.fd_hat)) throw ConfigError("MTTE force estimate is not finite");
}

/// Driving-force observer: F = (T - Jw dw/dt) / r with a backward
/// difference for dw/dt, smoothed through a tau1 low-pass.
inline MtteState driving_force_observer(const MtteState& st, double T_applied, double w, const VehicleParams& p,
                                        double dt) {
    MtteState next = st;
    const double w_dot = st.primed ? (w - st.w_prev) / dt : 0.0;
    const double raw = (T_applied - p.Jw * w_dot) / p.r;
    next.fd_hat = first_order_lag(st.fd_hat, raw, p.tau1, dt);
    next.w_prev = w;
    next.primed = true;
    return next;
}

/// Largest torque that keeps chassis/wheel acceleration ratio >= alpha:
/// (Jw / (alpha M_q r^2) + 1) r F_d.
inline double max_transmissible_torque(double fd_hat, double alpha, const VehicleParams& p, double mass_share) {
    const double Mq = p.M * mass_share;
    return (p.Jw / (alpha * Mq * p.r * p.r) + 1.0) * p.r * fd_hat;
}

inline StepResult<MtteState> mtte_step(const MtteState& st, double T_dem, double T_applied_prev, double w,
                                       const VehicleParams& p, double dt, const MtteConfig& cfg = {}) {
    check_invariants(st);
    MtteState next = driving_force_observer(st, T_applied_prev, w, p, dt);
    const double t_max = max_transmissible_torque(next.fd_hat, next.alpha, p, cfg.mass_share);
    const double bound = std::min(std::max(t_max, cfg.T_floor), p.torque_limit);
    return {std::clamp(T_dem, 0.0, bound), next};
}

inline MtteState mtte_update_alpha(const MtteState& st, RoadType road, const MtteConfig& cfg = {}) {
    MtteState next = st;
    next.alpha = cfg.alpha_schedule[index_of(road)];
    return next;
}

}  // namespace tcsim
