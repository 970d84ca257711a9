#pragma once

// SISO transfer functions, the MTTE disturbance sensitivity T_zw, the
// Vinnicombe nu-gap on a frequency grid, and the linearized closed-loop
// plant families compared with and without road information.

#include <tcsim/controllers.hpp>
#include <tcsim/error.hpp>
#include <tcsim/tire_road.hpp>
#include <tcsim/vehicle_plant.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

namespace tcsim {

using Poly = std::vector<double>;  // descending powers of s

inline Poly poly_trim(Poly p) {
    std::size_t lead = 0;
    while (lead + 1 < p.size() && p[lead] == 0.0) ++lead;
    p.erase(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(lead));
    if (p.empty()) p.push_back(0.0);
    return p;
}

inline Poly poly_mul(const Poly& a, const Poly& b) {
    Poly c(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
    return c;
}

inline Poly poly_add(const Poly& a, const Poly& b) {
    Poly c(std::max(a.size(), b.size()), 0.0);
    const std::size_t oa = c.size() - a.size();
    const std::size_t ob = c.size() - b.size();
    for (std::size_t i = 0; i < a.size(); ++i) c[oa + i] += a[i];
    for (std::size_t i = 0; i < b.size(); ++i) c[ob + i] += b[i];
    return c;
}

inline Poly poly_scale(Poly a, double k) {
    for (auto& v : a) v *= k;
    return a;
}

inline std::complex<double> poly_eval(const Poly& p, std::complex<double> s) {
    std::complex<double> acc = 0.0;
    for (double c : p) acc = acc * s + c;
    return acc;
}

/// Roots through the eigenvalues of the companion matrix.
inline std::vector<std::complex<double>> poly_roots(const Poly& p_in) {
    const Poly p = poly_trim(p_in);
    const auto n = static_cast<Eigen::Index>(p.size()) - 1;
    if (n <= 0) return {};
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) comp(0, j) = -p[static_cast<std::size_t>(j + 1)] / p[0];
    for (Eigen::Index i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    std::vector<std::complex<double>> roots;
    for (Eigen::Index i = 0; i < n; ++i) roots.push_back(es.eigenvalues()[i]);
    return roots;
}

struct TransferFunction {
    Poly num{0.0};
    Poly den{1.0};

    TransferFunction() = default;
    TransferFunction(Poly n, Poly d) : num(poly_trim(std::move(n))), den(poly_trim(std::move(d))) {
        if (den.front() == 0.0) throw NumericError("transfer function denominator is zero");
    }

    std::size_t num_degree() const noexcept { return num.size() - 1; }
    std::size_t den_degree() const noexcept { return den.size() - 1; }
    bool proper() const noexcept { return num_degree() <= den_degree(); }
};

inline TransferFunction constant_tf(double k) { return {{k}, {1.0}}; }

/// P / (1 + C P) for plant P and feedback controller C.
inline TransferFunction feedback(const TransferFunction& P, const TransferFunction& C) {
    return {poly_mul(P.num, C.den), poly_add(poly_mul(P.den, C.den), poly_mul(C.num, P.num))};
}

inline std::complex<double> eval_freq(const TransferFunction& tf, double omega) {
    if (!(omega >= 0.0)) throw ConfigError("eval_freq: frequency must be non-negative");
    const std::complex<double> s(0.0, omega);
    const auto d = poly_eval(tf.den, s);
    if (std::abs(d) < 1e-300) throw NumericError("eval_freq: pole on the imaginary axis at w = " + std::to_string(omega));
    return poly_eval(tf.num, s) / d;
}

/// Value at s -> infinity of a proper transfer function.
inline std::complex<double> eval_infinity(const TransferFunction& tf) {
    if (!tf.proper()) throw ConfigError("transfer function is not proper");
    return tf.num_degree() == tf.den_degree() ? tf.num.front() / tf.den.front() : 0.0;
}

inline double chordal_distance(std::complex<double> a, std::complex<double> b) {
    return std::abs(a - b) / (std::sqrt(1.0 + std::norm(a)) * std::sqrt(1.0 + std::norm(b)));
}

struct PoleCount {
    int rhp = 0;     // open right half plane
    int origin = 0;  // at s = 0
    int axis = 0;    // elsewhere on the imaginary axis
};

inline PoleCount count_poles(const TransferFunction& tf) {
    PoleCount c;
    for (const auto& r : poly_roots(tf.den)) {
        const double tol = 1e-9 * std::max(1.0, std::abs(r));
        if (std::abs(r) <= tol) ++c.origin;
        else if (std::abs(r.real()) <= tol) ++c.axis;
        else if (r.real() > 0.0) ++c.rhp;
    }
    return c;
}

struct GapOptions {
    double w_min = 1e-3;
    double w_max = 1e4;
    int points = 2000;
    int refine_levels = 3;       // each level samples 10x denser around the peak
    double wind_w_min = 1e-6;
    double wind_w_max = 1e8;
    int wind_points = 4000;
};

struct GapResult {
    double value = 0.0;
    bool winding_ok = true;
    double peak_frequency = 0.0;
};

inline std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    const double a = std::log10(lo), b = std::log10(hi);
    for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (n - 1));
    return w;
}

/// Supremum of the chordal distance over a log grid with local refinement.
inline GapResult chordal_sup(const TransferFunction& P1, const TransferFunction& P2, const GapOptions& opt = {}) {
    auto kappa = [&](double w) { return chordal_distance(eval_freq(P1, w), eval_freq(P2, w)); };
    const auto grid = log_grid(opt.w_min, opt.w_max, opt.points);
    GapResult r;
    std::size_t best = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double k = kappa(grid[i]);
        if (k > r.value) {
            r.value = k;
            best = i;
        }
    }
    r.peak_frequency = grid[best];
    double lo = grid[best == 0 ? 0 : best - 1];
    double hi = grid[std::min(best + 1, grid.size() - 1)];
    for (int level = 0; level < opt.refine_levels; ++level) {
        const auto fine = log_grid(lo, hi, 21);
        std::size_t fb = 0;
        for (std::size_t i = 0; i < fine.size(); ++i) {
            const double k = kappa(fine[i]);
            if (k > r.value) {
                r.value = k;
                r.peak_frequency = fine[i];
            }
            if (fine[i] == r.peak_frequency) fb = i;
        }
        lo = fine[fb == 0 ? 0 : fb - 1];
        hi = fine[std::min(fb + 1, fine.size() - 1)];
    }
    return r;
}

namespace detail {

// Phase accumulated by f along [w_a, w_b] with bisection whenever a
// principal-branch step exceeds pi/2.
template <typename F>
double phase_increment(const F& f, double wa, std::complex<double> fa, double wb, std::complex<double> fb, int depth) {
    const double d = std::arg(fb / fa);
    if (std::abs(d) <= std::numbers::pi / 2.0 || depth == 0) return d;
    const double wm = std::sqrt(wa * wb);
    const auto fm = f(wm);
    return phase_increment(f, wa, fa, wm, fm, depth - 1) + phase_increment(f, wm, fm, wb, fb, depth - 1);
}

}  // namespace detail

/// Winding condition wno(1 + P2~ P1) + eta(P1) - eta(P2) - eta0(P2) = 0,
/// with wno counted clockwise along the Nyquist contour indented to the
/// right of poles at the origin.
inline bool winding_condition(const TransferFunction& P1, const TransferFunction& P2, const GapOptions& opt = {}) {
    const auto c1 = count_poles(P1);
    const auto c2 = count_poles(P2);
    if (c1.axis > 0 || c2.axis > 0)
        throw NumericError("nu_gap: imaginary-axis poles away from the origin are not supported");
    auto f = [&](double w) { return 1.0 + std::conj(eval_freq(P2, w)) * eval_freq(P1, w); };
    const auto grid = log_grid(opt.wind_w_min, opt.wind_w_max, opt.wind_points);
    double half = 0.0;
    std::complex<double> prev = f(grid.front());
    if (c1.origin == 0 && c2.origin == 0) {
        const auto f0 = f(0.0);
        half += std::arg(prev / f0);
    }
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const auto cur = f(grid[i]);
        half += detail::phase_increment(f, grid[i - 1], prev, grid[i], cur, 40);
        prev = cur;
    }
    const auto f_inf = 1.0 + std::conj(eval_infinity(P2)) * eval_infinity(P1);
    if (std::abs(f_inf) > 0.0) half += std::arg(f_inf / prev);
    // Mirror symmetry f(-jw) = conj f(jw) doubles the half-line phase; the
    // indentation around the origin adds -pi per pole of f there.
    const double total = 2.0 * half - std::numbers::pi * (c1.origin + c2.origin);
    const long wno_cw = std::lround(-total / (2.0 * std::numbers::pi));
    return wno_cw + c1.rhp - c2.rhp - c2.origin == 0;
}

inline GapResult nu_gap(const TransferFunction& P1, const TransferFunction& P2, const GapOptions& opt = {}) {
    if (!P1.proper() || !P2.proper()) throw ConfigError("nu_gap requires proper transfer functions");
    GapResult r = chordal_sup(P1, P2, opt);
    r.winding_ok = winding_condition(P1, P2, opt);
    if (!r.winding_ok) r.value = 1.0;
    return r;
}

// ---------------------------------------------------------------------------
// T_zw of the MTTE loop

struct TzwOptions {
    double tau_mid = -1.0;  // time constant in the middle denominator term; < 0 selects tau2
};

/// -Jw K / (Jn r tau1 tau2 s^2 + Jn (r tau - K tau1 + r tau1) s + Jn r - M r^2 K), Jn = Jw + M r^2.
inline TransferFunction mtte_tzw(const VehicleParams& p, double K, const TzwOptions& opt = {}) {
    if (K == 0.0) throw ConfigError("mtte_tzw: gain K must be non-zero");
    const double Jn = p.nominal_inertia();
    const double tau = opt.tau_mid < 0.0 ? p.tau2 : opt.tau_mid;
    const double a2 = Jn * p.r * p.tau1 * p.tau2;
    if (std::abs(a2) < 1e-12) throw NumericError("mtte_tzw: degenerate leading coefficient");
    return {{-p.Jw * K}, {a2, Jn * (p.r * tau - K * p.tau1 + p.r * p.tau1), Jn * p.r - p.M * p.r * p.r * K}};
}

// ---------------------------------------------------------------------------
// Plant families
//
// Linearization about a cruising point V0: the tire force is N A lambda
// with A the mu-slope, lambda ~ (r w - V) / V0, and the translating mass
// seen through the tire is (J - Jw) / r^2 for an effective inertia J. The
// wheel-speed response to torque is
//   P(s) = (Mt s + k) / (s (Jw Mt s + k J)),   Mt = (J - Jw)/r^2, k = N A / V0,
// which tends to 1/(J s) at low and 1/(Jw s) at high frequency. Inputs are
// scaled by the asphalt peak torque N r mu_peak and outputs by V0 / r, so
// loops are compared in slip-like units. Each family maps a disturbance
// torque to wheel speed through P / (1 + C P).

struct FamilyOptions {
    double V0 = 15.0;                   // operating speed, m/s
    RoadType arte_road = RoadType::Snow;  // operating point identified with road information
    double arte_band = 0.10;            // relative half-width of the intervals with road information
    int j_points = 9;
    int a_points = 3;
    MfcConfig mfc{};
    SrcState src{};
    MtteConfig mtte{};
};

struct PlantFamily {
    TransferFunction nominal;
    TransferFunction worst;
    GapResult gap;
    double J_worst = 0.0;
    double A_worst = 0.0;
};

inline double mu_slope_at_zero(RoadType road, const CurveSet& curves = default_curves()) {
    return mu_slope(curves.curve(road), 0.0);
}

inline TransferFunction linear_wheel_plant(double J, double A, const VehicleParams& p, double V0) {
    if (!(J >= p.Jw) || !(A > 0.0) || !(V0 > 0.0)) throw ConfigError("linear_wheel_plant: invalid operating point");
    const double Mt = (J - p.Jw) / (p.r * p.r);
    const double k = p.normal_load() * A / V0;
    return {{Mt, k}, {p.Jw * Mt, k * J, 0.0}};
}

inline double family_torque_scale(const VehicleParams& p, const CurveSet& curves = default_curves()) {
    return p.normal_load() * p.r * curves.mu_peak(RoadType::Asphalt);
}

/// Feedback law from wheel speed (rad/s) to torque (N m), linearized.
inline TransferFunction linear_controller(ControllerKind tcs, const VehicleParams& p, const FamilyOptions& opt,
                                          double alpha) {
    switch (tcs) {
        case ControllerKind::MFC:
            return {{opt.mfc.K_gain * p.tau2, 0.0}, {p.tau2, 1.0}};
        case ControllerKind::SRC:
            // slip ~ r w / V0
            return {{opt.src.kp * p.r / opt.V0, opt.src.ki * p.r / opt.V0}, {1.0, 0.0}};
        case ControllerKind::MTTE: {
            const double beta = 1.0 + p.Jw / (alpha * p.M * opt.mtte.mass_share * p.r * p.r);
            return {{beta * p.Jw, 0.0}, {p.tau1, 1.0 - beta}};
        }
    }
    throw ConfigError("unknown controller");
}

inline TransferFunction closed_loop(ControllerKind tcs, double J, double A, const VehicleParams& p,
                                    const FamilyOptions& opt, double alpha, const CurveSet& curves = default_curves()) {
    const double Tn = family_torque_scale(p, curves);
    const auto P = linear_wheel_plant(J, A, p, opt.V0);
    const auto C = linear_controller(tcs, p, opt, alpha);
    // scaled plant P' = P Tn r / V0, scaled controller C' = C V0 / (r Tn)
    const TransferFunction Ps{poly_scale(P.num, Tn * p.r / opt.V0), P.den};
    const TransferFunction Cs{poly_scale(C.num, opt.V0 / (p.r * Tn)), C.den};
    return feedback(Ps, Cs);
}

/// Nominal and worst-case perturbed closed loops. Without road information
/// the nominal point is zero slip on asphalt (J = Jw + M r^2, A = A_asphalt)
/// and the perturbation covers J in [Jw, Jw + M r^2], A in [A_snow,
/// A_asphalt]. With it, both intervals shrink to +-arte_band around the
/// identified point (J from lambda_opt, A of the identified road). MTTE
/// bounds the chassis/wheel acceleration ratio by alpha, so its reachable
/// inertia never drops below Jw + alpha M r^2.
inline PlantFamily plant_family(ControllerKind tcs, const VehicleParams& p, bool arte_on, const FamilyOptions& opt = {},
                                const CurveSet& curves = default_curves(), const GapOptions& gopt = {}) {
    const double Jn = p.nominal_inertia();
    const double Mr2 = p.M * p.r * p.r;
    const double A_asph = mu_slope_at_zero(RoadType::Asphalt, curves);
    const double A_snow = mu_slope_at_zero(RoadType::Snow, curves);
    double alpha = opt.mtte.alpha;
    double J0, A0, j_lo, j_hi, a_lo, a_hi;
    if (!arte_on) {
        J0 = Jn;
        A0 = A_asph;
        j_lo = p.Jw;
        j_hi = Jn;
        a_lo = std::min(A_snow, A_asph);
        a_hi = std::max(A_snow, A_asph);
    } else {
        alpha = opt.mtte.alpha_schedule[index_of(opt.arte_road)];
        J0 = p.Jw + Mr2 * (1.0 - curves.optimal_lambda(opt.arte_road));
        A0 = mu_slope_at_zero(opt.arte_road, curves);
        j_lo = std::max(p.Jw, J0 * (1.0 - opt.arte_band));
        j_hi = std::min(Jn, J0 * (1.0 + opt.arte_band));
        a_lo = A0 * (1.0 - opt.arte_band);
        a_hi = A0 * (1.0 + opt.arte_band);
    }
    if (tcs == ControllerKind::MTTE) j_lo = std::max(j_lo, p.Jw + alpha * Mr2);

    PlantFamily fam;
    fam.nominal = closed_loop(tcs, J0, A0, p, opt, alpha, curves);
    fam.worst = fam.nominal;
    fam.J_worst = J0;
    fam.A_worst = A0;
    for (int i = 0; i < opt.j_points; ++i) {
        const double J = j_lo + (j_hi - j_lo) * i / std::max(1, opt.j_points - 1);
        for (int k = 0; k < opt.a_points; ++k) {
            const double A = a_lo + (a_hi - a_lo) * k / std::max(1, opt.a_points - 1);
            auto cand = closed_loop(tcs, J, A, p, opt, alpha, curves);
            const auto g = nu_gap(fam.nominal, cand, gopt);
            if (g.value > fam.gap.value) {
                fam.gap = g;
                fam.worst = std::move(cand);
                fam.J_worst = J;
                fam.A_worst = A;
            }
        }
    }
    return fam;
}

}  // namespace tcsim
