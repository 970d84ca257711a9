#pragma once

// Scenario runner: plant + traction controller + road estimation in the
// loop, the performance metrics, and the controller x estimation-mode
// comparison table.

#include <tcsim/classifier.hpp>
#include <tcsim/controllers.hpp>
#include <tcsim/error.hpp>
#include <tcsim/format.hpp>
#include <tcsim/robustness.hpp>
#include <tcsim/synth_corpus.hpp>
#include <tcsim/tire_road.hpp>
#include <tcsim/vehicle_plant.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace tcsim {

enum class ArteMode { Off, Oracle, Classifier };

inline constexpr std::array<ArteMode, 3> kAllArteModes = {ArteMode::Off, ArteMode::Oracle, ArteMode::Classifier};

constexpr std::string_view to_string(ArteMode m) noexcept {
    switch (m) {
        case ArteMode::Off: return "off";
        case ArteMode::Oracle: return "oracle";
        case ArteMode::Classifier: return "classifier";
    }
    return "?";
}

inline std::optional<ArteMode> parse_arte_mode(std::string_view name) {
    for (auto m : kAllArteModes)
        if (name == to_string(m)) return m;
    return std::nullopt;
}

struct RoadSegment {
    double start = 0.0;  // s
    RoadType road = RoadType::Asphalt;
};

struct ScenarioConfig {
    double duration = 8.0;         // s
    double dt = 1e-3;              // s
    double torque_demand = 400.0;  // N m, constant
    double initial_speed = 0.0;    // m/s, wheel rolling without slip
    std::vector<RoadSegment> schedule = {{0.0, RoadType::Asphalt}, {1.0, RoadType::Snow}};
    ControllerKind controller = ControllerKind::MTTE;
    ArteMode arte = ArteMode::Off;
    double arte_period = 0.1;  // s
    std::uint64_t seed = 1;

    // Classifier mode: a model given here wins over model_path.
    std::string model_path;
    std::shared_ptr<const MlpModel> model;
    // Audio synthesized for the in-loop classifier.
    CorpusOptions audio{};

    VehicleParams vehicle{};
    MfcConfig mfc{};
    SrcState src{};
    MtteConfig mtte{};
    std::shared_ptr<const CurveSet> curves;  // null selects the default set

    const CurveSet& curve_set() const { return curves ? *curves : default_curves(); }
};

inline std::size_t step_count(const ScenarioConfig& cfg) {
    return static_cast<std::size_t>(std::llround(cfg.duration / cfg.dt));
}

inline std::size_t arte_period_steps(const ScenarioConfig& cfg) {
    return static_cast<std::size_t>(std::max<long long>(1, std::llround(cfg.arte_period / cfg.dt)));
}

inline void validate(const ScenarioConfig& cfg) {
    if (!(cfg.duration > 0.0) || !std::isfinite(cfg.duration)) throw ConfigError("duration must be positive");
    if (!(cfg.dt > 0.0 && cfg.dt <= kMaxPlantStep)) throw ConfigError("dt must lie in (0, 5 ms]");
    if (!(cfg.torque_demand >= 0.0) || !std::isfinite(cfg.torque_demand))
        throw ConfigError("torque demand must be a non-negative number");
    if (!(cfg.initial_speed >= 0.0)) throw ConfigError("initial speed must be non-negative");
    if (cfg.schedule.empty() || cfg.schedule.front().start != 0.0)
        throw ConfigError("road schedule must start at t = 0");
    for (std::size_t i = 1; i < cfg.schedule.size(); ++i)
        if (!(cfg.schedule[i].start > cfg.schedule[i - 1].start))
            throw ConfigError("road schedule times must be strictly increasing");
    if (!(cfg.arte_period >= 0.1 - 1e-12)) throw ConfigError("estimation period must be at least 0.1 s");
    validate(cfg.vehicle);
    check_invariants(cfg.src);
    if (!(cfg.mtte.alpha > 0.0 && cfg.mtte.alpha <= 1.0)) throw ConfigError("MTTE alpha outside (0, 1]");
    for (double a : cfg.mtte.alpha_schedule)
        if (!(a > 0.0 && a <= 1.0)) throw ConfigError("MTTE alpha schedule entry outside (0, 1]");
    if (!(cfg.mfc.K_gain > 0.0)) throw ConfigError("MFC gain must be positive");
    if (!(cfg.mfc.preset_slip >= 0.0 && cfg.mfc.preset_slip < 1.0)) throw ConfigError("MFC preset slip outside [0, 1)");
}

/// Road in effect during step k: the last segment whose start step is <= k.
/// Start steps round up, so a switch at t lands on the first step at or
/// after t.
inline RoadType road_at_step(const ScenarioConfig& cfg, std::size_t k) {
    RoadType road = cfg.schedule.front().road;
    for (const auto& seg : cfg.schedule) {
        const auto start = static_cast<std::size_t>(std::ceil(seg.start / cfg.dt - 1e-9));
        if (start <= k) road = seg.road;
    }
    return road;
}

/// 0.1 s of noisy audio of the true road for estimation window `window`.
/// Drawn like a corpus frame: a full noisy record, then a random cut.
inline AudioClip arte_audio_window(const ScenarioConfig& cfg, RoadType road, std::size_t window) {
    const auto seed = class_seed(cfg.seed, road, 1000 + window);
    const auto record = synth_record(cfg.audio, road, seed);
    const auto frame = sample_frames(record, 1, seed).front();
    AudioClip clip;
    clip.samples = frame.samples;
    clip.sample_rate = frame.sample_rate;
    clip.label = road;
    return clip;
}

namespace detail {

struct ControllerBank {
    MfcState mfc;
    SrcState src;
    MtteState mtte;
};

inline void apply_estimate(ControllerBank& bank, const ScenarioConfig& cfg, RoadType road, double lambda_opt) {
    switch (cfg.controller) {
        case ControllerKind::MFC: bank.mfc = mfc_update_inertia(bank.mfc, lambda_opt, cfg.vehicle).state; break;
        case ControllerKind::SRC: bank.src = src_set_reference(bank.src, lambda_opt).state; break;
        case ControllerKind::MTTE: bank.mtte = mtte_update_alpha(bank.mtte, road, cfg.mtte); break;
    }
}

}  // namespace detail

inline std::shared_ptr<const MlpModel> resolve_model(const ScenarioConfig& cfg) {
    if (cfg.model) return cfg.model;
    if (cfg.model_path.empty()) throw ConfigError("classifier mode needs a model file");
    return std::make_shared<const MlpModel>(load_model(cfg.model_path));
}

/// Fixed-step loop. Each step: road from the schedule; every estimation
/// period the estimate is refreshed and pushed into the controller; the
/// controller issues a command from the current measurement; the plant
/// advances one step.
inline SimTrace run_scenario(const ScenarioConfig& cfg) {
    validate(cfg);
    const auto& curves = cfg.curve_set();
    const auto& p = cfg.vehicle;
    std::shared_ptr<const MlpModel> model;
    if (cfg.arte == ArteMode::Classifier) model = resolve_model(cfg);

    SimState s;
    s.V = cfg.initial_speed;
    s.w = cfg.initial_speed / p.r;
    detail::ControllerBank bank{mfc_init(p, cfg.mfc, s.w), cfg.src, MtteState{}};
    bank.mtte.alpha = cfg.mtte.alpha;

    const std::size_t n = step_count(cfg);
    const std::size_t period = arte_period_steps(cfg);
    SimTrace trace;
    trace.dt = cfg.dt;
    trace.rows.reserve(n);
    std::optional<RoadType> estimate;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * cfg.dt;
        s.t = t;
        const RoadType road = road_at_step(cfg, k);
        if (cfg.arte != ArteMode::Off && k % period == 0) {
            if (cfg.arte == ArteMode::Oracle) {
                estimate = road;
                detail::apply_estimate(bank, cfg, road, curves.optimal_lambda(road));
            } else {
                const auto est = arte_estimate(*model, arte_audio_window(cfg, road, k / period), curves);
                estimate = est.road;
                detail::apply_estimate(bank, cfg, est.road, est.lambda_opt);
            }
        }

        const double Vw = p.r * s.w;
        const double lambda = slip_ratio(s.V, Vw);
        double T_cmd = 0.0;
        switch (cfg.controller) {
            case ControllerKind::MFC: {
                auto r = mfc_step(bank.mfc, cfg.torque_demand, s.w, p, cfg.dt);
                T_cmd = r.torque;
                bank.mfc = r.state;
                break;
            }
            case ControllerKind::SRC: {
                auto r = src_step(bank.src, cfg.torque_demand, lambda, cfg.dt);
                T_cmd = r.torque;
                bank.src = r.state;
                break;
            }
            case ControllerKind::MTTE: {
                auto r = mtte_step(bank.mtte, cfg.torque_demand, s.T_actual, s.w, p, cfg.dt, cfg.mtte);
                T_cmd = r.torque;
                bank.mtte = r.state;
                break;
            }
        }
        if (!std::isfinite(T_cmd)) throw DivergenceError("controller command became non-finite", static_cast<long>(k), t);
        const SimState next = plant_step(s, T_cmd, road, p, cfg.dt, curves);

        TraceRow row;
        row.t = t;
        row.V = s.V;
        row.Vw = Vw;
        row.lambda = lambda;
        row.T_cmd = T_cmd;
        row.T_applied = next.T_actual;
        row.mu = curves.mu(road, lambda);
        row.road_true = road;
        row.road_est = estimate;
        trace.rows.push_back(row);
        s = next;
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Metrics

inline void require_rows(const SimTrace& trace) {
    if (trace.rows.empty()) throw ConfigError("metrics need a non-empty trace");
}

/// Time-averaged |lambda|.
inline double slip_deviation(const SimTrace& trace) {
    require_rows(trace);
    double sum = 0.0;
    for (const auto& r : trace.rows) sum += std::abs(r.lambda) * trace.dt;
    return sum / trace.duration();
}

inline double max_torque(const SimTrace& trace) {
    require_rows(trace);
    double m = 0.0;
    for (const auto& r : trace.rows) m = std::max(m, r.T_applied);
    return m;
}

/// Area under the applied torque divided by the duration (mean torque).
inline double torque_area(const SimTrace& trace) {
    require_rows(trace);
    double sum = 0.0;
    for (const auto& r : trace.rows) sum += r.T_applied * trace.dt;
    return sum / trace.duration();
}

struct MetricsReport {
    double slip_deviation = 0.0;
    double max_torque = 0.0;
    double torque_area = 0.0;
    std::optional<GapResult> gap;
};

inline MetricsReport metrics(const SimTrace& trace) {
    return {slip_deviation(trace), max_torque(trace), torque_area(trace), std::nullopt};
}

struct CompareRow {
    ControllerKind controller = ControllerKind::MFC;
    ArteMode arte = ArteMode::Off;
    MetricsReport report;
};

struct CompareOptions {
    std::vector<ControllerKind> controllers = {kAllControllers.begin(), kAllControllers.end()};
    std::vector<ArteMode> modes = {ArteMode::Off, ArteMode::Oracle};
    bool with_gap = true;
    FamilyOptions family{};
};

/// Runs every controller x mode cell from the same base scenario. Cells run
/// concurrently; rows come back sorted by (controller, mode).
inline std::vector<CompareRow> compare(const ScenarioConfig& base, const CompareOptions& opt = {}) {
    if (opt.controllers.empty() || opt.modes.empty()) throw ConfigError("compare needs controllers and modes");
    ScenarioConfig shared = base;
    bool needs_model = false;
    for (auto m : opt.modes) needs_model |= m == ArteMode::Classifier;
    if (needs_model) shared.model = resolve_model(base);

    std::vector<std::future<CompareRow>> cells;
    for (auto c : opt.controllers) {
        for (auto m : opt.modes) {
            cells.push_back(std::async(std::launch::async, [&shared, &opt, c, m] {
                ScenarioConfig cfg = shared;
                cfg.controller = c;
                cfg.arte = m;
                CompareRow row{c, m, metrics(run_scenario(cfg))};
                if (opt.with_gap) {
                    FamilyOptions fo = opt.family;
                    fo.mfc = cfg.mfc;
                    fo.src = cfg.src;
                    fo.mtte = cfg.mtte;
                    row.report.gap = plant_family(c, cfg.vehicle, m != ArteMode::Off, fo, cfg.curve_set()).gap;
                }
                return row;
            }));
        }
    }
    std::vector<CompareRow> rows;
    for (auto& f : cells) rows.push_back(f.get());
    std::sort(rows.begin(), rows.end(), [](const CompareRow& a, const CompareRow& b) {
        return std::pair(a.controller, a.arte) < std::pair(b.controller, b.arte);
    });
    return rows;
}

inline constexpr const char* kCompareHeader = "controller,arte,slip_deviation,max_torque,torque_area,gap";

inline void write_compare_csv(std::ostream& out, const std::vector<CompareRow>& rows) {
    out << kCompareHeader << '\n';
    for (const auto& r : rows) {
        out << to_string(r.controller) << ',' << to_string(r.arte) << ',' << format_g9(r.report.slip_deviation) << ','
            << format_g9(r.report.max_torque) << ',' << format_g9(r.report.torque_area) << ','
            << (r.report.gap ? format_g9(r.report.gap->value) : std::string()) << '\n';
    }
}

}  // namespace tcsim
