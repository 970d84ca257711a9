#pragma once

// INI scenario files. Every section is optional and every key overrides one
// default; unknown sections or keys are rejected so typos surface.
//
//   [scenario]  duration dt torque_demand initial_speed controller arte
//               arte_period seed model roads
//   [vehicle]   Jw r M m tau1 tau2 g mu_roll cda rho_air torque_limit chassis_share
//   [mfc]       K_gain preset_slip
//   [src]       lambda_ref kp ki T_sat
//   [mtte]      alpha T_floor mass_share alpha_asphalt alpha_snow alpha_stone alpha_gravel
//   [curves]    asphalt = B C D E  (and snow, stone, gravel)
//   [audio]     clip_seconds snr_db frames_per_class sample_rate
//   [train]     seed max_epochs learning_rate target_loss train_fraction
//   [compare]   controllers modes with_gap
//   [gap]       V0 arte_road arte_band j_points a_points
//
// roads is a list of "start:road" pairs, e.g. "0:asphalt 1:snow".

#include <tcsim/classifier.hpp>
#include <tcsim/error.hpp>
#include <tcsim/harness.hpp>
#include <tcsim/robustness.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace tcsim {

struct TrainConfig {
    std::uint64_t seed = 1;
    double train_fraction = 0.7;
    TrainOptions options{};
};

struct RunConfig {
    ScenarioConfig scenario{};
    TrainConfig train{};
    CompareOptions compare{};
};

namespace detail {

inline double parse_number(const std::string& section, const std::string& key, const std::string& text) {
    std::istringstream in(text);
    double v = 0.0;
    std::string rest;
    if (!(in >> v) || (in >> rest) || !std::isfinite(v))
        throw ConfigError("[" + section + "] " + key + ": expected a number, got '" + text + "'");
    return v;
}

inline std::uint64_t parse_unsigned(const std::string& section, const std::string& key, const std::string& text) {
    const double v = parse_number(section, key, text);
    if (v < 0.0 || v != std::floor(v) || v > 1.8e19)
        throw ConfigError("[" + section + "] " + key + ": expected a non-negative integer, got '" + text + "'");
    return static_cast<std::uint64_t>(v);
}

inline bool parse_bool(const std::string& section, const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError("[" + section + "] " + key + ": expected true or false, got '" + text + "'");
}

inline RoadType parse_road_or_throw(const std::string& where, const std::string& text) {
    auto r = parse_road(text);
    if (!r) throw ConfigError(where + ": unknown road '" + text + "'");
    return *r;
}

inline std::vector<RoadSegment> parse_schedule(const std::string& text) {
    std::istringstream in(text);
    std::vector<RoadSegment> out;
    std::string item;
    while (in >> item) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("[scenario] roads: expected start:road, got '" + item + "'");
        out.push_back({parse_number("scenario", "roads", item.substr(0, colon)),
                       parse_road_or_throw("[scenario] roads", item.substr(colon + 1))});
    }
    if (out.empty()) throw ConfigError("[scenario] roads: empty schedule");
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

inline std::map<std::string, std::map<std::string, Setter>> setters() {
    auto num = [](const char* sec, const char* key, auto field) -> std::pair<const std::string, Setter> {
        return {key, [=](RunConfig& c, const std::string& v) { field(c) = parse_number(sec, key, v); }};
    };
    std::map<std::string, std::map<std::string, Setter>> s;
    s["scenario"] = {
        num("scenario", "duration", [](RunConfig& c) -> double& { return c.scenario.duration; }),
        num("scenario", "dt", [](RunConfig& c) -> double& { return c.scenario.dt; }),
        num("scenario", "torque_demand", [](RunConfig& c) -> double& { return c.scenario.torque_demand; }),
        num("scenario", "initial_speed", [](RunConfig& c) -> double& { return c.scenario.initial_speed; }),
        num("scenario", "arte_period", [](RunConfig& c) -> double& { return c.scenario.arte_period; }),
        {"controller",
         [](RunConfig& c, const std::string& v) {
             auto k = parse_controller(v);
             if (!k) throw ConfigError("[scenario] controller: unknown controller '" + v + "'");
             c.scenario.controller = *k;
         }},
        {"arte",
         [](RunConfig& c, const std::string& v) {
             auto m = parse_arte_mode(v);
             if (!m) throw ConfigError("[scenario] arte: expected off, oracle or classifier, got '" + v + "'");
             c.scenario.arte = *m;
         }},
        {"seed", [](RunConfig& c, const std::string& v) { c.scenario.seed = parse_unsigned("scenario", "seed", v); }},
        {"model", [](RunConfig& c, const std::string& v) { c.scenario.model_path = v; }},
        {"roads", [](RunConfig& c, const std::string& v) { c.scenario.schedule = parse_schedule(v); }},
    };
    s["vehicle"] = {
        num("vehicle", "Jw", [](RunConfig& c) -> double& { return c.scenario.vehicle.Jw; }),
        num("vehicle", "r", [](RunConfig& c) -> double& { return c.scenario.vehicle.r; }),
        num("vehicle", "M", [](RunConfig& c) -> double& { return c.scenario.vehicle.M; }),
        num("vehicle", "m", [](RunConfig& c) -> double& { return c.scenario.vehicle.m; }),
        num("vehicle", "tau1", [](RunConfig& c) -> double& { return c.scenario.vehicle.tau1; }),
        num("vehicle", "tau2", [](RunConfig& c) -> double& { return c.scenario.vehicle.tau2; }),
        num("vehicle", "g", [](RunConfig& c) -> double& { return c.scenario.vehicle.g; }),
        num("vehicle", "mu_roll", [](RunConfig& c) -> double& { return c.scenario.vehicle.mu_roll; }),
        num("vehicle", "cda", [](RunConfig& c) -> double& { return c.scenario.vehicle.cda; }),
        num("vehicle", "rho_air", [](RunConfig& c) -> double& { return c.scenario.vehicle.rho_air; }),
        num("vehicle", "torque_limit", [](RunConfig& c) -> double& { return c.scenario.vehicle.torque_limit; }),
        num("vehicle", "chassis_share", [](RunConfig& c) -> double& { return c.scenario.vehicle.chassis_share; }),
    };
    s["mfc"] = {
        num("mfc", "K_gain", [](RunConfig& c) -> double& { return c.scenario.mfc.K_gain; }),
        num("mfc", "preset_slip", [](RunConfig& c) -> double& { return c.scenario.mfc.preset_slip; }),
    };
    s["src"] = {
        num("src", "lambda_ref", [](RunConfig& c) -> double& { return c.scenario.src.lambda_ref; }),
        num("src", "kp", [](RunConfig& c) -> double& { return c.scenario.src.kp; }),
        num("src", "ki", [](RunConfig& c) -> double& { return c.scenario.src.ki; }),
        num("src", "T_sat", [](RunConfig& c) -> double& { return c.scenario.src.T_sat; }),
    };
    s["mtte"] = {
        num("mtte", "alpha", [](RunConfig& c) -> double& { return c.scenario.mtte.alpha; }),
        num("mtte", "T_floor", [](RunConfig& c) -> double& { return c.scenario.mtte.T_floor; }),
        num("mtte", "mass_share", [](RunConfig& c) -> double& { return c.scenario.mtte.mass_share; }),
    };
    for (RoadType road : kAllRoads) {
        const std::string key = "alpha_" + std::string(to_string(road));
        s["mtte"][key] = [key, road](RunConfig& c, const std::string& v) {
            c.scenario.mtte.alpha_schedule[index_of(road)] = parse_number("mtte", key, v);
        };
        s["curves"][std::string(to_string(road))] = [road](RunConfig& c, const std::string& v) {
            std::istringstream in(v);
            MuLambdaCurve curve;
            if (!(in >> curve.B >> curve.C >> curve.D >> curve.E))
                throw ConfigError("[curves] " + std::string(to_string(road)) + ": expected four numbers");
            auto set = std::make_shared<CurveSet>(c.scenario.curve_set());
            set->set_curve(road, curve);
            c.scenario.curves = std::move(set);
        };
    }
    s["audio"] = {
        num("audio", "clip_seconds", [](RunConfig& c) -> double& { return c.scenario.audio.clip_seconds; }),
        num("audio", "snr_db", [](RunConfig& c) -> double& { return c.scenario.audio.snr_db; }),
        {"frames_per_class",
         [](RunConfig& c, const std::string& v) {
             c.scenario.audio.frames_per_class = parse_unsigned("audio", "frames_per_class", v);
         }},
        {"sample_rate",
         [](RunConfig& c, const std::string& v) {
             const auto rate = static_cast<int>(parse_unsigned("audio", "sample_rate", v));
             if (!supported_rate(rate)) throw ConfigError("[audio] sample_rate: must be 16000 or 44100");
             c.scenario.audio.sample_rate = rate;
             for (RoadType road : kAllRoads) c.scenario.audio.specs[index_of(road)] = default_class_spec(road, rate);
         }},
    };
    s["train"] = {
        {"seed", [](RunConfig& c, const std::string& v) { c.train.seed = parse_unsigned("train", "seed", v); }},
        {"max_epochs",
         [](RunConfig& c, const std::string& v) {
             c.train.options.max_epochs = static_cast<int>(parse_unsigned("train", "max_epochs", v));
         }},
        num("train", "learning_rate", [](RunConfig& c) -> double& { return c.train.options.learning_rate; }),
        num("train", "target_loss", [](RunConfig& c) -> double& { return c.train.options.target_loss; }),
        num("train", "train_fraction", [](RunConfig& c) -> double& { return c.train.train_fraction; }),
    };
    s["compare"] = {
        {"controllers",
         [](RunConfig& c, const std::string& v) {
             std::istringstream in(v);
             std::string name;
             c.compare.controllers.clear();
             while (in >> name) {
                 auto k = parse_controller(name);
                 if (!k) throw ConfigError("[compare] controllers: unknown controller '" + name + "'");
                 c.compare.controllers.push_back(*k);
             }
         }},
        {"modes",
         [](RunConfig& c, const std::string& v) {
             std::istringstream in(v);
             std::string name;
             c.compare.modes.clear();
             while (in >> name) {
                 auto m = parse_arte_mode(name);
                 if (!m) throw ConfigError("[compare] modes: unknown mode '" + name + "'");
                 c.compare.modes.push_back(*m);
             }
         }},
        {"with_gap",
         [](RunConfig& c, const std::string& v) { c.compare.with_gap = parse_bool("compare", "with_gap", v); }},
    };
    s["gap"] = {
        num("gap", "V0", [](RunConfig& c) -> double& { return c.compare.family.V0; }),
        num("gap", "arte_band", [](RunConfig& c) -> double& { return c.compare.family.arte_band; }),
        {"arte_road",
         [](RunConfig& c, const std::string& v) { c.compare.family.arte_road = parse_road_or_throw("[gap] arte_road", v); }},
        {"j_points",
         [](RunConfig& c, const std::string& v) {
             c.compare.family.j_points = static_cast<int>(parse_unsigned("gap", "j_points", v));
         }},
        {"a_points",
         [](RunConfig& c, const std::string& v) {
             c.compare.family.a_points = static_cast<int>(parse_unsigned("gap", "a_points", v));
         }},
    };
    return s;
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    RunConfig cfg;
    const auto table = detail::setters();
    for (const auto& [section, body] : tree) {
        auto sec = table.find(section);
        if (sec == table.end() || !body.data().empty())
            throw ConfigError("config: unknown section or top-level key '" + section + "'");
        for (const auto& [key, value] : body) {
            auto it = sec->second.find(key);
            if (it == sec->second.end()) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
            it->second(cfg, value.get_value<std::string>());
        }
    }
    if (!(cfg.train.train_fraction > 0.0 && cfg.train.train_fraction < 1.0))
        throw ConfigError("[train] train_fraction must lie in (0, 1)");
    validate(cfg.scenario);
    return cfg;
}

inline RunConfig parse_config_string(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    return parse_config(in);
}

}  // namespace tcsim
