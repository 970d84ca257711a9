#pragma once

// Road-type taxonomy and longitudinal friction curves.

#include <tcsim/error.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace tcsim {

enum class RoadType : int { Asphalt = 0, Snow = 1, Stone = 2, Gravel = 3 };

inline constexpr std::size_t kRoadCount = 4;

// Iteration order used everywhere a per-road table is laid out.
inline constexpr std::array<RoadType, kRoadCount> kAllRoads = {RoadType::Asphalt, RoadType::Snow,
                                                               RoadType::Stone, RoadType::Gravel};

constexpr std::size_t index_of(RoadType road) noexcept { return static_cast<std::size_t>(road); }

constexpr std::string_view to_string(RoadType road) noexcept {
    switch (road) {
        case RoadType::Asphalt: return "asphalt";
        case RoadType::Snow: return "snow";
        case RoadType::Stone: return "stone";
        case RoadType::Gravel: return "gravel";
    }
    return "?";
}

inline std::optional<RoadType> parse_road(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (RoadType road : kAllRoads) {
        if (lower == to_string(road)) return road;
    }
    return std::nullopt;
}

/// Magic Formula coefficients for the longitudinal friction curve
/// mu(lambda) = D sin(C atan(B lambda - E (B lambda - atan(B lambda)))).
struct MuLambdaCurve {
    double B = 10.0;  ///< stiffness factor
    double C = 1.9;   ///< shape factor
    double D = 1.0;   ///< peak factor, equals the peak friction coefficient
    double E = 0.97;  ///< curvature factor

    friend bool operator==(const MuLambdaCurve&, const MuLambdaCurve&) = default;
};

/// Throws ConfigError unless D in (0, 1.5], B > 0 and C in (1, 3).
inline void validate(const MuLambdaCurve& c) {
    if (!(c.D > 0.0 && c.D <= 1.5)) throw ConfigError("curve peak factor D must lie in (0, 1.5]");
    if (!(c.B > 0.0)) throw ConfigError("curve stiffness factor B must be positive");
    if (!(c.C > 1.0 && c.C < 3.0)) throw ConfigError("curve shape factor C must lie in (1, 3)");
    if (!std::isfinite(c.E)) throw ConfigError("curve curvature factor E must be finite");
}

/// Friction coefficient at slip ratio `lambda`. The slip is clamped to [-1, 1].
inline double mu(const MuLambdaCurve& c, double lambda) noexcept {
    const double x = std::clamp(lambda, -1.0, 1.0);
    const double bx = c.B * x;
    return c.D * std::sin(c.C * std::atan(bx - c.E * (bx - std::atan(bx))));
}

/// Analytic slope d(mu)/d(lambda).
inline double mu_slope(const MuLambdaCurve& c, double lambda) noexcept {
    const double x = std::clamp(lambda, -1.0, 1.0);
    const double bx = c.B * x;
    const double inner = bx - c.E * (bx - std::atan(bx));
    const double d_inner = c.B * (1.0 - c.E) + c.E * c.B / (1.0 + bx * bx);
    return c.D * std::cos(c.C * std::atan(inner)) * c.C / (1.0 + inner * inner) * d_inner;
}

// Default parameter sets. Peaks are ordered asphalt > stone > gravel > snow.
inline constexpr MuLambdaCurve kAsphaltCurve{10.0, 1.9, 1.0, 0.97};
inline constexpr MuLambdaCurve kStoneCurve{12.0, 2.3, 0.82, 1.0};
inline constexpr MuLambdaCurve kGravelCurve{4.0, 2.0, 0.60, 1.0};
inline constexpr MuLambdaCurve kSnowCurve{40.0, 2.0, 0.20, 1.0};

/// Sampled friction curve with its peak.
struct MuLambdaTable {
    std::vector<double> lambda_grid;
    std::vector<double> mu_values;
    double lambda_opt = 0.0;
    double mu_peak = 0.0;

    /// Linear interpolation on the grid; slip outside [0, 1] is clamped.
    double lookup(double lambda) const {
        const double x = std::clamp(lambda, lambda_grid.front(), lambda_grid.back());
        auto it = std::upper_bound(lambda_grid.begin(), lambda_grid.end(), x);
        if (it == lambda_grid.end()) return mu_values.back();
        const auto hi = static_cast<std::size_t>(it - lambda_grid.begin());
        if (hi == 0) return mu_values.front();
        const std::size_t lo = hi - 1;
        const double w = (x - lambda_grid[lo]) / (lambda_grid[hi] - lambda_grid[lo]);
        return mu_values[lo] + w * (mu_values[hi] - mu_values[lo]);
    }
};

inline constexpr std::size_t kMinTableSize = 64;
inline constexpr std::size_t kDefaultTableSize = 4096;

/// Locates the peak of a sampled table. Ties resolve to the lowest slip.
inline void locate_peak(MuLambdaTable& table) {
    auto best = std::max_element(table.mu_values.begin(), table.mu_values.end());
    const auto i = static_cast<std::size_t>(best - table.mu_values.begin());
    table.mu_peak = *best;
    table.lambda_opt = table.lambda_grid[i];
}

inline MuLambdaTable build_table(const MuLambdaCurve& curve, std::size_t n) {
    if (n < kMinTableSize) throw ConfigError("friction table needs at least 64 grid points");
    MuLambdaTable table;
    table.lambda_grid.resize(n);
    table.mu_values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        // last point pinned to exactly 1.0
        const double lambda = (i + 1 == n) ? 1.0 : static_cast<double>(i) / static_cast<double>(n - 1);
        table.lambda_grid[i] = lambda;
        table.mu_values[i] = mu(curve, lambda);
    }
    locate_peak(table);
    return table;
}

/// The friction curve assigned to each road type. Immutable once built.
class CurveSet {
public:
    CurveSet() : curves_{kAsphaltCurve, kSnowCurve, kStoneCurve, kGravelCurve} { rebuild(); }

    const MuLambdaCurve& curve(RoadType road) const { return curves_[index_of(road)]; }
    const MuLambdaTable& table(RoadType road) const { return tables_[index_of(road)]; }

    double mu(RoadType road, double lambda) const { return tcsim::mu(curve(road), lambda); }
    double optimal_lambda(RoadType road) const { return table(road).lambda_opt; }
    double mu_peak(RoadType road) const { return table(road).mu_peak; }

    /// Replaces one curve after validating it.
    void set_curve(RoadType road, const MuLambdaCurve& c) {
        validate(c);
        curves_[index_of(road)] = c;
        tables_[index_of(road)] = build_table(c, kDefaultTableSize);
        const double opt = tables_[index_of(road)].lambda_opt;
        if (!(opt > 0.0 && opt < 0.5))
            throw ConfigError("curve for " + std::string(to_string(road)) + " peaks outside (0, 0.5)");
    }

    /// Reads `road = B C D E` lines; `#` starts a comment, `[section]` lines
    /// are ignored so the block can live inside a scenario config.
    static CurveSet from_stream(std::istream& in) {
        CurveSet set;
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (auto hash = line.find_first_of("#;"); hash != std::string::npos) line.erase(hash);
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '[') continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("curve file line " + std::to_string(line_no) + ": expected 'road = B C D E'");
            std::string key = line.substr(0, eq);
            key.erase(key.find_last_not_of(" \t") + 1);
            key.erase(0, key.find_first_not_of(" \t"));
            auto road = parse_road(key);
            if (!road) throw ConfigError("curve file line " + std::to_string(line_no) + ": unknown road '" + key + "'");
            std::istringstream values(line.substr(eq + 1));
            MuLambdaCurve c;
            if (!(values >> c.B >> c.C >> c.D >> c.E))
                throw ConfigError("curve file line " + std::to_string(line_no) + ": expected four numbers");
            set.set_curve(*road, c);
        }
        return set;
    }

    static CurveSet from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open curve file '" + path + "'");
        return from_stream(in);
    }

private:
    void rebuild() {
        for (RoadType road : kAllRoads) tables_[index_of(road)] = build_table(curves_[index_of(road)], kDefaultTableSize);
    }

    std::array<MuLambdaCurve, kRoadCount> curves_;
    std::array<MuLambdaTable, kRoadCount> tables_;
};

/// Process-wide default curve set.
inline const CurveSet& default_curves() {
    static const CurveSet set;
    return set;
}

inline MuLambdaTable build_table(RoadType road, std::size_t n) { return build_table(default_curves().curve(road), n); }

/// Slip ratio at the friction peak of `road`, taken from the default table.
inline double optimal_lambda(RoadType road) { return default_curves().optimal_lambda(road); }

}  // namespace tcsim
