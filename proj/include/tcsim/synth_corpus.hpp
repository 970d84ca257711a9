#pragma once

// Synthetic tire/road audio: AR-filtered excitation per road class, a shared
// traffic-noise bed, and the labelled 30-frames-per-class feature corpus.

#include <tcsim/classifier.hpp>
#include <tcsim/dsp.hpp>
#include <tcsim/error.hpp>
#include <tcsim/tire_road.hpp>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace tcsim {

enum class Excitation { White, Impulsive };

struct ClassSpec {
    RoadType road = RoadType::Asphalt;
    std::vector<std::complex<double>> ar_poles;  // one of each conjugate pair; real poles allowed
    Excitation excitation = Excitation::White;
    double impulse_rate = 0.0;   // impulses per second
    double impulse_amp = 0.0;    // relative to unit-variance white excitation
    double gain = 1.0;
};

/// Pole of radius r at centre frequency f (Hz).
inline std::complex<double> pole_at(double f_hz, double radius, int sample_rate = kDefaultSampleRate) {
    return std::polar(radius, 2.0 * std::numbers::pi * f_hz / sample_rate);
}

inline void validate(const ClassSpec& s) {
    if (s.ar_poles.empty() || s.ar_poles.size() > 4) throw ConfigError("class spec needs 1 to 4 AR poles");
    for (const auto& p : s.ar_poles)
        if (!(std::abs(p) < 1.0)) throw ConfigError("class spec pole outside the unit circle");
    if (!(s.gain > 0.0)) throw ConfigError("class spec gain must be positive");
    if (s.excitation == Excitation::Impulsive && !(s.impulse_rate > 0.0))
        throw ConfigError("impulsive excitation needs a positive impulse rate");
}

inline ClassSpec default_class_spec(RoadType road, int sample_rate = kDefaultSampleRate) {
    ClassSpec s;
    s.road = road;
    switch (road) {
        case RoadType::Asphalt:
            s.ar_poles = {pole_at(800.0, 0.80, sample_rate), pole_at(2500.0, 0.20, sample_rate)};
            break;
        case RoadType::Stone:
            s.ar_poles = {pole_at(1800.0, 0.95, sample_rate), pole_at(600.0, 0.60, sample_rate)};
            s.excitation = Excitation::Impulsive;
            s.impulse_rate = 40.0;
            s.impulse_amp = 5.0;
            break;
        case RoadType::Gravel:
            s.ar_poles = {pole_at(2500.0, 0.96, sample_rate), pole_at(5500.0, 0.60, sample_rate)};
            s.excitation = Excitation::Impulsive;
            s.impulse_rate = 300.0;
            s.impulse_amp = 6.0;
            break;
        case RoadType::Snow:
            s.ar_poles = {pole_at(300.0, 0.92, sample_rate), {0.85, 0.0}};
            break;
    }
    return s;
}

/// Direct-form denominator 1 + a_1 z^-1 + ... from the poles (conjugates added
/// for complex entries).
inline std::vector<double> ar_polynomial(const std::vector<std::complex<double>>& poles) {
    std::vector<std::complex<double>> roots;
    for (const auto& p : poles) {
        roots.push_back(p);
        if (std::abs(p.imag()) > 1e-15) roots.push_back(std::conj(p));
    }
    std::vector<std::complex<double>> c{1.0};
    for (const auto& r : roots) {
        std::vector<std::complex<double>> next(c.size() + 1, 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) {
            next[i] += c[i];
            next[i + 1] -= r * c[i];
        }
        c = std::move(next);
    }
    std::vector<double> a(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) a[i] = c[i].real();
    return a;
}

inline void peak_normalize(std::vector<double>& x, double peak) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    if (m > 0.0)
        for (auto& v : x) v *= peak / m;
}

inline constexpr double kSynthPeak = 0.9;

/// AR-filtered white Gaussian excitation, plus Poisson impulses of random
/// sign for impulsive classes, peak-normalized to 0.9.
inline AudioClip synth_clip(const ClassSpec& spec, double duration_s, int sample_rate, std::uint64_t seed) {
    validate(spec);
    if (!(duration_s >= 0.5)) throw ConfigError("synthetic clips must last at least 0.5 s");
    if (!supported_rate(sample_rate)) throw ConfigError("sample rate must be 16000 or 44100 Hz");
    const auto n = static_cast<std::size_t>(std::lround(duration_s * sample_rate));
    const auto a = ar_polynomial(spec.ar_poles);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> white(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double p_impulse = spec.excitation == Excitation::Impulsive ? spec.impulse_rate / sample_rate : 0.0;

    AudioClip clip;
    clip.sample_rate = sample_rate;
    clip.label = spec.road;
    clip.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double e = white(rng);
        if (p_impulse > 0.0 && unit(rng) < p_impulse) e += (unit(rng) < 0.5 ? -1.0 : 1.0) * spec.impulse_amp;
        double y = spec.gain * e;
        for (std::size_t k = 1; k < a.size() && k <= i; ++k) y -= a[k] * clip.samples[i - k];
        clip.samples[i] = y;
    }
    peak_normalize(clip.samples, kSynthPeak);
    return clip;
}

/// Shared background: low-frequency rumble (a slow random walk with
/// leakage) over a broadband hiss, with a slowly varying level.
inline AudioClip traffic_noise(double duration_s, int sample_rate, std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(std::lround(duration_s * sample_rate));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> white(0.0, 1.0);
    AudioClip clip;
    clip.sample_rate = sample_rate;
    clip.samples.resize(n);
    double rumble = 0.0;
    double level = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        rumble = 0.995 * rumble + 0.1 * white(rng);
        level = 0.9995 * level + 0.03 * white(rng);
        clip.samples[i] = std::exp(level) * (rumble + 0.5 * white(rng));
    }
    peak_normalize(clip.samples, kSynthPeak);
    return clip;
}

struct CorpusOptions {
    double clip_seconds = 3.5;
    int sample_rate = kDefaultSampleRate;
    std::size_t frames_per_class = 30;
    double snr_db = 10.0;
    std::array<ClassSpec, kRoadCount> specs = {default_class_spec(RoadType::Asphalt),
                                               default_class_spec(RoadType::Snow),
                                               default_class_spec(RoadType::Stone),
                                               default_class_spec(RoadType::Gravel)};
};

/// Seed streams per road so classes are independent of iteration order.
inline std::uint64_t class_seed(std::uint64_t seed, RoadType road, std::uint64_t salt = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index_of(road)), static_cast<std::uint32_t>(salt)};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// One noisy recording of a road class.
inline AudioClip synth_record(const CorpusOptions& opt, RoadType road, std::uint64_t seed) {
    const auto& spec = opt.specs[index_of(road)];
    auto clip = synth_clip(spec, opt.clip_seconds, opt.sample_rate, class_seed(seed, road, 1));
    const auto noise = traffic_noise(opt.clip_seconds, opt.sample_rate, class_seed(seed, road, 2));
    return mix_noise(clip, noise, opt.snr_db);
}

/// 30 frames per class from one noisy record each, features extracted.
inline FeatureDataset build_corpus(std::uint64_t seed, const CorpusOptions& opt = {}) {
    FeatureDataset ds;
    for (RoadType road : kAllRoads) {
        const auto clip = synth_record(opt, road, seed);
        for (const auto& frame : sample_frames(clip, opt.frames_per_class, class_seed(seed, road, 3))) {
            const auto v = extract_raw(frame);
            ds.add(std::vector<double>(v.begin(), v.end()), road);
        }
    }
    return ds;
}

}  // namespace tcsim
