#pragma once

// Acoustic front end: WAV I/O, framing, noise mixing, band-pass cleanup and
// the three feature families (LPC, log band energies, real cepstrum).

#include <tcsim/error.hpp>
#include <tcsim/tire_road.hpp>

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace tcsim {

struct AudioClip {
    std::vector<double> samples;
    int sample_rate = 16000;
    std::optional<RoadType> label;

    double duration() const noexcept { return static_cast<double>(samples.size()) / sample_rate; }
};

inline constexpr int kDefaultSampleRate = 16000;
inline constexpr double kFrameSeconds = 0.1;
inline constexpr double kLogFloor = 1e-10;
inline constexpr int kLpcOrder = 10;
inline constexpr int kBandCount = 5;
inline constexpr int kCepstrumCount = 5;
inline constexpr std::size_t kRawFeatureCount = kLpcOrder + kBandCount + kCepstrumCount;
inline constexpr double kBandLowHz = 50.0;

inline bool supported_rate(int rate) noexcept { return rate == 16000 || rate == 44100; }

inline void validate(const AudioClip& clip) {
    if (!supported_rate(clip.sample_rate)) throw ConfigError("sample rate must be 16000 or 44100 Hz");
    if (clip.samples.empty()) throw ConfigError("audio clip is empty");
    for (double v : clip.samples)
        if (!std::isfinite(v)) throw NumericError("audio clip contains non-finite samples");
}

// ---------------------------------------------------------------------------
// WAV

class WavError : public IoError {
public:
    enum class Kind { Missing, Malformed, NotPcm16, NotMono, UnsupportedRate };

    WavError(Kind kind, const std::string& what) : IoError(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

namespace detail {

inline std::uint32_t read_le32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_le16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_le32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_le16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace detail

/// RIFF/WAVE, PCM 16-bit little-endian, mono. Samples are scaled by 1/32768.
inline AudioClip load_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WavError(WavError::Kind::Missing, "cannot open WAV file '" + path + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw WavError(WavError::Kind::Malformed, "'" + path + "' is not a RIFF/WAVE file");

    bool have_fmt = false;
    int rate = 0;
    std::optional<AudioClip> clip;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        const std::uint32_t size = detail::read_le32(chunk + 4);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size()) throw WavError(WavError::Kind::Malformed, "truncated chunk in '" + path + "'");
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (size < 16) throw WavError(WavError::Kind::Malformed, "short fmt chunk in '" + path + "'");
            const auto format = detail::read_le16(bytes.data() + body);
            const auto channels = detail::read_le16(bytes.data() + body + 2);
            rate = static_cast<int>(detail::read_le32(bytes.data() + body + 4));
            const auto bits = detail::read_le16(bytes.data() + body + 14);
            if (format != 1 || bits != 16) throw WavError(WavError::Kind::NotPcm16, "'" + path + "' is not 16-bit PCM");
            if (channels != 1)
                throw WavError(WavError::Kind::NotMono,
                               "'" + path + "' has " + std::to_string(channels) + " channels, expected 1");
            if (!supported_rate(rate))
                throw WavError(WavError::Kind::UnsupportedRate,
                               "'" + path + "' has unsupported sample rate " + std::to_string(rate));
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            if (!have_fmt) throw WavError(WavError::Kind::Malformed, "data chunk before fmt chunk in '" + path + "'");
            AudioClip c;
            c.sample_rate = rate;
            c.samples.resize(size / 2);
            for (std::size_t i = 0; i < c.samples.size(); ++i) {
                const auto raw = static_cast<std::int16_t>(detail::read_le16(bytes.data() + body + 2 * i));
                c.samples[i] = static_cast<double>(raw) / 32768.0;
            }
            clip = std::move(c);
        }
        pos = body + size + (size & 1u);
    }
    if (!clip) throw WavError(WavError::Kind::Malformed, "'" + path + "' has no data chunk");
    if (clip->samples.empty()) throw WavError(WavError::Kind::Malformed, "'" + path + "' holds no samples");
    return *clip;
}

inline std::int16_t to_pcm16(double v) {
    const double scaled = std::round(std::clamp(v, -1.0, 1.0) * 32768.0);
    return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

inline void save_wav(const std::string& path, const AudioClip& clip) {
    const auto n = static_cast<std::uint32_t>(clip.samples.size());
    std::string out;
    out.reserve(44 + 2 * n);
    out += "RIFF";
    detail::put_le32(out, 36 + 2 * n);
    out += "WAVEfmt ";
    detail::put_le32(out, 16);
    detail::put_le16(out, 1);
    detail::put_le16(out, 1);
    detail::put_le32(out, static_cast<std::uint32_t>(clip.sample_rate));
    detail::put_le32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
    detail::put_le16(out, 2);
    detail::put_le16(out, 16);
    out += "data";
    detail::put_le32(out, 2 * n);
    for (double v : clip.samples) detail::put_le16(out, static_cast<std::uint16_t>(to_pcm16(v)));
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write WAV file '" + path + "'");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Frames

struct Frame {
    std::vector<double> samples;
    std::size_t origin_offset = 0;
    int sample_rate = kDefaultSampleRate;
};

inline std::size_t frame_length(int sample_rate) {
    return static_cast<std::size_t>(std::lround(kFrameSeconds * sample_rate));
}

inline Frame frame_at(const AudioClip& clip, std::size_t offset) {
    const std::size_t len = frame_length(clip.sample_rate);
    if (offset + len > clip.samples.size()) throw ConfigError("frame extends past the end of the clip");
    Frame f;
    f.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                     clip.samples.begin() + static_cast<std::ptrdiff_t>(offset + len));
    f.origin_offset = offset;
    f.sample_rate = clip.sample_rate;
    return f;
}

/// n non-overlapping 0.1 s frames at uniformly random offsets. The free
/// slack is split by n sorted uniform draws, so frames never overlap.
inline std::vector<Frame> sample_frames(const AudioClip& clip, std::size_t n, std::uint64_t seed) {
    const std::size_t len = frame_length(clip.sample_rate);
    if (n == 0) return {};
    if (n * len > clip.samples.size())
        throw ConfigError("clip too short for " + std::to_string(n) + " frames of " + std::to_string(len) +
                          " samples");
    const std::size_t slack = clip.samples.size() - n * len;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, slack);
    std::vector<std::size_t> cuts(n);
    for (auto& c : cuts) c = pick(rng);
    std::sort(cuts.begin(), cuts.end());
    std::vector<Frame> frames;
    frames.reserve(n);
    for (std::size_t i = 0; i < n; ++i) frames.push_back(frame_at(clip, cuts[i] + i * len));
    return frames;
}

// ---------------------------------------------------------------------------
// Spectra

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

namespace detail {

// FFTW planning is not thread-safe; execution with the new-array interface is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace detail

/// Real-input DFT, zero-padded to `nfft`. Returns bins 0..nfft/2.
inline std::vector<std::complex<double>> rfft(const std::vector<double>& x, std::size_t nfft) {
    if (nfft < x.size()) throw ConfigError("rfft: transform shorter than input");
    const std::size_t nbins = nfft / 2 + 1;
    double* in = fftw_alloc_real(nfft);
    fftw_complex* out = fftw_alloc_complex(nbins);
    fftw_plan plan;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(nfft), in, out, FFTW_ESTIMATE);
    }
    std::fill(in, in + nfft, 0.0);
    std::copy(x.begin(), x.end(), in);
    fftw_execute(plan);
    std::vector<std::complex<double>> bins(nbins);
    for (std::size_t k = 0; k < nbins; ++k) bins[k] = {out[k][0], out[k][1]};
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
    return bins;
}

/// Inverse of rfft for a real, even-length sequence given its half spectrum.
/// Unnormalized FFTW result is divided by nfft.
inline std::vector<double> irfft(const std::vector<std::complex<double>>& bins, std::size_t nfft) {
    if (bins.size() != nfft / 2 + 1) throw ConfigError("irfft: bin count does not match transform size");
    fftw_complex* in = fftw_alloc_complex(bins.size());
    double* out = fftw_alloc_real(nfft);
    fftw_plan plan;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_c2r_1d(static_cast<int>(nfft), in, out, FFTW_ESTIMATE);
    }
    for (std::size_t k = 0; k < bins.size(); ++k) {
        in[k][0] = bins[k].real();
        in[k][1] = bins[k].imag();
    }
    fftw_execute(plan);
    std::vector<double> x(out, out + nfft);
    for (auto& v : x) v /= static_cast<double>(nfft);
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
    return x;
}

/// Symmetric Hann window.
inline std::vector<double> hann_windowed(const std::vector<double>& x) {
    std::vector<double> y(x.size());
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = x[i] * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / (n - 1.0)));
    return y;
}

/// One-sided periodogram of the Hann-windowed frame, scaled so the bins sum
/// to the windowed time-domain energy.
inline std::vector<double> periodogram(const Frame& frame) {
    const auto xw = hann_windowed(frame.samples);
    const std::size_t nfft = next_pow2(xw.size());
    const auto bins = rfft(xw, nfft);
    std::vector<double> p(bins.size());
    for (std::size_t k = 0; k < bins.size(); ++k) {
        const bool edge = (k == 0) || (k == nfft / 2);
        p[k] = (edge ? 1.0 : 2.0) * std::norm(bins[k]) / static_cast<double>(nfft);
    }
    return p;
}

/// Log-spaced band edges from 50 Hz to Nyquist.
inline std::array<double, kBandCount + 1> band_edges(int sample_rate) {
    std::array<double, kBandCount + 1> edges{};
    const double lo = std::log(kBandLowHz);
    const double hi = std::log(0.5 * sample_rate);
    for (int b = 0; b <= kBandCount; ++b) edges[b] = std::exp(lo + (hi - lo) * b / kBandCount);
    edges.front() = kBandLowHz;
    edges.back() = 0.5 * sample_rate;
    return edges;
}

/// Linear band energies; bin k at k fs / nfft falls in [edge_b, edge_b+1),
/// the last band also takes the Nyquist bin.
inline std::array<double, kBandCount> band_energies_linear(const Frame& frame) {
    const auto p = periodogram(frame);
    const std::size_t nfft = 2 * (p.size() - 1);
    const auto edges = band_edges(frame.sample_rate);
    std::array<double, kBandCount> e{};
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double f = static_cast<double>(k) * frame.sample_rate / static_cast<double>(nfft);
        if (f < edges.front()) continue;
        for (int b = 0; b < kBandCount; ++b) {
            const bool last = b + 1 == kBandCount;
            if (f >= edges[b] && (f < edges[b + 1] || (last && f <= edges[b + 1]))) {
                e[b] += p[k];
                break;
            }
        }
    }
    return e;
}

inline std::array<double, kBandCount> band_energies(const Frame& frame) {
    auto e = band_energies_linear(frame);
    for (auto& v : e) v = std::log10(v + kLogFloor);
    return e;
}

/// Real cepstrum of the Hann-windowed frame, coefficients c[1..count].
inline std::vector<double> cepstrum(const Frame& frame, int count = kCepstrumCount) {
    const auto xw = hann_windowed(frame.samples);
    const std::size_t nfft = next_pow2(xw.size());
    if (count < 1 || static_cast<std::size_t>(count) >= nfft / 2) throw ConfigError("cepstrum: bad coefficient count");
    auto bins = rfft(xw, nfft);
    for (auto& b : bins) b = std::log(std::abs(b) + kLogFloor);
    const auto c = irfft(bins, nfft);
    return {c.begin() + 1, c.begin() + 1 + count};
}

// ---------------------------------------------------------------------------
// LPC

struct LpcResult {
    std::vector<double> a;            // predictor: x[n] ~ sum a_k x[n-k]
    std::vector<double> reflection;   // k_1..k_p
    double error = 0.0;               // final prediction error power
};

/// Autocorrelation method with the Levinson-Durbin recursion.
inline LpcResult lpc_analysis(const std::vector<double>& x, int order = kLpcOrder) {
    const auto n = x.size();
    if (order < 1 || n <= static_cast<std::size_t>(2 * order)) throw ConfigError("lpc: frame too short for order");
    std::vector<double> r(order + 1, 0.0);
    for (int lag = 0; lag <= order; ++lag)
        for (std::size_t i = static_cast<std::size_t>(lag); i < n; ++i) r[lag] += x[i] * x[i - lag];
    if (!(r[0] > 0.0)) throw NumericError("lpc: degenerate (all-zero) frame");

    LpcResult res;
    res.a.assign(order, 0.0);
    res.reflection.assign(order, 0.0);
    std::vector<double> prev(order, 0.0);
    double err = r[0];
    for (int i = 0; i < order; ++i) {
        double acc = r[i + 1];
        for (int j = 0; j < i; ++j) acc -= prev[j] * r[i - j];
        const double k = acc / err;
        res.a[i] = k;
        for (int j = 0; j < i; ++j) res.a[j] = prev[j] - k * prev[i - 1 - j];
        res.reflection[i] = k;
        err *= (1.0 - k * k);
        if (!(err > 0.0)) throw NumericError("lpc: prediction error vanished");
        prev = res.a;
    }
    res.error = err;
    return res;
}

inline std::vector<double> lpc(const Frame& frame, int order = kLpcOrder) { return lpc_analysis(frame.samples, order).a; }

// ---------------------------------------------------------------------------
// Feature vector

using RawFeatureVector = std::array<double, kRawFeatureCount>;

/// [lpc_1..lpc_10, band_1..band_5, cep_1..cep_5]
inline RawFeatureVector extract_raw(const Frame& frame) {
    RawFeatureVector v{};
    const auto a = lpc(frame);
    const auto bands = band_energies(frame);
    const auto cep = cepstrum(frame);
    std::copy(a.begin(), a.end(), v.begin());
    std::copy(bands.begin(), bands.end(), v.begin() + kLpcOrder);
    std::copy(cep.begin(), cep.end(), v.begin() + kLpcOrder + kBandCount);
    for (double x : v)
        if (!std::isfinite(x)) throw NumericError("feature vector contains non-finite values");
    return v;
}

// ---------------------------------------------------------------------------
// Noise handling

inline double mean_power(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    double s = 0.0;
    for (double v : x) s += v * v;
    return s / static_cast<double>(x.size());
}

/// Noise tiled or truncated to `n` samples.
inline std::vector<double> tile_to(const std::vector<double>& noise, std::size_t n) {
    if (noise.empty()) throw ConfigError("noise clip is empty");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = noise[i % noise.size()];
    return out;
}

/// Gain applied to the tiled noise so that 10 log10(Ps / Pn) = snr_db.
/// An infinite SNR gives gain 0.
inline double noise_gain(const std::vector<double>& signal, const std::vector<double>& noise_tiled, double snr_db) {
    if (std::isinf(snr_db) && snr_db > 0) return 0.0;
    const double pn = mean_power(noise_tiled);
    if (!(pn > 0.0)) throw NumericError("noise clip has zero power");
    return std::sqrt(mean_power(signal) / (pn * std::pow(10.0, snr_db / 10.0)));
}

inline AudioClip mix_noise(const AudioClip& clip, const AudioClip& noise, double snr_db) {
    if (clip.sample_rate != noise.sample_rate) throw ConfigError("mix_noise: sample rates differ");
    if (std::isnan(snr_db)) throw ConfigError("mix_noise: SNR is NaN");
    const auto tiled = tile_to(noise.samples, clip.samples.size());
    const double g = noise_gain(clip.samples, tiled, snr_db);
    AudioClip out = clip;
    if (g == 0.0) return out;
    double peak = 0.0;
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        out.samples[i] += g * tiled[i];
        peak = std::max(peak, std::abs(out.samples[i]));
    }
    if (peak > 1.0)
        for (auto& v : out.samples) v /= peak;
    return out;
}

inline constexpr int kDenoiseTaps = 255;

/// Windowed-sinc band-pass (Blackman window). low_hz = 0 gives a low-pass.
inline std::vector<double> bandpass_taps(double low_hz, double high_hz, int sample_rate, int taps = kDenoiseTaps) {
    const double nyq = 0.5 * sample_rate;
    if (!(low_hz >= 0.0 && low_hz < high_hz && high_hz <= nyq)) throw ConfigError("denoise: invalid pass band");
    if (taps < 3 || taps % 2 == 0) throw ConfigError("denoise: tap count must be odd");
    const int mid = taps / 2;
    const double fl = low_hz / sample_rate;
    const double fh = high_hz / sample_rate;
    auto sinc_lp = [](double fc, int m) {
        if (m == 0) return 2.0 * fc;
        return std::sin(2.0 * std::numbers::pi * fc * m) / (std::numbers::pi * m);
    };
    std::vector<double> h(taps);
    for (int i = 0; i < taps; ++i) {
        const int m = i - mid;
        const double ideal = sinc_lp(fh, m) - (fl > 0.0 ? sinc_lp(fl, m) : 0.0);
        const double x = 2.0 * std::numbers::pi * i / (taps - 1);
        const double w = 0.42 - 0.5 * std::cos(x) + 0.08 * std::cos(2.0 * x);
        h[i] = ideal * w;
    }
    return h;
}

/// Linear-phase FIR band-pass; output is delay-compensated and has the
/// input's length.
inline AudioClip denoise(const AudioClip& clip, double low_hz, double high_hz) {
    const auto h = bandpass_taps(low_hz, high_hz, clip.sample_rate);
    const auto mid = static_cast<std::ptrdiff_t>(h.size() / 2);
    const auto n = static_cast<std::ptrdiff_t>(clip.samples.size());
    AudioClip out = clip;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(h.size()); ++j) {
            const std::ptrdiff_t src = i + mid - j;
            if (src >= 0 && src < n) acc += h[static_cast<std::size_t>(j)] * clip.samples[static_cast<std::size_t>(src)];
        }
        out.samples[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

}  // namespace tcsim
