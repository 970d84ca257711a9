#pragma once

// Road-type classification on acoustic features: normalization, pruning by
// intra-class variance, Gaussian KL separability, a small MLP trained with
// full-batch backprop, evaluation, persistence and the road -> friction
// lookup that closes the estimation loop.

#include <tcsim/dsp.hpp>
#include <tcsim/error.hpp>
#include <tcsim/format.hpp>
#include <tcsim/tire_road.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace tcsim {

struct Normalization {
    std::vector<double> mean;
    std::vector<double> scale;

    bool fitted() const noexcept { return !mean.empty(); }

    std::vector<double> apply(const std::vector<double>& x) const {
        if (x.size() != mean.size()) throw ConfigError("normalization: dimension mismatch");
        std::vector<double> y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mean[i]) / scale[i];
        return y;
    }
};

struct FeatureDataset {
    std::vector<std::vector<double>> rows;
    std::vector<RoadType> labels;
    Normalization norm;

    std::size_t size() const noexcept { return rows.size(); }
    std::size_t dim() const noexcept { return rows.empty() ? 0 : rows.front().size(); }

    void add(std::vector<double> row, RoadType label) {
        if (!rows.empty() && row.size() != dim()) throw ConfigError("dataset rows must share one dimension");
        rows.push_back(std::move(row));
        labels.push_back(label);
    }

    std::size_t count(RoadType road) const {
        return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), road));
    }

    std::vector<double> normalized(std::size_t i) const { return norm.fitted() ? norm.apply(rows[i]) : rows[i]; }
};

/// z-score per feature; constant features keep scale 1.
inline Normalization fit_normalization(const FeatureDataset& ds) {
    if (ds.size() == 0) throw ConfigError("cannot normalize an empty dataset");
    const std::size_t d = ds.dim();
    Normalization n;
    n.mean.assign(d, 0.0);
    n.scale.assign(d, 0.0);
    for (const auto& r : ds.rows)
        for (std::size_t j = 0; j < d; ++j) n.mean[j] += r[j];
    for (auto& m : n.mean) m /= static_cast<double>(ds.size());
    for (const auto& r : ds.rows)
        for (std::size_t j = 0; j < d; ++j) n.scale[j] += (r[j] - n.mean[j]) * (r[j] - n.mean[j]);
    for (auto& s : n.scale) {
        s = std::sqrt(s / static_cast<double>(ds.size()));
        if (!(s > 1e-12)) s = 1.0;
    }
    return n;
}

struct Split {
    FeatureDataset train;
    FeatureDataset test;
};

/// Stratified split: per class, a seeded shuffle, round(train_fraction * n)
/// rows to train. Row order inside each part follows the original order.
inline Split stratified_split(const FeatureDataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
    std::mt19937_64 rng(seed);
    std::vector<bool> to_train(ds.size(), false);
    for (RoadType road : kAllRoads) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (ds.labels[i] == road) idx.push_back(i);
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto k = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < k; ++i) to_train[idx[i]] = true;
    }
    Split s;
    for (std::size_t i = 0; i < ds.size(); ++i) (to_train[i] ? s.train : s.test).add(ds.rows[i], ds.labels[i]);
    return s;
}

// ---------------------------------------------------------------------------
// Pruning

struct SelectionMask {
    std::vector<std::size_t> indices;
    int lpc_kept = 0;
    int band_kept = 0;
    int cep_kept = 0;

    std::vector<double> apply(const std::vector<double>& x) const {
        std::vector<double> y;
        y.reserve(indices.size());
        for (auto i : indices) {
            if (i >= x.size()) throw ConfigError("selection mask index out of range");
            y.push_back(x[i]);
        }
        return y;
    }

    static SelectionMask all(std::size_t dim) {
        SelectionMask m;
        m.indices.resize(dim);
        std::iota(m.indices.begin(), m.indices.end(), std::size_t{0});
        return m;
    }
};

struct FamilyQuota {
    int lpc = 3;
    int band = 2;
    int cep = 2;
};

/// Mean over classes of the per-class (population) variance of feature j,
/// computed on normalized values.
inline std::vector<double> intra_class_variance(const FeatureDataset& ds) {
    const std::size_t d = ds.dim();
    std::vector<double> out(d, 0.0);
    int classes = 0;
    for (RoadType road : kAllRoads) {
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (ds.labels[i] == road) rows.push_back(ds.normalized(i));
        if (rows.empty()) continue;
        ++classes;
        for (std::size_t j = 0; j < d; ++j) {
            double m = 0.0;
            for (const auto& r : rows) m += r[j];
            m /= static_cast<double>(rows.size());
            double v = 0.0;
            for (const auto& r : rows) v += (r[j] - m) * (r[j] - m);
            out[j] += v / static_cast<double>(rows.size());
        }
    }
    for (auto& v : out) v /= classes;
    return out;
}

/// Keeps the lowest-variance features inside each family; ties go to the
/// lower index. The returned indices are sorted.
inline SelectionMask prune_features(const FeatureDataset& ds, FamilyQuota quota = {}) {
    if (ds.dim() != kRawFeatureCount) throw ConfigError("prune_features expects 20-dimensional rows");
    for (RoadType road : kAllRoads)
        if (ds.count(road) == 1) throw ConfigError("prune_features needs at least two rows per present class");
    const auto var = intra_class_variance(ds);
    SelectionMask mask;
    auto pick = [&](std::size_t begin, std::size_t end, int keep) {
        std::vector<std::size_t> idx(end - begin);
        std::iota(idx.begin(), idx.end(), begin);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return var[a] < var[b]; });
        for (int i = 0; i < keep; ++i) mask.indices.push_back(idx[static_cast<std::size_t>(i)]);
    };
    pick(0, kLpcOrder, quota.lpc);
    pick(kLpcOrder, kLpcOrder + kBandCount, quota.band);
    pick(kLpcOrder + kBandCount, kRawFeatureCount, quota.cep);
    std::sort(mask.indices.begin(), mask.indices.end());
    mask.lpc_kept = quota.lpc;
    mask.band_kept = quota.band;
    mask.cep_kept = quota.cep;
    return mask;
}

// ---------------------------------------------------------------------------
// KL separability

inline constexpr double kVarianceFloor = 1e-9;

struct DiagGaussian {
    std::vector<double> mean;
    std::vector<double> var;
};

/// Symmetric KL(A||B) + KL(B||A) between diagonal Gaussians.
inline double symmetric_kl(const DiagGaussian& a, const DiagGaussian& b) {
    if (a.mean.size() != b.mean.size()) throw ConfigError("KL: dimension mismatch");
    double d = 0.0;
    for (std::size_t j = 0; j < a.mean.size(); ++j) {
        const double va = std::max(a.var[j], kVarianceFloor);
        const double vb = std::max(b.var[j], kVarianceFloor);
        const double dm = a.mean[j] - b.mean[j];
        d += 0.5 * (va / vb + vb / va) - 1.0 + 0.5 * dm * dm * (1.0 / va + 1.0 / vb);
    }
    return d;
}

inline DiagGaussian fit_gaussian(const std::vector<std::vector<double>>& rows) {
    if (rows.size() < 2) throw ConfigError("Gaussian fit needs at least two rows");
    const std::size_t d = rows.front().size();
    DiagGaussian g{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    for (const auto& r : rows)
        for (std::size_t j = 0; j < d; ++j) g.mean[j] += r[j];
    for (auto& m : g.mean) m /= static_cast<double>(rows.size());
    for (const auto& r : rows)
        for (std::size_t j = 0; j < d; ++j) g.var[j] += (r[j] - g.mean[j]) * (r[j] - g.mean[j]);
    for (auto& v : g.var) v = std::max(v / static_cast<double>(rows.size() - 1), kVarianceFloor);
    return g;
}

inline std::vector<std::vector<double>> class_rows(const FeatureDataset& ds, RoadType road, const SelectionMask& mask) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.labels[i] == road) rows.push_back(mask.apply(ds.normalized(i)));
    return rows;
}

inline double kl_distance(const FeatureDataset& ds, RoadType a, RoadType b, const SelectionMask& mask) {
    const auto ra = class_rows(ds, a, mask);
    const auto rb = class_rows(ds, b, mask);
    if (ra.size() < 2 || rb.size() < 2)
        throw ConfigError("kl_distance: class '" + std::string(to_string(ra.size() < 2 ? a : b)) +
                          "' needs at least two rows");
    return symmetric_kl(fit_gaussian(ra), fit_gaussian(rb));
}

/// KL distance between two random halves of one class; the largest over
/// `reps` seeded splits.
inline double intra_class_split_distance(const FeatureDataset& ds, RoadType road, const SelectionMask& mask,
                                         std::uint64_t seed, int reps = 1) {
    auto rows = class_rows(ds, road, mask);
    if (rows.size() < 4) throw ConfigError("intra-class split needs at least four rows");
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int r = 0; r < reps; ++r) {
        std::shuffle(rows.begin(), rows.end(), rng);
        const auto half = static_cast<std::ptrdiff_t>(rows.size() / 2);
        std::vector<std::vector<double>> a(rows.begin(), rows.begin() + half);
        std::vector<std::vector<double>> b(rows.begin() + half, rows.end());
        worst = std::max(worst, symmetric_kl(fit_gaussian(a), fit_gaussian(b)));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// MLP

inline constexpr std::array<std::size_t, 3> kHiddenSizes = {4, 3, 2};

struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w;  // row-major out x in
    std::vector<double> b;
    bool logistic = false;  // output layer; hidden layers use tanh

    double weight(std::size_t o, std::size_t i) const { return w[o * in + i]; }
};

struct MlpModel {
    std::vector<DenseLayer> layers;
    SelectionMask mask;
    Normalization norm;  // over the selected features
    std::uint64_t seed = 0;

    std::vector<std::size_t> layer_sizes() const {
        std::vector<std::size_t> s;
        if (layers.empty()) return s;
        s.push_back(layers.front().in);
        for (const auto& l : layers) s.push_back(l.out);
        return s;
    }
    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in; }
};

inline void check_invariants(const MlpModel& m) {
    if (m.layers.size() != kHiddenSizes.size() + 1) throw ConfigError("MLP must have three hidden layers");
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const auto& L = m.layers[l];
        if (L.w.size() != L.in * L.out || L.b.size() != L.out) throw ConfigError("MLP layer storage mismatch");
        if (l > 0 && L.in != m.layers[l - 1].out) throw ConfigError("MLP layer dimensions do not chain");
        if (l < kHiddenSizes.size() && L.out != kHiddenSizes[l]) throw ConfigError("MLP hidden sizes must be 4-3-2");
    }
    if (m.layers.back().out != kRoadCount) throw ConfigError("MLP output size must be 4");
    if (m.mask.indices.size() != m.input_dim()) throw ConfigError("MLP input size does not match selection mask");
    if (m.norm.mean.size() != m.input_dim() || m.norm.scale.size() != m.input_dim())
        throw ConfigError("MLP normalization does not match input size");
}

inline MlpModel init_mlp(std::size_t input_dim, std::uint64_t seed) {
    MlpModel m;
    m.seed = seed;
    std::mt19937_64 rng(seed);
    std::size_t prev = input_dim;
    std::vector<std::size_t> sizes(kHiddenSizes.begin(), kHiddenSizes.end());
    sizes.push_back(kRoadCount);
    for (std::size_t l = 0; l < sizes.size(); ++l) {
        DenseLayer L;
        L.in = prev;
        L.out = sizes[l];
        L.logistic = l + 1 == sizes.size();
        const double limit = std::sqrt(6.0 / static_cast<double>(L.in + L.out));
        std::uniform_real_distribution<double> u(-limit, limit);
        L.w.resize(L.in * L.out);
        for (auto& w : L.w) w = u(rng);
        L.b.assign(L.out, 0.0);
        m.layers.push_back(std::move(L));
        prev = sizes[l];
    }
    return m;
}

namespace detail {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Activations of every layer, input first.
inline std::vector<std::vector<double>> forward_all(const MlpModel& m, const std::vector<double>& x) {
    std::vector<std::vector<double>> acts{x};
    for (const auto& L : m.layers) {
        const auto& in = acts.back();
        std::vector<double> out(L.out);
        for (std::size_t o = 0; o < L.out; ++o) {
            double z = L.b[o];
            for (std::size_t i = 0; i < L.in; ++i) z += L.w[o * L.in + i] * in[i];
            out[o] = L.logistic ? logistic(z) : std::tanh(z);
        }
        acts.push_back(std::move(out));
    }
    return acts;
}

}  // namespace detail

/// Network outputs for an already normalized input.
inline std::vector<double> forward(const MlpModel& m, const std::vector<double>& x_norm) {
    if (x_norm.size() != m.input_dim()) throw ConfigError("MLP input has wrong dimension");
    return detail::forward_all(m, x_norm).back();
}

struct TrainOptions {
    int max_epochs = 4000;
    double learning_rate = 0.01;
    double target_loss = 1e-3;
};

struct TrainReport {
    int epochs = 0;
    double final_loss = 0.0;
};

inline std::vector<double> one_hot(RoadType road) {
    std::vector<double> t(kRoadCount, 0.0);
    t[index_of(road)] = 1.0;
    return t;
}

/// Mean squared error over samples and outputs.
inline double mse_loss(const MlpModel& m, const std::vector<std::vector<double>>& x, const std::vector<RoadType>& y) {
    double loss = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
        const auto out = forward(m, x[n]);
        const auto t = one_hot(y[n]);
        for (std::size_t k = 0; k < out.size(); ++k) loss += (out[k] - t[k]) * (out[k] - t[k]);
    }
    return loss / static_cast<double>(x.size() * kRoadCount);
}

/// Full-batch backprop on the MSE loss with Adam step sizes. Normalization
/// is fitted on the training rows and stored in the model.
inline MlpModel train_mlp(const FeatureDataset& train, const SelectionMask& mask, std::uint64_t seed,
                          const TrainOptions& opt = {}, TrainReport* report = nullptr) {
    if (train.size() == 0) throw ConfigError("training set is empty");
    if (mask.indices.empty()) throw ConfigError("selection mask is empty");
    FeatureDataset selected;
    for (std::size_t i = 0; i < train.size(); ++i) selected.add(mask.apply(train.rows[i]), train.labels[i]);
    MlpModel m = init_mlp(mask.indices.size(), seed);
    m.mask = mask;
    m.norm = fit_normalization(selected);
    std::vector<std::vector<double>> x;
    for (const auto& r : selected.rows) x.push_back(m.norm.apply(r));

    struct Moments {
        std::vector<double> mw, vw, mb, vb;
    };
    std::vector<Moments> mom;
    for (const auto& L : m.layers)
        mom.push_back({std::vector<double>(L.w.size(), 0.0), std::vector<double>(L.w.size(), 0.0),
                       std::vector<double>(L.b.size(), 0.0), std::vector<double>(L.b.size(), 0.0)});
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    const double scale = 2.0 / static_cast<double>(x.size() * kRoadCount);

    TrainReport rep;
    rep.final_loss = mse_loss(m, x, selected.labels);
    for (int epoch = 1; epoch <= opt.max_epochs && rep.final_loss >= opt.target_loss; ++epoch) {
        std::vector<std::vector<double>> gw, gb;
        for (const auto& L : m.layers) {
            gw.emplace_back(L.w.size(), 0.0);
            gb.emplace_back(L.b.size(), 0.0);
        }
        for (std::size_t n = 0; n < x.size(); ++n) {
            const auto acts = detail::forward_all(m, x[n]);
            const auto t = one_hot(selected.labels[n]);
            std::vector<double> delta(kRoadCount);
            const auto& y = acts.back();
            for (std::size_t k = 0; k < kRoadCount; ++k) delta[k] = scale * (y[k] - t[k]) * y[k] * (1.0 - y[k]);
            for (std::size_t l = m.layers.size(); l-- > 0;) {
                const auto& L = m.layers[l];
                const auto& in = acts[l];
                for (std::size_t o = 0; o < L.out; ++o) {
                    gb[l][o] += delta[o];
                    for (std::size_t i = 0; i < L.in; ++i) gw[l][o * L.in + i] += delta[o] * in[i];
                }
                if (l == 0) break;
                std::vector<double> back(L.in, 0.0);
                for (std::size_t i = 0; i < L.in; ++i) {
                    double s = 0.0;
                    for (std::size_t o = 0; o < L.out; ++o) s += L.w[o * L.in + i] * delta[o];
                    back[i] = s * (1.0 - in[i] * in[i]);  // tanh'
                }
                delta = std::move(back);
            }
        }
        const double c1 = 1.0 - std::pow(beta1, epoch);
        const double c2 = 1.0 - std::pow(beta2, epoch);
        for (std::size_t l = 0; l < m.layers.size(); ++l) {
            auto step = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& mm,
                            std::vector<double>& vv) {
                for (std::size_t i = 0; i < p.size(); ++i) {
                    mm[i] = beta1 * mm[i] + (1.0 - beta1) * g[i];
                    vv[i] = beta2 * vv[i] + (1.0 - beta2) * g[i] * g[i];
                    p[i] -= opt.learning_rate * (mm[i] / c1) / (std::sqrt(vv[i] / c2) + eps);
                }
            };
            step(m.layers[l].w, gw[l], mom[l].mw, mom[l].vw);
            step(m.layers[l].b, gb[l], mom[l].mb, mom[l].vb);
        }
        rep.epochs = epoch;
        rep.final_loss = mse_loss(m, x, selected.labels);
        if (!std::isfinite(rep.final_loss)) throw DivergenceError("MLP training loss became non-finite", epoch, 0.0);
    }
    if (report) *report = rep;
    return m;
}

struct Classification {
    RoadType road = RoadType::Asphalt;
    double confidence = 0.0;
    std::array<double, kRoadCount> share{};  // outputs normalized to sum 1
};

/// Classifies a selected (unnormalized) feature vector.
inline Classification classify(const MlpModel& m, const std::vector<double>& selected) {
    if (selected.size() != m.input_dim()) throw ConfigError("classify: expected " + std::to_string(m.input_dim()) +
                                                            " features, got " + std::to_string(selected.size()));
    const auto out = forward(m, m.norm.apply(selected));
    double sum = 0.0;
    for (double v : out) sum += v;
    Classification c;
    std::size_t best = 0;
    for (std::size_t k = 0; k < kRoadCount; ++k) {
        c.share[k] = sum > 0.0 ? out[k] / sum : 1.0 / kRoadCount;
        if (out[k] > out[best]) best = k;
    }
    c.road = kAllRoads[best];
    c.confidence = c.share[best];
    return c;
}

inline Classification classify_raw(const MlpModel& m, const std::vector<double>& raw) {
    return classify(m, m.mask.apply(raw));
}

struct ConfusionMatrix {
    // counts[predicted][actual]
    std::array<std::array<int, kRoadCount>, kRoadCount> counts{};
    double accuracy = 0.0;

    int total() const {
        int t = 0;
        for (const auto& row : counts)
            for (int c : row) t += c;
        return t;
    }
};

inline ConfusionMatrix confusion_matrix(const MlpModel& m, const FeatureDataset& test) {
    if (test.size() == 0) throw ConfigError("confusion_matrix: empty test set");
    ConfusionMatrix cm;
    int correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto c = classify_raw(m, test.rows[i]);
        ++cm.counts[index_of(c.road)][index_of(test.labels[i])];
        if (c.road == test.labels[i]) ++correct;
    }
    cm.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
    return cm;
}

/// Nearest class centroid in the z-scored selected space fitted on `train`.
inline double nearest_centroid_accuracy(const FeatureDataset& train, const FeatureDataset& test,
                                        const SelectionMask& mask) {
    FeatureDataset sel;
    for (std::size_t i = 0; i < train.size(); ++i) sel.add(mask.apply(train.rows[i]), train.labels[i]);
    const auto norm = fit_normalization(sel);
    std::array<std::vector<double>, kRoadCount> centroid;
    std::array<int, kRoadCount> n{};
    for (std::size_t i = 0; i < sel.size(); ++i) {
        const auto x = norm.apply(sel.rows[i]);
        auto& c = centroid[index_of(sel.labels[i])];
        if (c.empty()) c.assign(x.size(), 0.0);
        for (std::size_t j = 0; j < x.size(); ++j) c[j] += x[j];
        ++n[index_of(sel.labels[i])];
    }
    for (std::size_t k = 0; k < kRoadCount; ++k)
        for (auto& v : centroid[k]) v /= n[k];
    int correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto x = norm.apply(mask.apply(test.rows[i]));
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t k = 0; k < kRoadCount; ++k) {
            if (centroid[k].empty()) continue;
            double d = 0.0;
            for (std::size_t j = 0; j < x.size(); ++j) d += (x[j] - centroid[k][j]) * (x[j] - centroid[k][j]);
            if (d < best) {
                best = d;
                arg = k;
            }
        }
        if (kAllRoads[arg] == test.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

// ---------------------------------------------------------------------------
// Persistence
//
//   mlp <in> 4 3 2 4 seed <seed>
//   mask <i_1> ... <i_in>
//   mean <...>
//   scale <...>
//   then per layer: <out> weight rows, then one bias row

namespace detail {

inline void write_row(std::ostream& out, const double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out << (i ? " " : "") << format_g9(v[i]);
    out << '\n';
}

inline std::vector<double> read_row(std::istream& in, std::size_t n, const std::string& what) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("model file truncated at " + what);
    std::istringstream ss(line);
    std::vector<double> v(n);
    for (auto& x : v)
        if (!(ss >> x)) throw IoError("model file: short row in " + what);
    double extra;
    if (ss >> extra) throw IoError("model file: long row in " + what);
    return v;
}

}  // namespace detail

inline void save_model(std::ostream& out, const MlpModel& m) {
    check_invariants(m);
    out << "mlp";
    for (auto s : m.layer_sizes()) out << ' ' << s;
    out << " seed " << m.seed << '\n';
    out << "mask";
    for (auto i : m.mask.indices) out << ' ' << i;
    out << '\n' << "mean ";
    detail::write_row(out, m.norm.mean.data(), m.norm.mean.size());
    out << "scale ";
    detail::write_row(out, m.norm.scale.data(), m.norm.scale.size());
    for (const auto& L : m.layers) {
        for (std::size_t o = 0; o < L.out; ++o) detail::write_row(out, L.w.data() + o * L.in, L.in);
        detail::write_row(out, L.b.data(), L.out);
    }
}

inline void save_model(const std::string& path, const MlpModel& m) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write model file '" + path + "'");
    save_model(f, m);
    if (!f) throw IoError("write failed for '" + path + "'");
}

inline MlpModel load_model(std::istream& in) {
    std::string line, tag;
    if (!std::getline(in, line)) throw IoError("model file is empty");
    std::istringstream head(line);
    head >> tag;
    if (tag != "mlp") throw IoError("model file: missing 'mlp' header");
    std::vector<std::size_t> sizes;
    std::string tok;
    MlpModel m;
    while (head >> tok) {
        if (tok == "seed") {
            if (!(head >> m.seed)) throw IoError("model file: bad seed");
            break;
        }
        sizes.push_back(std::stoul(tok));
    }
    if (sizes.size() != kHiddenSizes.size() + 2) throw IoError("model file: expected five layer sizes");

    if (!std::getline(in, line)) throw IoError("model file truncated at mask");
    std::istringstream mk(line);
    mk >> tag;
    if (tag != "mask") throw IoError("model file: missing mask line");
    std::size_t idx;
    while (mk >> idx) m.mask.indices.push_back(idx);
    for (auto i : m.mask.indices) {
        if (i < kLpcOrder) ++m.mask.lpc_kept;
        else if (i < kLpcOrder + kBandCount) ++m.mask.band_kept;
        else ++m.mask.cep_kept;
    }
    auto tagged = [&](const std::string& want) {
        std::string t;
        in >> t;
        if (t != want) throw IoError("model file: missing '" + want + "' line");
        return detail::read_row(in, sizes.front(), want);
    };
    m.norm.mean = tagged("mean");
    m.norm.scale = tagged("scale");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        DenseLayer L;
        L.in = sizes[l];
        L.out = sizes[l + 1];
        L.logistic = l + 2 == sizes.size();
        for (std::size_t o = 0; o < L.out; ++o) {
            const auto row = detail::read_row(in, L.in, "layer " + std::to_string(l) + " weights");
            L.w.insert(L.w.end(), row.begin(), row.end());
        }
        L.b = detail::read_row(in, L.out, "layer " + std::to_string(l) + " bias");
        m.layers.push_back(std::move(L));
    }
    try {
        check_invariants(m);
    } catch (const ConfigError& e) {
        throw IoError(std::string("model file: ") + e.what());
    }
    return m;
}

inline MlpModel load_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open model file '" + path + "'");
    return load_model(f);
}

// ---------------------------------------------------------------------------
// Road estimate

struct RoadEstimate {
    RoadType road = RoadType::Asphalt;
    double lambda_opt = 0.0;
    double mu_peak = 0.0;
    double confidence = 0.0;
};

/// Classifies the first 0.1 s of the window and looks up the friction peak
/// of the recognized road.
inline RoadEstimate arte_estimate(const MlpModel& m, const AudioClip& window, const CurveSet& curves = default_curves()) {
    const std::size_t len = frame_length(window.sample_rate);
    if (window.samples.size() < len) throw ConfigError("estimation window shorter than 0.1 s");
    const auto raw = extract_raw(frame_at(window, 0));
    const auto c = classify_raw(m, std::vector<double>(raw.begin(), raw.end()));
    return {c.road, curves.optimal_lambda(c.road), curves.mu_peak(c.road), c.confidence};
}

}  // namespace tcsim
