// tcsim command line: simulation, comparison, classifier training and
// inference, feature dumps, gap evaluation and corpus synthesis.
//
// Exit codes: 0 ok, 2 config/usage, 3 simulation divergence, 4 I/O, 1 other.

#include <tcsim/classifier.hpp>
#include <tcsim/config.hpp>
#include <tcsim/dsp.hpp>
#include <tcsim/harness.hpp>
#include <tcsim/robustness.hpp>
#include <tcsim/synth_corpus.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace tcsim;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

RunConfig config_or_default(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

// Writes to the file, or stdout for "-" / empty.
template <typename F>
void with_output(const std::string& path, F&& write) {
    if (path.empty() || path == "-") {
        write(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write(out);
    if (!out) throw IoError("write failed for '" + path + "'");
}

std::string feature_header() {
    std::string h = "label";
    for (int i = 1; i <= kLpcOrder; ++i) h += ",lpc" + std::to_string(i);
    for (int i = 1; i <= kBandCount; ++i) h += ",band" + std::to_string(i);
    for (int i = 1; i <= kCepstrumCount; ++i) h += ",cep" + std::to_string(i);
    return h;
}

// WAV files under <dir>/<road>/, sorted, with the road taken from the folder.
std::vector<std::pair<fs::path, RoadType>> labelled_wavs(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("'" + dir + "' is not a directory");
    std::vector<std::pair<fs::path, RoadType>> out;
    for (RoadType road : kAllRoads) {
        const fs::path sub = fs::path(dir) / std::string(to_string(road));
        if (!fs::is_directory(sub)) continue;
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(sub))
            if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (auto& f : files) out.emplace_back(std::move(f), road);
    }
    if (out.empty()) throw IoError("no <road>/*.wav files under '" + dir + "'");
    return out;
}

FeatureDataset dataset_from_dir(const std::string& dir) {
    FeatureDataset ds;
    for (const auto& [path, road] : labelled_wavs(dir)) {
        const auto clip = load_wav(path.string());
        const auto v = extract_raw(frame_at(clip, 0));
        ds.add(std::vector<double>(v.begin(), v.end()), road);
    }
    return ds;
}

Poly parse_poly(const std::string& text) {
    std::istringstream in(text);
    Poly p;
    double v;
    while (in >> v) p.push_back(v);
    if (!in.eof() || p.empty()) throw ConfigError("expected a list of coefficients, got '" + text + "'");
    return p;
}

void print_confusion(std::ostream& out, const ConfusionMatrix& cm) {
    out << "predicted\\actual";
    for (RoadType a : kAllRoads) out << ',' << to_string(a);
    out << '\n';
    for (RoadType p : kAllRoads) {
        out << to_string(p);
        for (RoadType a : kAllRoads) out << ',' << cm.counts[index_of(p)][index_of(a)];
        out << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Traction control and acoustic road estimation toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_path, model_path, wav_path, dir_path, label;
    std::vector<std::string> wavs;
    std::uint64_t seed = 0;
    bool seed_given = false;

    auto* sim = app.add_subcommand("simulate", "Run one scenario and write its trace as CSV");
    sim->add_option("--config", config_path, "Scenario file")->required();
    sim->add_option("--out", out_path, "Trace CSV (default stdout)");

    auto* cmp = app.add_subcommand("compare", "Controller x estimation-mode metrics table");
    cmp->add_option("--config", config_path, "Scenario file")->required();
    cmp->add_option("--out", out_path, "Table CSV (default stdout)");

    auto* train = app.add_subcommand("train", "Train the road classifier on a synthetic or recorded corpus");
    train->add_option("--config", config_path, "Scenario file ([audio] and [train] sections)");
    train->add_option("--data", dir_path, "Corpus tree <road>/*.wav instead of synthesizing one");
    train->add_option("--seed", seed, "Corpus and training seed")->each([&](const std::string&) { seed_given = true; });
    train->add_option("--out", model_path, "Model file")->required();

    auto* cls = app.add_subcommand("classify", "Classify WAV files (first 0.1 s of each)");
    cls->add_option("--model", model_path, "Model file")->required();
    cls->add_option("--wav", wavs, "WAV files");
    cls->add_option("--data", dir_path, "Labelled tree <road>/*.wav; prints accuracy and confusion matrix");

    auto* feat = app.add_subcommand("features", "Raw 20-dim features, one CSV row per frame");
    feat->add_option("--wav", wav_path, "WAV file, cut into consecutive 0.1 s frames");
    feat->add_option("--label", label, "Label column for --wav rows");
    feat->add_option("--data", dir_path, "Labelled tree <road>/*.wav, one row per file");
    feat->add_option("--out", out_path, "CSV (default stdout)");

    std::string p1_num, p1_den, p2_num, p2_den, controller;
    bool arte = false;
    auto* gap = app.add_subcommand("gap", "nu-gap between two transfer functions or of a controller's plant family");
    gap->add_option("--p1-num", p1_num, "Numerator, descending powers of s");
    gap->add_option("--p1-den", p1_den, "Denominator");
    gap->add_option("--p2-num", p2_num, "Numerator");
    gap->add_option("--p2-den", p2_den, "Denominator");
    gap->add_option("--controller", controller, "MFC, SRC or MTTE");
    gap->add_flag("--arte", arte, "Family narrowed by the road estimate");
    gap->add_option("--config", config_path, "Scenario file ([vehicle], [curves], [gap] ...)");

    auto* syn = app.add_subcommand("synth", "Write the synthetic corpus as <road>/<seed>_<index>.wav");
    syn->add_option("--seed", seed, "Corpus seed")->each([&](const std::string&) { seed_given = true; });
    syn->add_option("--config", config_path, "Scenario file ([audio] section)");
    syn->add_option("--out", dir_path, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*sim) {
            const auto cfg = load_config(config_path);
            const auto trace = run_scenario(cfg.scenario);
            with_output(out_path, [&](std::ostream& o) { write_trace_csv(o, trace); });
        } else if (*cmp) {
            const auto cfg = load_config(config_path);
            const auto rows = compare(cfg.scenario, cfg.compare);
            with_output(out_path, [&](std::ostream& o) { write_compare_csv(o, rows); });
        } else if (*train) {
            const auto cfg = config_or_default(config_path);
            const std::uint64_t s = seed_given ? seed : cfg.train.seed;
            const auto ds = dir_path.empty() ? build_corpus(s, cfg.scenario.audio) : dataset_from_dir(dir_path);
            const auto split = stratified_split(ds, cfg.train.train_fraction, s);
            const auto mask = prune_features(split.train);
            TrainReport rep;
            const auto model = train_mlp(split.train, mask, s, cfg.train.options, &rep);
            save_model(model_path, model);
            const auto cm = confusion_matrix(model, split.test);
            std::cout << "epochs," << rep.epochs << "\nloss," << format_g9(rep.final_loss) << "\naccuracy,"
                      << format_g9(cm.accuracy) << '\n';
            print_confusion(std::cout, cm);
        } else if (*cls) {
            const auto model = load_model(model_path);
            if (wavs.empty() && dir_path.empty()) throw ConfigError("classify needs --wav or --data");
            if (!wavs.empty()) {
                std::cout << "file,road,confidence\n";
                for (const auto& w : wavs) {
                    const auto est = arte_estimate(model, load_wav(w));
                    std::cout << w << ',' << to_string(est.road) << ',' << format_g9(est.confidence) << '\n';
                }
            }
            if (!dir_path.empty()) {
                const auto cm = confusion_matrix(model, dataset_from_dir(dir_path));
                std::cout << "accuracy," << format_g9(cm.accuracy) << '\n';
                print_confusion(std::cout, cm);
            }
        } else if (*feat) {
            if (wav_path.empty() == dir_path.empty()) throw ConfigError("features needs exactly one of --wav or --data");
            with_output(out_path, [&](std::ostream& o) {
                o << feature_header() << '\n';
                auto row = [&](const std::string& lab, const Frame& f) {
                    o << lab;
                    for (double v : extract_raw(f)) o << ',' << format_g9(v);
                    o << '\n';
                };
                if (!wav_path.empty()) {
                    const auto clip = load_wav(wav_path);
                    const std::size_t len = frame_length(clip.sample_rate);
                    if (clip.samples.size() < len) throw ConfigError("'" + wav_path + "' is shorter than one frame");
                    for (std::size_t off = 0; off + len <= clip.samples.size(); off += len) row(label, frame_at(clip, off));
                } else {
                    for (const auto& [path, road] : labelled_wavs(dir_path))
                        row(std::string(to_string(road)), frame_at(load_wav(path.string()), 0));
                }
            });
        } else if (*gap) {
            const bool tf_mode = !p1_num.empty() || !p1_den.empty() || !p2_num.empty() || !p2_den.empty();
            if (tf_mode == !controller.empty()) throw ConfigError("gap needs either the four coefficient lists or --controller");
            GapResult g;
            if (tf_mode) {
                if (p1_num.empty() || p1_den.empty() || p2_num.empty() || p2_den.empty())
                    throw ConfigError("gap needs --p1-num, --p1-den, --p2-num and --p2-den");
                g = nu_gap({parse_poly(p1_num), parse_poly(p1_den)}, {parse_poly(p2_num), parse_poly(p2_den)});
            } else {
                const auto k = parse_controller(controller);
                if (!k) throw ConfigError("unknown controller '" + controller + "'");
                const auto cfg = config_or_default(config_path);
                FamilyOptions fo = cfg.compare.family;
                fo.mfc = cfg.scenario.mfc;
                fo.src = cfg.scenario.src;
                fo.mtte = cfg.scenario.mtte;
                g = plant_family(*k, cfg.scenario.vehicle, arte, fo, cfg.scenario.curve_set()).gap;
            }
            std::cout << "value,winding_ok,peak_frequency\n";
            std::cout << format_g9(g.value) << ',' << (g.winding_ok ? "true" : "false") << ','
                      << format_g9(g.peak_frequency) << '\n';
        } else if (*syn) {
            const auto cfg = config_or_default(config_path);
            const std::uint64_t s = seed_given ? seed : cfg.train.seed;
            const auto& opt = cfg.scenario.audio;
            for (RoadType road : kAllRoads) {
                const fs::path sub = fs::path(dir_path) / std::string(to_string(road));
                std::error_code ec;
                fs::create_directories(sub, ec);
                if (ec) throw IoError("cannot create '" + sub.string() + "': " + ec.message());
                const auto record = synth_record(opt, road, s);
                const auto frames = sample_frames(record, opt.frames_per_class, class_seed(s, road, 3));
                for (std::size_t i = 0; i < frames.size(); ++i) {
                    AudioClip clip;
                    clip.samples = frames[i].samples;
                    clip.sample_rate = frames[i].sample_rate;
                    save_wav((sub / (std::to_string(s) + "_" + std::to_string(i) + ".wav")).string(), clip);
                }
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
