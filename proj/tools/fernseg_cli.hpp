#pragma once

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fernseg/io.hpp"
#include "fernseg/optimize.hpp"
#include "fernseg/synth.hpp"

namespace fernseg::cli {

inline constexpr const char* kVersion = "0.1.0";

namespace detail {

class WallTimer {
  public:
    long long ms() const {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Key-value run record; every command writes one as run.manifest. Timing
/// rows vary between runs, so reproducibility comparisons should target the
/// data artifacts, not this file.
class Manifest {
  public:
    explicit Manifest(const std::string& command) {
        add("command", command);
        add("version", kVersion);
    }

    void add(const std::string& key, const std::string& value) {
        rows_.emplace_back(key, value);
    }
    void add(const std::string& key, const char* value) { rows_.emplace_back(key, value); }
    void add(const std::string& key, long long value) { add(key, std::to_string(value)); }
    void add(const std::string& key, int value) { add(key, std::to_string(value)); }
    void add(const std::string& key, std::uint64_t value) { add(key, std::to_string(value)); }
    void add(const std::string& key, double value) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", value);
        add(key, std::string(buf));
    }

    void write(const std::filesystem::path& out_dir) const {
        std::string text;
        for (const auto& [k, v] : rows_) text += k + " " + v + "\n";
        fernseg::detail::write_file((out_dir / "run.manifest").string(), text);
    }

  private:
    std::vector<std::pair<std::string, std::string>> rows_;
};

inline PolSarImage load_image(const std::string& path, int threads) {
    CovarianceRaster raster = read_covariance_raster(path);
    return precompute_image(raster.width, raster.height, std::move(raster.cov), threads);
}

/// Reads a PGM label map and infers the class count from the largest label.
inline LabelMap load_labels(const std::string& path) {
    LabelMap lm = read_label_map(path, 255);
    int max_label = 0;
    for (auto v : lm.labels) max_label = std::max<int>(max_label, v);
    if (max_label < 2)
        throw std::runtime_error(path + ": labels contain fewer than 2 classes");
    lm.num_classes = max_label;
    return lm;
}

inline std::filesystem::path prepare_out_dir(const std::string& out) {
    std::filesystem::path dir(out);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// options shared by train and crossval
// ---------------------------------------------------------------------------

struct TrainOpts {
    int ferns = 30;
    int fern_size = 8;
    int samples_per_class = 3000;
    double smoothing = 1.0;
    double r_max = 25.0;
    int s_max = 9;
    double one_point_prob = 0.5;
    bool empirical_prior = false;
    std::string optimize = "none";
    int pool_size = 2000;
    double ig_min = 0.01;
    double corr_max = 0.9;
    int it_min = 30;
    int patience = 15;
    double val_fraction = 0.2;
    int init_ferns = 5;
    int init_fern_size = 6;
    int max_fern_size = 12;
    std::string objective = "aa";
};

inline void add_train_options(CLI::App* cmd, TrainOpts& o) {
    cmd->add_option("--ferns", o.ferns, "number of ferns")->check(CLI::Range(1, 4096));
    cmd->add_option("--fern-size", o.fern_size, "features per fern")
        ->check(CLI::Range(1, kMaxFernSize));
    cmd->add_option("--samples-per-class", o.samples_per_class,
                    "training pixels drawn per class")
        ->check(CLI::Range(1, 10'000'000));
    cmd->add_option("--smoothing", o.smoothing, "Laplace smoothing constant")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--r-max", o.r_max, "maximum region offset radius in pixels")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--s-max", o.s_max, "maximum region window size")
        ->check(CLI::Range(1, 255));
    cmd->add_option("--one-point-prob", o.one_point_prob,
                    "probability of drawing a one-point feature")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_flag("--empirical-prior", o.empirical_prior,
                  "use training label frequencies as the class prior");
    cmd->add_option("--optimize", o.optimize, "fern optimization strategy")
        ->check(CLI::IsMember({"none", "preselect", "iterative", "both"}));
    cmd->add_option("--pool-size", o.pool_size, "candidate pool size for preselection")
        ->check(CLI::Range(1, 10'000'000));
    cmd->add_option("--ig-min", o.ig_min, "minimum feature quality kept by preselection");
    cmd->add_option("--corr-max", o.corr_max,
                    "maximum absolute pairwise correlation kept by preselection")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--it-min", o.it_min, "minimum hill-climbing iterations")
        ->check(CLI::Range(0, 1'000'000));
    cmd->add_option("--patience", o.patience,
                    "consecutive rejections past --it-min before stopping")
        ->check(CLI::Range(1, 1'000'000));
    cmd->add_option("--val-fraction", o.val_fraction,
                    "fraction of training samples held out per class for validation")
        ->check(CLI::Range(0.01, 0.9));
    cmd->add_option("--init-ferns", o.init_ferns, "starting fern count for hill climbing")
        ->check(CLI::Range(1, 4096));
    cmd->add_option("--init-fern-size", o.init_fern_size,
                    "features per fresh fern during hill climbing")
        ->check(CLI::Range(1, kMaxFernSize));
    cmd->add_option("--max-fern-size", o.max_fern_size,
                    "fern growth cap during hill climbing")
        ->check(CLI::Range(1, kMaxFernSize));
    cmd->add_option("--objective", o.objective, "hill-climbing objective")
        ->check(CLI::IsMember({"aa", "oa"}));
}

inline void describe_train_options(detail::Manifest& man, const TrainOpts& o) {
    man.add("ferns", o.ferns);
    man.add("fern_size", o.fern_size);
    man.add("samples_per_class", o.samples_per_class);
    man.add("smoothing", o.smoothing);
    man.add("r_max", o.r_max);
    man.add("s_max", o.s_max);
    man.add("one_point_prob", o.one_point_prob);
    man.add("empirical_prior", o.empirical_prior ? 1 : 0);
    man.add("optimize", o.optimize);
    man.add("pool_size", o.pool_size);
    man.add("ig_min", o.ig_min);
    man.add("corr_max", o.corr_max);
    man.add("it_min", o.it_min);
    man.add("patience", o.patience);
    man.add("val_fraction", o.val_fraction);
    man.add("init_ferns", o.init_ferns);
    man.add("init_fern_size", o.init_fern_size);
    man.add("max_fern_size", o.max_fern_size);
    man.add("objective", o.objective);
}

/// Splits a class-ordered sample set per class: the trailing fraction of each
/// class's samples becomes validation, the rest stays for training.
inline std::pair<TrainingSet, TrainingSet> stratified_split(const TrainingSet& ts,
                                                            double val_fraction) {
    TrainingSet train, val;
    size_t i = 0;
    while (i < ts.size()) {
        size_t j = i;
        while (j < ts.size() && ts.label[j] == ts.label[i]) ++j;
        const size_t n = j - i;
        size_t k = static_cast<size_t>(std::lround(static_cast<double>(n) * val_fraction));
        k = std::min(std::max<size_t>(k, 1), n - 1);
        for (size_t t = i; t < j - k; ++t) train.push(ts.pixel[t], ts.label[t]);
        for (size_t t = j - k; t < j; ++t) val.push(ts.pixel[t], ts.label[t]);
        i = j;
    }
    return {std::move(train), std::move(val)};
}

struct TrainOutcome {
    RandomFernsModel model;
    std::vector<IterationRecord> trace;
};

/// Runs the selected training strategy on already-loaded data.
inline TrainOutcome run_training(const PolSarImage& img, const LabelMap& labels,
                                 const TrainOpts& o, std::uint64_t seed, int threads) {
    std::mt19937_64 rng(seed);
    const int L = labels.num_classes;
    TrainingSet ts = draw_training_samples(labels, o.samples_per_class, rng);

    FeatureConfig fc;
    fc.r_max = o.r_max;
    fc.s_max = o.s_max;
    fc.one_point_prob = o.one_point_prob;

    TrainConfig tc;
    tc.num_ferns = o.ferns;
    tc.fern_size = o.fern_size;
    tc.samples_per_class = o.samples_per_class;
    tc.smoothing_u = o.smoothing;
    tc.features = fc;
    tc.empirical_prior = o.empirical_prior;
    tc.threads = threads;

    TrainOutcome out;
    if (o.optimize == "none") {
        out.model = train_from_samples(img, ts, tc, rng, L);
        return out;
    }

    PreselectConfig pc;
    pc.pool_size = o.pool_size;
    pc.ig_threshold = o.ig_min;
    pc.corr_threshold = o.corr_max;
    pc.num_ferns = o.ferns;
    pc.fern_size = o.fern_size;
    pc.threads = threads;

    if (o.optimize == "preselect") {
        auto groups = preselect_and_group(img, ts, fc, pc, rng);
        out.model = train_with_features(img, ts, std::move(groups), tc, L);
        return out;
    }

    auto [train_part, val_part] = stratified_split(ts, o.val_fraction);
    RandomFernsModel model0;
    if (o.optimize == "both") {
        auto groups = preselect_and_group(img, train_part, fc, pc, rng);
        model0 = train_with_features(img, train_part, std::move(groups), tc, L);
    } else {
        TrainConfig tc0 = tc;
        tc0.num_ferns = o.init_ferns;
        tc0.fern_size = o.init_fern_size;
        model0 = train_from_samples(img, train_part, tc0, rng, L);
    }

    IterConfig ic;
    ic.it_min = o.it_min;
    ic.delta_patience = o.patience;
    ic.new_fern_size = o.init_fern_size;
    ic.max_fern_size = o.max_fern_size;
    ic.objective = o.objective == "oa" ? Objective::OverallAccuracy
                                       : Objective::AverageAccuracy;
    ic.features = fc;
    OptimizeResult res = iterative_optimize(model0, img, train_part, val_part, ic, rng);
    out.model = std::move(res.model);
    out.trace = std::move(res.trace);
    return out;
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string out;
    std::string preset = "five-class";
    int width = 256;
    int height = 256;
    int classes = 5;
    int looks = 9;
    std::string layout = "blocks";
    int block_size = 32;
    int voronoi_sites = 40;
    int line_width = 2;
    int line_spacing = 24;
    std::uint64_t seed = 0;
    int threads = default_threads();
};

inline int cmd_synth(const SynthArgs& a) {
    detail::WallTimer timer;
    SceneConfig sc;
    sc.width = a.width;
    sc.height = a.height;
    sc.looks = a.looks;
    sc.block_size = a.block_size;
    sc.voronoi_sites = a.voronoi_sites;
    sc.line_width = a.line_width;
    sc.line_spacing = a.line_spacing;
    sc.seed = a.seed;
    sc.threads = a.threads;
    if (a.layout == "stripes")
        sc.layout = Layout::Stripes;
    else if (a.layout == "blocks")
        sc.layout = Layout::Blocks;
    else if (a.layout == "voronoi")
        sc.layout = Layout::Voronoi;
    else
        sc.layout = Layout::ThinLines;
    sc.signatures = five_class_preset();
    if (a.classes < static_cast<int>(sc.signatures.size()))
        sc.signatures.resize(a.classes);

    Scene scene = generate_scene(sc);
    const auto dir = detail::prepare_out_dir(a.out);
    const std::string image_path = (dir / "scene.psc").string();
    const std::string label_path = (dir / "labels.pgm").string();
    write_covariance_raster(image_path, scene.image.width, scene.image.height,
                            scene.image.cov);
    write_label_map(label_path, scene.labels);

    detail::Manifest man("synth");
    man.add("preset", a.preset);
    man.add("width", a.width);
    man.add("height", a.height);
    man.add("classes", a.classes);
    man.add("looks", a.looks);
    man.add("layout", a.layout);
    man.add("block_size", a.block_size);
    man.add("voronoi_sites", a.voronoi_sites);
    man.add("line_width", a.line_width);
    man.add("line_spacing", a.line_spacing);
    man.add("seed", a.seed);
    man.add("threads", a.threads);
    man.add("output_image", image_path);
    man.add("output_labels", label_path);
    man.add("wall_ms_total", timer.ms());
    man.write(dir);
    return 0;
}

struct TrainArgs {
    std::string image;
    std::string labels;
    std::string out;
    std::uint64_t seed = 0;
    int threads = default_threads();
    TrainOpts opts;
};

inline int cmd_train(const TrainArgs& a) {
    detail::WallTimer timer;
    PolSarImage img = detail::load_image(a.image, a.threads);
    LabelMap labels = detail::load_labels(a.labels);
    if (labels.width != img.width || labels.height != img.height)
        throw std::runtime_error("label map dimensions do not match the image");
    const long long load_ms = timer.ms();

    TrainOutcome outcome = run_training(img, labels, a.opts, a.seed, a.threads);
    const long long train_ms = timer.ms() - load_ms;

    const auto dir = detail::prepare_out_dir(a.out);
    const std::string model_path = (dir / "model.txt").string();
    save_model(model_path, outcome.model);

    detail::Manifest man("train");
    man.add("input_image", a.image);
    man.add("input_labels", a.labels);
    man.add("classes", labels.num_classes);
    describe_train_options(man, a.opts);
    man.add("seed", a.seed);
    man.add("threads", a.threads);
    man.add("output_model", model_path);
    if (!outcome.trace.empty()) {
        const std::string trace_path = (dir / "trace.csv").string();
        write_trace_csv(trace_path, outcome.trace);
        man.add("output_trace", trace_path);
        man.add("iterations", static_cast<int>(outcome.trace.size()));
    }
    man.add("model_ferns", static_cast<int>(outcome.model.ferns.size()));
    man.add("model_features", outcome.model.feature_count());
    man.add("wall_ms_load", load_ms);
    man.add("wall_ms_train", train_ms);
    man.add("wall_ms_total", timer.ms());
    man.write(dir);
    return 0;
}

struct PredictArgs {
    std::string image;
    std::string model;
    std::string out;
    bool posteriors = false;
    int classes = 0;
    int threads = default_threads();
};

inline int cmd_predict(const PredictArgs& a) {
    detail::WallTimer timer;
    RandomFernsModel model = load_model(a.model);
    if (a.classes > 0 && a.classes != model.num_classes)
        throw std::runtime_error("model has " + std::to_string(model.num_classes) +
                                 " classes but " + std::to_string(a.classes) +
                                 " were requested");
    PolSarImage img = detail::load_image(a.image, a.threads);
    const long long load_ms = timer.ms();

    Classification cls = classify_image(model, img, nullptr, a.threads);
    const long long predict_ms = timer.ms() - load_ms;

    const auto dir = detail::prepare_out_dir(a.out);
    const std::string pred_path = (dir / "pred.pgm").string();
    write_label_map(pred_path, cls.labels);

    detail::Manifest man("predict");
    man.add("input_image", a.image);
    man.add("input_model", a.model);
    man.add("classes", model.num_classes);
    man.add("threads", a.threads);
    man.add("output_prediction", pred_path);
    if (a.posteriors) {
        const std::string post_path = (dir / "posteriors.psp").string();
        write_posterior_raster(post_path, img.width, img.height, model.num_classes,
                               cls.posteriors);
        man.add("output_posteriors", post_path);
    }
    man.add("wall_ms_load", load_ms);
    man.add("wall_ms_predict", predict_ms);
    man.add("wall_ms_total", timer.ms());
    man.write(dir);
    return 0;
}

struct EvaluateArgs {
    std::string pred;
    std::string ref;
    std::string out;
    std::string posteriors;
    bool calibration = false;
    int bins = 20;
};

inline int cmd_evaluate(const EvaluateArgs& a) {
    detail::WallTimer timer;
    LabelMap pred = read_label_map(a.pred, 255);
    LabelMap ref = read_label_map(a.ref, 255);
    int L = 0;
    for (auto v : pred.labels) L = std::max<int>(L, v);
    for (auto v : ref.labels) L = std::max<int>(L, v);
    if (L < 2) throw std::runtime_error("label maps contain fewer than 2 classes");

    PosteriorRaster post;
    if (!a.posteriors.empty()) {
        post = read_posterior_raster(a.posteriors);
        if (post.width != pred.width || post.height != pred.height)
            throw std::runtime_error("posterior raster dimensions do not match the prediction");
        if (post.num_classes < L)
            throw std::runtime_error("posterior raster has " +
                                     std::to_string(post.num_classes) +
                                     " classes but the label maps contain " +
                                     std::to_string(L));
        L = post.num_classes;
    }
    pred.num_classes = L;
    ref.num_classes = L;

    ConfusionMatrix cm = confusion(pred, ref);
    MetricsReport rep = metrics(cm);

    const auto dir = detail::prepare_out_dir(a.out);
    const std::string metrics_path = (dir / "metrics.txt").string();
    write_metrics_report(metrics_path, rep, cm);

    detail::Manifest man("evaluate");
    man.add("input_prediction", a.pred);
    man.add("input_reference", a.ref);
    man.add("classes", L);
    man.add("bins", a.bins);
    man.add("output_metrics", metrics_path);

    if (!a.posteriors.empty()) {
        man.add("input_posteriors", a.posteriors);
        auto hist = entropy_histogram(post.values, L, a.bins);
        const std::string entropy_path = (dir / "entropy.csv").string();
        write_entropy_csv(entropy_path, hist);
        man.add("output_entropy", entropy_path);
        if (a.calibration) {
            auto curve = calibration_curve(post.values, pred, ref, a.bins);
            const std::string cal_path = (dir / "calibration.csv").string();
            write_calibration_csv(cal_path, curve, L);
            man.add("output_calibration", cal_path);
        }
    }
    man.add("wall_ms_total", timer.ms());
    man.write(dir);
    return 0;
}

struct CrossvalArgs {
    std::string image;
    std::string labels;
    std::string out;
    int folds = 5;
    int repeats = 4;
    std::uint64_t seed = 0;
    int threads = default_threads();
    TrainOpts opts;
};

inline int cmd_crossval(const CrossvalArgs& a) {
    detail::WallTimer timer;
    PolSarImage img = detail::load_image(a.image, a.threads);
    LabelMap labels = detail::load_labels(a.labels);
    if (labels.width != img.width || labels.height != img.height)
        throw std::runtime_error("label map dimensions do not match the image");
    if (img.width < a.folds)
        throw std::runtime_error("image width " + std::to_string(img.width) +
                                 " is narrower than fold count " + std::to_string(a.folds));

    struct RunRow {
        int fold, repeat;
        MetricsReport rep;
    };
    std::vector<RunRow> runs;
    for (int f = 0; f < a.folds; ++f) {
        const int x0 = static_cast<int>(static_cast<std::int64_t>(f) * img.width / a.folds);
        const int x1 =
            static_cast<int>(static_cast<std::int64_t>(f + 1) * img.width / a.folds);
        LabelMap train_labels = labels;
        LabelMap test_labels = LabelMap::zeros(labels.width, labels.height,
                                               labels.num_classes);
        for (int y = 0; y < labels.height; ++y)
            for (int x = x0; x < x1; ++x) {
                const int i = y * labels.width + x;
                test_labels.labels[i] = labels.labels[i];
                train_labels.labels[i] = 0;
            }
        for (int r = 0; r < a.repeats; ++r) {
            const std::uint64_t run_seed = fernseg::detail::splitmix64(
                a.seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(f) * a.repeats +
                                                   static_cast<std::uint64_t>(r) + 1)));
            TrainOutcome outcome = run_training(img, train_labels, a.opts, run_seed,
                                                a.threads);
            Classification cls = classify_image(outcome.model, img, &test_labels, a.threads);
            runs.push_back({f, r, metrics(confusion(cls.labels, test_labels))});
        }
    }

    auto aggregate = [&](auto pick) {
        double mean = 0.0;
        for (const auto& row : runs) mean += pick(row.rep);
        mean /= runs.size();
        double var = 0.0;
        for (const auto& row : runs) {
            const double d = pick(row.rep) - mean;
            var += d * d;
        }
        const double std_dev = runs.size() > 1 ? std::sqrt(var / (runs.size() - 1)) : 0.0;
        return std::pair{mean, std_dev};
    };

    std::string report = "runs " + std::to_string(runs.size()) + "\n";
    auto num = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const auto& row : runs)
        report += "run fold " + std::to_string(row.fold) + " repeat " +
                  std::to_string(row.repeat) + " oa " + num(row.rep.oa) + " aa " +
                  num(row.rep.aa) + " kappa " + num(row.rep.kappa) + " miou " +
                  num(row.rep.miou) + " f1 " + num(row.rep.f1_macro) + "\n";
    const std::pair<const char*, double MetricsReport::*> fields[] = {
        {"oa", &MetricsReport::oa},
        {"aa", &MetricsReport::aa},
        {"kappa", &MetricsReport::kappa},
        {"miou", &MetricsReport::miou},
        {"f1", &MetricsReport::f1_macro},
    };
    for (const auto& [name, member] : fields) {
        const auto [mean, std_dev] = aggregate([&](const MetricsReport& r) { return r.*member; });
        report += std::string(name) + "_mean " + num(mean) + "\n";
        report += std::string(name) + "_std " + num(std_dev) + "\n";
    }

    const auto dir = detail::prepare_out_dir(a.out);
    const std::string report_path = (dir / "crossval.txt").string();
    fernseg::detail::write_file(report_path, report);

    detail::Manifest man("crossval");
    man.add("input_image", a.image);
    man.add("input_labels", a.labels);
    man.add("classes", labels.num_classes);
    man.add("folds", a.folds);
    man.add("repeats", a.repeats);
    describe_train_options(man, a.opts);
    man.add("seed", a.seed);
    man.add("threads", a.threads);
    man.add("output_report", report_path);
    man.add("wall_ms_total", timer.ms());
    man.write(dir);
    return 0;
}

// ---------------------------------------------------------------------------
// entry point
// ---------------------------------------------------------------------------

inline int run(int argc, char** argv) {
    CLI::App app{"random ferns segmentation of polarimetric SAR covariance imagery"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic labeled scene");
    synth->add_option("--out", synth_args.out, "output directory")->required();
    synth->add_option("--preset", synth_args.preset, "signature preset")
        ->check(CLI::IsMember({"five-class"}));
    synth->add_option("--width", synth_args.width)->check(CLI::Range(1, 65536));
    synth->add_option("--height", synth_args.height)->check(CLI::Range(1, 65536));
    synth->add_option("--classes", synth_args.classes, "number of preset classes used")
        ->check(CLI::Range(2, 5));
    synth->add_option("--looks", synth_args.looks, "independent looks per pixel")
        ->check(CLI::Range(3, 4096));
    synth->add_option("--layout", synth_args.layout)
        ->check(CLI::IsMember({"stripes", "blocks", "voronoi", "thin-lines"}));
    synth->add_option("--block-size", synth_args.block_size)->check(CLI::Range(1, 65536));
    synth->add_option("--voronoi-sites", synth_args.voronoi_sites)
        ->check(CLI::Range(1, 1'000'000));
    synth->add_option("--line-width", synth_args.line_width)->check(CLI::Range(1, 1024));
    synth->add_option("--line-spacing", synth_args.line_spacing)->check(CLI::Range(2, 65536));
    synth->add_option("--seed", synth_args.seed, "rng seed");
    synth->add_option("--threads", synth_args.threads)->check(CLI::Range(1, 1024));

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train a random ferns model");
    train->add_option("--image", train_args.image, "covariance raster")->required();
    train->add_option("--labels", train_args.labels, "reference label map (PGM)")->required();
    train->add_option("--out", train_args.out, "output directory")->required();
    train->add_option("--seed", train_args.seed, "rng seed");
    train->add_option("--threads", train_args.threads)->check(CLI::Range(1, 1024));
    add_train_options(train, train_args.opts);

    PredictArgs predict_args;
    CLI::App* predict = app.add_subcommand("predict", "classify every pixel of an image");
    predict->add_option("--image", predict_args.image, "covariance raster")->required();
    predict->add_option("--model", predict_args.model, "model file")->required();
    predict->add_option("--out", predict_args.out, "output directory")->required();
    predict->add_flag("--posteriors", predict_args.posteriors,
                      "also write the posterior raster");
    predict->add_option("--classes", predict_args.classes,
                        "expected class count (checked against the model)")
        ->check(CLI::Range(2, 255));
    predict->add_option("--threads", predict_args.threads)->check(CLI::Range(1, 1024));

    EvaluateArgs eval_args;
    CLI::App* evaluate = app.add_subcommand("evaluate", "compare a prediction to reference");
    evaluate->add_option("--pred", eval_args.pred, "predicted label map")->required();
    evaluate->add_option("--ref", eval_args.ref, "reference label map")->required();
    evaluate->add_option("--out", eval_args.out, "output directory")->required();
    CLI::Option* post_opt =
        evaluate->add_option("--posteriors", eval_args.posteriors,
                             "posterior raster for entropy and calibration reports");
    evaluate->add_flag("--calibration", eval_args.calibration,
                       "write the reliability curve (requires --posteriors)")
        ->needs(post_opt);
    evaluate->add_option("--bins", eval_args.bins, "histogram and calibration bins")
        ->check(CLI::Range(1, 10000));

    CrossvalArgs cv_args;
    CLI::App* crossval =
        app.add_subcommand("crossval", "stripe-fold cross-validated training and scoring");
    crossval->add_option("--image", cv_args.image, "covariance raster")->required();
    crossval->add_option("--labels", cv_args.labels, "reference label map (PGM)")->required();
    crossval->add_option("--out", cv_args.out, "output directory")->required();
    crossval->add_option("--folds", cv_args.folds, "vertical stripe folds")
        ->check(CLI::Range(2, 1024));
    crossval->add_option("--repeats", cv_args.repeats, "training repetitions per fold")
        ->check(CLI::Range(1, 1024));
    crossval->add_option("--seed", cv_args.seed, "rng seed");
    crossval->add_option("--threads", cv_args.threads)->check(CLI::Range(1, 1024));
    add_train_options(crossval, cv_args.opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_args);
        if (train->parsed()) return cmd_train(train_args);
        if (predict->parsed()) return cmd_predict(predict_args);
        if (evaluate->parsed()) return cmd_evaluate(eval_args);
        if (crossval->parsed()) return cmd_crossval(cv_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace fernseg::cli
