#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fernseg/features.hpp"
#include "fernseg/image.hpp"
#include "fernseg/parallel.hpp"

namespace fernseg {

constexpr int kMaxFernSize = 24;

/// One fern: an ordered group of binary features plus per-class histograms
/// over the 2^N joint outcomes. counts is bin-major: counts[bin * L + c].
struct Fern {
    std::vector<BinaryFeature> features;
    std::vector<std::uint32_t> counts;
    int num_classes = 0;

    int num_features() const { return static_cast<int>(features.size()); }
    int num_bins() const { return 1 << features.size(); }

    friend bool operator==(const Fern& a, const Fern& b) {
        if (a.num_classes != b.num_classes || a.counts != b.counts ||
            a.features.size() != b.features.size())
            return false;
        for (size_t i = 0; i < a.features.size(); ++i) {
            const BinaryFeature &fa = a.features[i], &fb = b.features[i];
            if (fa.kind != fb.kind || fa.delta != fb.delta) return false;
            auto same = [](const RegionSpec& x, const RegionSpec& y) {
                return x.r == y.r && x.alpha_deg == y.alpha_deg && x.s == y.s;
            };
            if (!same(fa.region1, fb.region1) || !same(fa.region2, fb.region2)) return false;
            if (!(fa.ref_log == fb.ref_log)) return false;
        }
        return true;
    }
};

struct RandomFernsModel {
    std::vector<Fern> ferns;
    int num_classes = 0;
    double smoothing_u = 1.0;
    std::vector<double> class_log_prior;
    double patch_radius = 0.0;

    int feature_count() const {
        int n = 0;
        for (const auto& f : ferns) n += f.num_features();
        return n;
    }

    friend bool operator==(const RandomFernsModel& a, const RandomFernsModel& b) {
        return a.num_classes == b.num_classes && a.smoothing_u == b.smoothing_u &&
               a.class_log_prior == b.class_log_prior && a.patch_radius == b.patch_radius &&
               a.ferns == b.ferns;
    }
};

struct TrainConfig {
    int num_ferns = 30;
    int fern_size = 8;
    int samples_per_class = 3000;
    double smoothing_u = 1.0;
    std::uint64_t seed = 0;
    FeatureConfig features;
    bool empirical_prior = false;
    int threads = 1;
};

/// Labeled training pixels as parallel arrays; labels are 1..L.
struct TrainingSet {
    std::vector<int> pixel;
    std::vector<int> label;

    size_t size() const { return pixel.size(); }
    void push(int px, int cls) {
        pixel.push_back(px);
        label.push_back(cls);
    }
};

/// Joint outcome of a fern's features: feature k contributes bit k.
inline int bin_index(const Fern& fern, const PolSarImage& img, PixelCoord center) {
    int bin = 0;
    for (size_t k = 0; k < fern.features.size(); ++k)
        bin |= eval_feature(fern.features[k], img, center) << k;
    return bin;
}

/// samples_per_class pixels per class, without replacement when the class has
/// enough labeled pixels, with replacement otherwise. Classes in ascending
/// order. Throws if a class has no labeled pixels at all.
inline TrainingSet draw_training_samples(const LabelMap& labels, int samples_per_class,
                                         std::mt19937_64& rng) {
    if (samples_per_class <= 0)
        throw std::invalid_argument("draw_training_samples: samples_per_class must be positive");
    TrainingSet ts;
    for (int cls = 1; cls <= labels.num_classes; ++cls) {
        std::vector<int> pool;
        for (int i = 0; i < labels.size(); ++i)
            if (labels.labels[i] == cls) pool.push_back(i);
        if (pool.empty())
            throw std::runtime_error("draw_training_samples: class " + std::to_string(cls) +
                                     " has no labeled pixels");
        if (pool.size() >= static_cast<size_t>(samples_per_class)) {
            for (int i = 0; i < samples_per_class; ++i) {
                std::uniform_int_distribution<size_t> pick(i, pool.size() - 1);
                std::swap(pool[i], pool[pick(rng)]);
                ts.push(pool[i], cls);
            }
        } else {
            std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
            for (int i = 0; i < samples_per_class; ++i) ts.push(pool[pick(rng)], cls);
        }
    }
    return ts;
}

/// Rebuilds the fern's count table from scratch over the training set.
inline void fill_fern_counts(Fern& fern, const PolSarImage& img, const TrainingSet& ts) {
    fern.counts.assign(static_cast<size_t>(fern.num_bins()) * fern.num_classes, 0);
    for (size_t i = 0; i < ts.size(); ++i) {
        const int bin = bin_index(fern, img, img.coord(ts.pixel[i]));
        ++fern.counts[static_cast<size_t>(bin) * fern.num_classes + (ts.label[i] - 1)];
    }
}

namespace detail {

inline std::vector<double> log_prior(const TrainingSet& ts, int num_classes, bool empirical) {
    std::vector<double> prior(num_classes);
    if (empirical) {
        std::vector<double> freq(num_classes, 0.0);
        for (int cls : ts.label) freq[cls - 1] += 1.0;
        for (int c = 0; c < num_classes; ++c) {
            if (freq[c] == 0.0)
                throw std::runtime_error("empirical prior: class " + std::to_string(c + 1) +
                                         " absent from training samples");
            prior[c] = std::log(freq[c] / static_cast<double>(ts.size()));
        }
    } else {
        for (int c = 0; c < num_classes; ++c)
            prior[c] = std::log(1.0 / static_cast<double>(num_classes));
    }
    return prior;
}

inline void validate_train_config(const TrainConfig& cfg) {
    if (cfg.num_ferns < 1) throw std::invalid_argument("train: num_ferns must be >= 1");
    if (cfg.fern_size < 1 || cfg.fern_size > kMaxFernSize)
        throw std::invalid_argument("train: fern_size must be in [1, " +
                                    std::to_string(kMaxFernSize) + "]");
    if (!(cfg.smoothing_u > 0.0))
        throw std::invalid_argument("train: smoothing_u must be positive");
}

}  // namespace detail

/// Builds a model from externally chosen feature groups (one group per fern)
/// and fits the count tables on the given samples.
inline RandomFernsModel train_with_features(const PolSarImage& img, const TrainingSet& ts,
                                            std::vector<std::vector<BinaryFeature>> groups,
                                            const TrainConfig& cfg, int num_classes) {
    RandomFernsModel model;
    model.num_classes = num_classes;
    model.smoothing_u = cfg.smoothing_u;
    model.patch_radius = cfg.features.r_max;
    model.class_log_prior = detail::log_prior(ts, num_classes, cfg.empirical_prior);
    model.ferns.resize(groups.size());
    for (size_t j = 0; j < groups.size(); ++j) {
        model.ferns[j].features = std::move(groups[j]);
        model.ferns[j].num_classes = num_classes;
    }
    parallel_for(static_cast<std::int64_t>(model.ferns.size()), cfg.threads,
                 [&](std::int64_t begin, std::int64_t end) {
                     for (std::int64_t j = begin; j < end; ++j)
                         fill_fern_counts(model.ferns[j], img, ts);
                 });
    return model;
}

/// Samples M * fern_size random features and trains on the given sample set.
inline RandomFernsModel train_from_samples(const PolSarImage& img, const TrainingSet& ts,
                                           const TrainConfig& cfg, std::mt19937_64& rng,
                                           int num_classes) {
    detail::validate_train_config(cfg);
    std::vector<std::vector<BinaryFeature>> groups(cfg.num_ferns);
    for (auto& group : groups) {
        group.reserve(cfg.fern_size);
        for (int k = 0; k < cfg.fern_size; ++k)
            group.push_back(sample_feature(rng, cfg.features, img, ts.pixel));
    }
    return train_with_features(img, ts, std::move(groups), cfg, num_classes);
}

inline RandomFernsModel train(const PolSarImage& img, const LabelMap& labels,
                              const TrainConfig& cfg) {
    detail::validate_train_config(cfg);
    if (labels.width != img.width || labels.height != img.height)
        throw std::invalid_argument("train: label map dimensions do not match the image");
    if (labels.num_classes < 2) throw std::invalid_argument("train: need at least 2 classes");
    std::mt19937_64 rng(cfg.seed);
    TrainingSet ts = draw_training_samples(labels, cfg.samples_per_class, rng);
    return train_from_samples(img, ts, cfg, rng, labels.num_classes);
}

namespace detail {

inline double log_likelihood_value(std::uint32_t count, std::uint64_t class_total, int bins,
                                   double u) {
    return std::log((count + u) / (static_cast<double>(class_total) + u * bins));
}

inline std::vector<std::uint64_t> class_totals(const Fern& fern) {
    std::vector<std::uint64_t> totals(fern.num_classes, 0);
    for (size_t i = 0; i < fern.counts.size(); ++i)
        totals[i % fern.num_classes] += fern.counts[i];
    return totals;
}

/// Per-fern table of log P(bin | class), laid out like counts.
inline std::vector<double> log_likelihood_table(const Fern& fern, double u) {
    const auto totals = class_totals(fern);
    std::vector<double> table(fern.counts.size());
    for (int bin = 0; bin < fern.num_bins(); ++bin)
        for (int c = 0; c < fern.num_classes; ++c) {
            const size_t i = static_cast<size_t>(bin) * fern.num_classes + c;
            table[i] = log_likelihood_value(fern.counts[i], totals[c], fern.num_bins(), u);
        }
    return table;
}

inline int argmax_score(const std::vector<double>& scores) {
    int best = 0;
    for (int c = 1; c < static_cast<int>(scores.size()); ++c)
        if (scores[c] > scores[best]) best = c;
    return best;
}

inline void normalize_scores(std::vector<double>& scores) {
    const double peak = scores[argmax_score(scores)];
    double sum = 0.0;
    for (double& s : scores) {
        s = std::exp(s - peak);
        sum += s;
    }
    for (double& s : scores) s /= sum;
}

}  // namespace detail

/// Smoothed per-fern likelihood log P(bin | cls), cls in 1..L.
inline double fern_log_likelihood(const Fern& fern, int bin, int cls, double u) {
    if (cls < 1 || cls > fern.num_classes)
        throw std::invalid_argument("fern_log_likelihood: class out of range");
    if (bin < 0 || bin >= fern.num_bins())
        throw std::invalid_argument("fern_log_likelihood: bin out of range");
    const auto totals = detail::class_totals(fern);
    return detail::log_likelihood_value(
        fern.counts[static_cast<size_t>(bin) * fern.num_classes + (cls - 1)], totals[cls - 1],
        fern.num_bins(), u);
}

/// Posterior over classes at one pixel: log prior plus the sum of per-fern
/// log likelihoods, normalized through a max-shifted softmax.
inline std::vector<double> posterior(const RandomFernsModel& model, const PolSarImage& img,
                                     PixelCoord center) {
    std::vector<double> scores = model.class_log_prior;
    for (const Fern& fern : model.ferns) {
        const auto totals = detail::class_totals(fern);
        const int bin = bin_index(fern, img, center);
        for (int c = 0; c < model.num_classes; ++c)
            scores[c] += detail::log_likelihood_value(
                fern.counts[static_cast<size_t>(bin) * model.num_classes + c], totals[c],
                fern.num_bins(), model.smoothing_u);
    }
    detail::normalize_scores(scores);
    return scores;
}

/// Label map plus per-pixel posterior raster (pixel-major, L doubles each).
/// Masked-out pixels get label 0 and an all-zero posterior row.
struct Classification {
    LabelMap labels;
    std::vector<double> posteriors;
};

inline Classification classify_image(const RandomFernsModel& model, const PolSarImage& img,
                                     const LabelMap* mask = nullptr, int threads = 1) {
    if (mask && (mask->width != img.width || mask->height != img.height))
        throw std::invalid_argument("classify_image: mask dimensions do not match the image");
    const int L = model.num_classes;
    std::vector<std::vector<double>> tables(model.ferns.size());
    for (size_t j = 0; j < model.ferns.size(); ++j)
        tables[j] = detail::log_likelihood_table(model.ferns[j], model.smoothing_u);

    Classification out;
    out.labels = LabelMap::zeros(img.width, img.height, L);
    out.posteriors.assign(static_cast<size_t>(img.size()) * L, 0.0);
    parallel_for(img.size(), threads, [&](std::int64_t begin, std::int64_t end) {
        std::vector<double> scores(L);
        for (std::int64_t i = begin; i < end; ++i) {
            if (mask && mask->labels[i] == 0) continue;
            scores = model.class_log_prior;
            const PixelCoord at = img.coord(static_cast<int>(i));
            for (size_t j = 0; j < model.ferns.size(); ++j) {
                const int bin = bin_index(model.ferns[j], img, at);
                const double* row = tables[j].data() + static_cast<size_t>(bin) * L;
                for (int c = 0; c < L; ++c) scores[c] += row[c];
            }
            out.labels.labels[i] = static_cast<std::uint8_t>(detail::argmax_score(scores) + 1);
            detail::normalize_scores(scores);
            std::copy(scores.begin(), scores.end(), out.posteriors.begin() + i * L);
        }
    });
    return out;
}

}  // namespace fernseg
