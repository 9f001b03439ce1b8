#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>

#include "fernseg/image.hpp"

namespace fernseg {

/// Region around a classified pixel: an anchor displaced by polar offset
/// (r, alpha) and an s x s search window at the anchor.
struct RegionSpec {
    double r = 0.0;
    double alpha_deg = 0.0;
    int s = 1;
};

enum class FeatureKind : std::uint8_t { OnePoint, TwoPoint };

/// Binary test on the log-Euclidean distance between region representatives.
/// One-point features compare a region against a frozen reference matrix that
/// was captured from a training pixel when the feature was sampled.
struct BinaryFeature {
    FeatureKind kind = FeatureKind::TwoPoint;
    RegionSpec region1;
    RegionSpec region2;
    HermitianMat ref_log;
    double delta = 0.0;
};

struct FeatureConfig {
    double r_max = 25.0;
    int s_max = 9;
    double one_point_prob = 0.5;
};

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

inline PixelCoord region_anchor(PixelCoord center, const RegionSpec& spec, int width,
                                int height) {
    const double rad = spec.alpha_deg * kDegToRad;
    int x = center.x + static_cast<int>(std::lround(spec.r * std::cos(rad)));
    int y = center.y + static_cast<int>(std::lround(spec.r * std::sin(rad)));
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return {x, y};
}

/// Index of the maximum-span pixel inside the s x s window centered at the
/// anchor, window clipped to the image; row-major first on ties.
inline int region_representative(const PolSarImage& img, PixelCoord anchor, int s) {
    const int x0 = std::max(anchor.x - (s - 1) / 2, 0);
    const int y0 = std::max(anchor.y - (s - 1) / 2, 0);
    const int x1 = std::min(anchor.x + s / 2, img.width - 1);
    const int y1 = std::min(anchor.y + s / 2, img.height - 1);
    int best = img.index(x0, y0);
    double best_span = img.span[best];
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const int i = img.index(x, y);
            if (img.span[i] > best_span) {
                best_span = img.span[i];
                best = i;
            }
        }
    return best;
}

/// Distance the feature thresholds: between the region representative's
/// log-covariance and either the frozen reference (one-point) or a second
/// region's representative (two-point).
inline double project(const BinaryFeature& f, const PolSarImage& img, PixelCoord center) {
    const int rep1 = region_representative(img, region_anchor(center, f.region1, img.width, img.height),
                                           f.region1.s);
    if (f.kind == FeatureKind::OnePoint)
        return log_euclidean_distance(img.log_cov[rep1], f.ref_log);
    const int rep2 = region_representative(img, region_anchor(center, f.region2, img.width, img.height),
                                           f.region2.s);
    return log_euclidean_distance(img.log_cov[rep1], img.log_cov[rep2]);
}

inline int eval_feature(const BinaryFeature& f, const PolSarImage& img, PixelCoord center) {
    return project(f, img, center) >= f.delta ? 1 : 0;
}

namespace detail {

inline RegionSpec sample_region(std::mt19937_64& rng, const FeatureConfig& cfg) {
    RegionSpec spec;
    spec.r = std::uniform_real_distribution<double>(0.0, cfg.r_max)(rng);
    spec.alpha_deg = std::uniform_real_distribution<double>(0.0, 360.0)(rng);
    spec.s = std::uniform_int_distribution<int>(1, cfg.s_max)(rng);
    return spec;
}

}  // namespace detail

/// Draws feature geometry at random, then sets the threshold delta uniformly
/// between the min and max projection observed on a subsample of at most 1000
/// training pixels.
inline BinaryFeature sample_feature(std::mt19937_64& rng, const FeatureConfig& cfg,
                                    const PolSarImage& img,
                                    std::span<const int> sample_pixels) {
    if (sample_pixels.empty())
        throw std::invalid_argument("sample_feature: no training pixels");

    BinaryFeature f;
    const bool one_point =
        std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.one_point_prob;
    f.kind = one_point ? FeatureKind::OnePoint : FeatureKind::TwoPoint;
    f.region1 = detail::sample_region(rng, cfg);
    if (one_point) {
        std::uniform_int_distribution<size_t> pick(0, sample_pixels.size() - 1);
        f.ref_log = img.log_cov[sample_pixels[pick(rng)]];
    } else {
        f.region2 = detail::sample_region(rng, cfg);
    }

    const size_t subsample = std::min<size_t>(1000, sample_pixels.size());
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    std::uniform_int_distribution<size_t> pick(0, sample_pixels.size() - 1);
    for (size_t i = 0; i < subsample; ++i) {
        const int px = subsample == sample_pixels.size()
                           ? sample_pixels[i]
                           : sample_pixels[pick(rng)];
        const double p = project(f, img, img.coord(px));
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    f.delta = std::uniform_real_distribution<double>(lo, hi)(rng);
    return f;
}

}  // namespace fernseg
