#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fernseg/hermitian.hpp"
#include "fernseg/image.hpp"
#include "fernseg/parallel.hpp"

namespace fernseg {

struct ClassSignature {
    std::string name;
    HermitianMat sigma;
};

namespace detail {

/// Lower-triangular L with sigma = L L^H. Throws if sigma is not positive
/// definite.
struct Cholesky3 {
    complexd l00, l10, l11, l20, l21, l22;
};

inline Cholesky3 cholesky(const HermitianMat& sigma) {
    auto fail = [] { throw std::domain_error("cholesky: matrix is not positive definite"); };
    Cholesky3 f{};
    if (sigma.d0 <= 0.0) fail();
    const double l00 = std::sqrt(sigma.d0);
    f.l00 = l00;
    f.l10 = std::conj(sigma.u01) / l00;
    f.l20 = std::conj(sigma.u02) / l00;
    const double d1 = sigma.d1 - std::norm(f.l10);
    if (d1 <= 0.0) fail();
    const double l11 = std::sqrt(d1);
    f.l11 = l11;
    f.l21 = (std::conj(sigma.u12) - f.l20 * std::conj(f.l10)) / l11;
    const double d2 = sigma.d2 - std::norm(f.l20) - std::norm(f.l21);
    if (d2 <= 0.0) fail();
    f.l22 = std::sqrt(d2);
    return f;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t pixel_stream_seed(std::uint64_t seed, std::uint64_t pixel) {
    return splitmix64(splitmix64(seed) ^ (pixel + 1) * 0xD1B54A32D192ED03ull);
}

}  // namespace detail

/// Multilook sample covariance from the complex Wishart mechanism: looks
/// independent circular Gaussian scattering vectors with covariance sigma,
/// averaged as (1/looks) sum z z^H.
inline HermitianMat sample_covariance(const HermitianMat& sigma, int looks,
                                      std::mt19937_64& rng) {
    if (looks < 1) throw std::invalid_argument("sample_covariance: looks must be >= 1");
    const detail::Cholesky3 f = detail::cholesky(sigma);
    std::normal_distribution<double> gauss(0.0, 1.0);
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    HermitianMat acc{};
    for (int n = 0; n < looks; ++n) {
        complexd w0{gauss(rng), gauss(rng)}, w1{gauss(rng), gauss(rng)},
            w2{gauss(rng), gauss(rng)};
        w0 *= inv_sqrt2;
        w1 *= inv_sqrt2;
        w2 *= inv_sqrt2;
        const complexd z0 = f.l00 * w0;
        const complexd z1 = f.l10 * w0 + f.l11 * w1;
        const complexd z2 = f.l20 * w0 + f.l21 * w1 + f.l22 * w2;
        acc.d0 += std::norm(z0);
        acc.d1 += std::norm(z1);
        acc.d2 += std::norm(z2);
        acc.u01 += z0 * std::conj(z1);
        acc.u02 += z0 * std::conj(z2);
        acc.u12 += z1 * std::conj(z2);
    }
    return (1.0 / looks) * acc;
}

enum class Layout { Stripes, Blocks, Voronoi, ThinLines };

struct SceneConfig {
    int width = 256;
    int height = 256;
    std::vector<ClassSignature> signatures;
    int looks = 9;
    Layout layout = Layout::Blocks;
    int block_size = 32;
    int voronoi_sites = 40;
    int line_width = 2;
    int line_spacing = 24;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct Scene {
    PolSarImage image;
    LabelMap labels;
};

namespace detail {

inline LabelMap scene_labels(const SceneConfig& cfg) {
    const int L = static_cast<int>(cfg.signatures.size());
    LabelMap map = LabelMap::zeros(cfg.width, cfg.height, L);
    switch (cfg.layout) {
        case Layout::Stripes:
            for (int y = 0; y < cfg.height; ++y)
                for (int x = 0; x < cfg.width; ++x)
                    map.at(x, y) = static_cast<std::uint8_t>(
                        1 + static_cast<std::int64_t>(x) * L / cfg.width);
            break;
        case Layout::Blocks: {
            const int cols = (cfg.width + cfg.block_size - 1) / cfg.block_size;
            for (int y = 0; y < cfg.height; ++y)
                for (int x = 0; x < cfg.width; ++x) {
                    const int block = (y / cfg.block_size) * cols + x / cfg.block_size;
                    map.at(x, y) = static_cast<std::uint8_t>(1 + block % L);
                }
            break;
        }
        case Layout::Voronoi: {
            std::mt19937_64 rng(splitmix64(cfg.seed) ^ 0xA5A5A5A5A5A5A5A5ull);
            std::vector<int> sx(cfg.voronoi_sites), sy(cfg.voronoi_sites);
            std::uniform_int_distribution<int> px(0, cfg.width - 1), py(0, cfg.height - 1);
            for (int i = 0; i < cfg.voronoi_sites; ++i) {
                sx[i] = px(rng);
                sy[i] = py(rng);
            }
            for (int y = 0; y < cfg.height; ++y)
                for (int x = 0; x < cfg.width; ++x) {
                    std::int64_t best = -1;
                    int site = 0;
                    for (int i = 0; i < cfg.voronoi_sites; ++i) {
                        const std::int64_t dx = x - sx[i], dy = y - sy[i];
                        const std::int64_t d = dx * dx + dy * dy;
                        if (best < 0 || d < best) {
                            best = d;
                            site = i;
                        }
                    }
                    map.at(x, y) = static_cast<std::uint8_t>(1 + site % L);
                }
            break;
        }
        case Layout::ThinLines: {
            // block base over classes 1..L-1, plus a thin minority class L
            const int base = std::max(L - 1, 1);
            const int cols = (cfg.width + cfg.block_size - 1) / cfg.block_size;
            for (int y = 0; y < cfg.height; ++y)
                for (int x = 0; x < cfg.width; ++x) {
                    const int block = (y / cfg.block_size) * cols + x / cfg.block_size;
                    map.at(x, y) = static_cast<std::uint8_t>(1 + block % base);
                    if (x % cfg.line_spacing < cfg.line_width ||
                        y % cfg.line_spacing < cfg.line_width)
                        map.at(x, y) = static_cast<std::uint8_t>(L);
                }
            break;
        }
    }
    return map;
}

}  // namespace detail

/// Deterministic scene: the class layout comes from the config, every pixel's
/// covariance is drawn from its class signature through an independent rng
/// stream keyed on (seed, pixel index).
inline Scene generate_scene(const SceneConfig& cfg) {
    if (cfg.width <= 0 || cfg.height <= 0)
        throw std::invalid_argument("generate_scene: empty scene");
    if (cfg.signatures.size() < 2 || cfg.signatures.size() > 255)
        throw std::invalid_argument("generate_scene: need 2..255 class signatures");
    if (cfg.looks < 3)
        throw std::invalid_argument("generate_scene: looks must be >= 3");

    Scene scene;
    scene.labels = detail::scene_labels(cfg);
    std::vector<HermitianMat> covs(static_cast<size_t>(cfg.width) * cfg.height);
    parallel_for(static_cast<std::int64_t>(covs.size()), cfg.threads,
                 [&](std::int64_t begin, std::int64_t end) {
                     for (std::int64_t i = begin; i < end; ++i) {
                         const int cls = scene.labels.labels[i];
                         std::mt19937_64 rng(detail::pixel_stream_seed(cfg.seed, i));
                         covs[i] = sample_covariance(cfg.signatures[cls - 1].sigma, cfg.looks,
                                                     rng);
                     }
                 });
    scene.image = precompute_image(cfg.width, cfg.height, std::move(covs), cfg.threads);
    return scene;
}

/// Five synthetic reflection-symmetric signatures (C12 = C23 = 0) spanning
/// the usual scene archetypes: smooth low-power water, two rough surfaces at
/// different power levels, a depolarizing volume, and a strong double-bounce
/// class with HH/VV anti-phase. Power levels and correlations overlap enough
/// that a handful of random features cannot separate them.
inline std::vector<ClassSignature> five_class_preset() {
    auto sig = [](std::string name, double c11, double c22, double c33, double rho,
                  double phase) {
        ClassSignature s;
        s.name = std::move(name);
        s.sigma = HermitianMat::diagonal(c11, c22, c33);
        s.sigma.u02 = rho * std::sqrt(c11 * c33) *
                      complexd{std::cos(phase), std::sin(phase)};
        return s;
    };
    return {
        sig("water", 0.080, 0.004, 0.055, 0.92, 0.05),
        sig("street", 0.210, 0.020, 0.150, 0.62, 0.18),
        sig("field", 0.480, 0.045, 0.340, 0.68, 0.30),
        sig("forest", 0.430, 0.230, 0.390, 0.28, 0.40),
        sig("urban", 1.750, 0.260, 1.280, 0.56, 2.90),
    };
}

}  // namespace fernseg
