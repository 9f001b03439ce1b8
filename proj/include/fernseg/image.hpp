#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fernseg/hermitian.hpp"
#include "fernseg/parallel.hpp"

namespace fernseg {

struct PixelCoord {
    int x = 0;
    int y = 0;
    friend bool operator==(PixelCoord a, PixelCoord b) { return a.x == b.x && a.y == b.y; }
};

/// Covariance raster with the per-pixel quantities the classifier consumes:
/// span and the log-mapped covariance, both precomputed once.
struct PolSarImage {
    int width = 0;
    int height = 0;
    std::vector<HermitianMat> cov;
    std::vector<HermitianMat> log_cov;
    std::vector<double> span;

    int size() const { return width * height; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    int index(int x, int y) const { return y * width + x; }
    PixelCoord coord(int i) const { return {i % width, i / width}; }
};

inline PolSarImage precompute_image(int width, int height, std::vector<HermitianMat> cov,
                                    int threads = 1) {
    if (width <= 0 || height <= 0)
        throw std::invalid_argument("precompute_image: empty raster");
    if (cov.size() != static_cast<size_t>(width) * static_cast<size_t>(height))
        throw std::invalid_argument("precompute_image: raster size mismatch");

    PolSarImage img;
    img.width = width;
    img.height = height;
    img.cov = std::move(cov);
    img.log_cov.resize(img.cov.size());
    img.span.resize(img.cov.size());
    parallel_for(static_cast<std::int64_t>(img.cov.size()), threads,
                 [&](std::int64_t begin, std::int64_t end) {
                     for (std::int64_t i = begin; i < end; ++i) {
                         try {
                             img.log_cov[i] = matrix_log(img.cov[i]);
                         } catch (const std::exception& e) {
                             throw std::domain_error(
                                 "precompute_image: pixel (" + std::to_string(i % width) +
                                 ", " + std::to_string(i / width) + "): " + e.what());
                         }
                         img.span[i] = fernseg::span(img.cov[i]);
                     }
                 });
    return img;
}

/// Class labels 1..num_classes; 0 marks unlabeled pixels.
struct LabelMap {
    int width = 0;
    int height = 0;
    int num_classes = 0;
    std::vector<std::uint8_t> labels;

    int size() const { return width * height; }
    std::uint8_t at(int x, int y) const { return labels[static_cast<size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return labels[static_cast<size_t>(y) * width + x]; }

    static LabelMap zeros(int width, int height, int num_classes) {
        LabelMap m;
        m.width = width;
        m.height = height;
        m.num_classes = num_classes;
        m.labels.assign(static_cast<size_t>(width) * height, 0);
        return m;
    }
};

}  // namespace fernseg
