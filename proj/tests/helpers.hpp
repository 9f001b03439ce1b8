#pragma once

#include <array>
#include <complex>
#include <random>
#include <vector>

#include "fernseg/hermitian.hpp"
#include "fernseg/image.hpp"

namespace testutil {

using fernseg::complexd;
using fernseg::HermitianMat;
using fernseg::ScatteringVector;

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline complexd random_complex(std::mt19937_64& g) {
    std::normal_distribution<double> n(0.0, 1.0);
    return {n(g), n(g)};
}

inline ScatteringVector random_scattering(std::mt19937_64& g, double scale = 1.0) {
    ScatteringVector v;
    for (auto& c : v.k) c = scale * random_complex(g);
    return v;
}

/// Random PSD matrix X X^H / 3 (+ optional diagonal lift).
inline HermitianMat random_psd(std::mt19937_64& g, double scale = 1.0, double lift = 0.0) {
    std::array<std::array<complexd, 3>, 3> x;
    for (auto& row : x)
        for (auto& c : row) c = random_complex(g);
    HermitianMat m{};
    for (int k = 0; k < 3; ++k) {
        m.d0 += std::norm(x[0][k]);
        m.d1 += std::norm(x[1][k]);
        m.d2 += std::norm(x[2][k]);
        m.u01 += x[0][k] * std::conj(x[1][k]);
        m.u02 += x[0][k] * std::conj(x[2][k]);
        m.u12 += x[1][k] * std::conj(x[2][k]);
    }
    m = (scale / 3.0) * m;
    m.d0 += lift;
    m.d1 += lift;
    m.d2 += lift;
    return m;
}

/// Random unitary 3x3 via Gram-Schmidt on Gaussian columns.
inline std::array<std::array<complexd, 3>, 3> random_unitary(std::mt19937_64& g) {
    std::array<std::array<complexd, 3>, 3> q;  // q[i][j]: component i of column j
    for (int j = 0; j < 3; ++j) {
        std::array<complexd, 3> v{random_complex(g), random_complex(g), random_complex(g)};
        for (int k = 0; k < j; ++k) {
            complexd dot{};
            for (int i = 0; i < 3; ++i) dot += std::conj(q[i][k]) * v[i];
            for (int i = 0; i < 3; ++i) v[i] -= dot * q[i][k];
        }
        double norm = 0.0;
        for (int i = 0; i < 3; ++i) norm += std::norm(v[i]);
        norm = std::sqrt(norm);
        for (int i = 0; i < 3; ++i) q[i][j] = v[i] / norm;
    }
    return q;
}

/// U C U^H for a dense unitary U.
inline HermitianMat conjugate(const std::array<std::array<complexd, 3>, 3>& u,
                              const HermitianMat& c) {
    std::array<std::array<complexd, 3>, 3> dense;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) dense[i][j] = c.at(i, j);
    std::array<std::array<complexd, 3>, 3> tmp{};  // U C
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) tmp[i][j] += u[i][k] * dense[k][j];
    std::array<std::array<complexd, 3>, 3> out{};  // (U C) U^H
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) out[i][j] += tmp[i][k] * std::conj(u[j][k]);
    HermitianMat h;
    h.d0 = out[0][0].real();
    h.d1 = out[1][1].real();
    h.d2 = out[2][2].real();
    h.u01 = out[0][1];
    h.u02 = out[0][2];
    h.u12 = out[1][2];
    return h;
}

/// Independent scalar-loop covariance estimate for oracle comparisons.
inline std::array<std::array<complexd, 3>, 3> covariance_oracle(
    const std::vector<ScatteringVector>& window) {
    std::array<std::array<complexd, 3>, 3> acc{};
    for (const auto& v : window)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) acc[i][j] += v.k[i] * std::conj(v.k[j]);
    for (auto& row : acc)
        for (auto& c : row) c /= static_cast<double>(window.size());
    return acc;
}

inline fernseg::PolSarImage image_from_covs(int w, int h, std::vector<HermitianMat> covs) {
    return fernseg::precompute_image(w, h, std::move(covs));
}

inline fernseg::PolSarImage constant_image(int w, int h, const HermitianMat& c) {
    return image_from_covs(w, h, std::vector<HermitianMat>(static_cast<size_t>(w) * h, c));
}

}  // namespace testutil
