#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace fernseg {

using complexd = std::complex<double>;

/// Polarimetric scattering vector in the lexicographic basis
/// (S_hh, sqrt(2) S_hv, S_vv).
struct ScatteringVector {
    std::array<complexd, 3> k{};

    complexd& operator[](int i) { return k[static_cast<size_t>(i)]; }
    const complexd& operator[](int i) const { return k[static_cast<size_t>(i)]; }
};

/// 3x3 Hermitian matrix stored as three real diagonal entries plus the
/// strict upper triangle. Component order matches the raster file layout:
/// d0, d1, d2, then u01, u02, u12.
struct HermitianMat {
    double d0 = 0.0, d1 = 0.0, d2 = 0.0;
    complexd u01{}, u02{}, u12{};

    static HermitianMat identity() { return {1.0, 1.0, 1.0, {}, {}, {}}; }

    static HermitianMat diagonal(double a, double b, double c) {
        return {a, b, c, {}, {}, {}};
    }

    complexd at(int i, int j) const {
        if (i == j) return {i == 0 ? d0 : (i == 1 ? d1 : d2), 0.0};
        if (i > j) return std::conj(at(j, i));
        if (i == 0) return j == 1 ? u01 : u02;
        return u12;
    }

    double trace() const { return d0 + d1 + d2; }

    std::array<double, 9> components() const {
        return {d0, d1, d2, u01.real(), u01.imag(),
                u02.real(), u02.imag(), u12.real(), u12.imag()};
    }

    static HermitianMat from_components(const std::array<double, 9>& c) {
        return {c[0], c[1], c[2], {c[3], c[4]}, {c[5], c[6]}, {c[7], c[8]}};
    }

    bool finite() const {
        for (double v : components())
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend HermitianMat operator+(const HermitianMat& a, const HermitianMat& b) {
        return {a.d0 + b.d0, a.d1 + b.d1, a.d2 + b.d2,
                a.u01 + b.u01, a.u02 + b.u02, a.u12 + b.u12};
    }
    friend HermitianMat operator-(const HermitianMat& a, const HermitianMat& b) {
        return {a.d0 - b.d0, a.d1 - b.d1, a.d2 - b.d2,
                a.u01 - b.u01, a.u02 - b.u02, a.u12 - b.u12};
    }
    friend HermitianMat operator*(double s, const HermitianMat& a) {
        return {s * a.d0, s * a.d1, s * a.d2, s * a.u01, s * a.u02, s * a.u12};
    }
    friend bool operator==(const HermitianMat& a, const HermitianMat& b) {
        return a.components() == b.components();
    }
};

inline double frobenius_norm(const HermitianMat& m) {
    double s = m.d0 * m.d0 + m.d1 * m.d1 + m.d2 * m.d2;
    s += 2.0 * (std::norm(m.u01) + std::norm(m.u02) + std::norm(m.u12));
    return std::sqrt(s);
}

/// Total backscattered power.
inline double span(const HermitianMat& c) { return c.trace(); }

/// Sample covariance (1/n) sum k k^H over a window of scattering vectors.
inline HermitianMat covariance_from_scattering(std::span<const ScatteringVector> window) {
    if (window.empty())
        throw std::invalid_argument("covariance_from_scattering: empty window");
    HermitianMat acc{};
    for (const auto& v : window) {
        acc.d0 += std::norm(v.k[0]);
        acc.d1 += std::norm(v.k[1]);
        acc.d2 += std::norm(v.k[2]);
        acc.u01 += v.k[0] * std::conj(v.k[1]);
        acc.u02 += v.k[0] * std::conj(v.k[2]);
        acc.u12 += v.k[1] * std::conj(v.k[2]);
    }
    return (1.0 / static_cast<double>(window.size())) * acc;
}

namespace detail {

using Mat3c = std::array<std::array<complexd, 3>, 3>;

inline Mat3c to_dense(const HermitianMat& h) {
    Mat3c a;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) a[i][j] = h.at(i, j);
    return a;
}

inline Mat3c identity_dense() {
    Mat3c u{};
    u[0][0] = u[1][1] = u[2][2] = 1.0;
    return u;
}

}  // namespace detail

/// Eigendecomposition A = U diag(values) U^H; vectors[i][j] is component i of
/// eigenvector j.
struct EigenSystem {
    std::array<double, 3> values{};
    detail::Mat3c vectors{};
};

/// Cyclic complex Jacobi rotations. Converges when the off-diagonal Frobenius
/// mass drops below 1e-12 relative to the matrix norm.
inline EigenSystem eigen_hermitian(const HermitianMat& h) {
    if (!h.finite())
        throw std::domain_error("eigen_hermitian: non-finite input");
    detail::Mat3c a = detail::to_dense(h);
    detail::Mat3c u = detail::identity_dense();
    const double scale = frobenius_norm(h);
    const double threshold = 1e-12 * std::max(scale, 1e-300);

    constexpr int kPairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = std::sqrt(2.0 * (std::norm(a[0][1]) + std::norm(a[0][2]) +
                                      std::norm(a[1][2])));
        if (off <= threshold) break;
        for (auto [p, q] : kPairs) {
            const complexd apq = a[p][q];
            const double absb = std::abs(apq);
            if (absb <= threshold * 1e-4) continue;
            const double app = a[p][p].real();
            const double aqq = a[q][q].real();
            const complexd phase = apq / absb;
            const double theta = (aqq - app) / (2.0 * absb);
            const double t =
                (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::hypot(theta, 1.0));
            const double c = 1.0 / std::sqrt(1.0 + t * t);
            const complexd s = (t * c) * phase;

            a[p][p] = app - t * absb;
            a[q][q] = aqq + t * absb;
            a[p][q] = 0.0;
            a[q][p] = 0.0;
            const int i = 3 - p - q;
            const complexd aip = a[i][p], aiq = a[i][q];
            a[i][p] = aip * c - aiq * std::conj(s);
            a[i][q] = aip * s + aiq * c;
            a[p][i] = std::conj(a[i][p]);
            a[q][i] = std::conj(a[i][q]);
            for (int r = 0; r < 3; ++r) {
                const complexd urp = u[r][p], urq = u[r][q];
                u[r][p] = urp * c - urq * std::conj(s);
                u[r][q] = urp * s + urq * c;
            }
        }
    }

    EigenSystem out;
    out.values = {a[0][0].real(), a[1][1].real(), a[2][2].real()};
    out.vectors = u;
    return out;
}

namespace detail {

inline HermitianMat rebuild(const EigenSystem& eig, const std::array<double, 3>& f) {
    // U diag(f) U^H, keeping only the Hermitian components.
    HermitianMat out{};
    const Mat3c& u = eig.vectors;
    for (int k = 0; k < 3; ++k) {
        out.d0 += f[k] * std::norm(u[0][k]);
        out.d1 += f[k] * std::norm(u[1][k]);
        out.d2 += f[k] * std::norm(u[2][k]);
        out.u01 += f[k] * u[0][k] * std::conj(u[1][k]);
        out.u02 += f[k] * u[0][k] * std::conj(u[2][k]);
        out.u12 += f[k] * u[1][k] * std::conj(u[2][k]);
    }
    return out;
}

}  // namespace detail

/// Matrix logarithm of a Hermitian PSD matrix. Eigenvalues are clamped from
/// below at 1e-6 * max(trace, 1e-12) so rank-deficient sample covariances stay
/// in the domain of log.
inline HermitianMat matrix_log(const HermitianMat& c) {
    if (!c.finite())
        throw std::domain_error("matrix_log: non-finite input");
    EigenSystem eig = eigen_hermitian(c);
    const double eps_reg = 1e-6 * std::max(c.trace(), 1e-12);
    std::array<double, 3> f;
    for (int k = 0; k < 3; ++k) f[k] = std::log(std::max(eig.values[k], eps_reg));
    return detail::rebuild(eig, f);
}

/// Matrix exponential of a Hermitian matrix.
inline HermitianMat matrix_exp(const HermitianMat& m) {
    if (!m.finite())
        throw std::domain_error("matrix_exp: non-finite input");
    EigenSystem eig = eigen_hermitian(m);
    std::array<double, 3> f;
    for (int k = 0; k < 3; ++k) f[k] = std::exp(eig.values[k]);
    return detail::rebuild(eig, f);
}

/// Log-Euclidean distance between two matrices already mapped through
/// matrix_log: the Frobenius norm of their difference.
inline double log_euclidean_distance(const HermitianMat& log_a, const HermitianMat& log_b) {
    return frobenius_norm(log_a - log_b);
}

/// Smallest eigenvalue is no worse than -tol * max(trace, 1).
inline bool is_positive_semidefinite(const HermitianMat& c, double tol = 1e-9) {
    EigenSystem eig = eigen_hermitian(c);
    const double floor = -tol * std::max(c.trace(), 1.0);
    for (double v : eig.values)
        if (v < floor) return false;
    return true;
}

}  // namespace fernseg
