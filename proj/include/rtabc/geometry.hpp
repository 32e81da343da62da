#ifndef RTABC_GEOMETRY_HPP
#define RTABC_GEOMETRY_HPP

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "rtabc/common.hpp"

namespace rtabc {

struct Quaternion {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

    Quaternion normalized() const {
        const double n = norm();
        if (!(n > 0.0)) throw numeric_error("Quaternion: zero norm");
        return {w / n, x / n, y / n, z / n};
    }

    double dot(const Quaternion& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }

    std::array<std::array<double, 3>, 3> to_rotation_matrix() const {
        const auto q = normalized();
        return {{{1 - 2 * (q.y * q.y + q.z * q.z), 2 * (q.x * q.y - q.w * q.z), 2 * (q.x * q.z + q.w * q.y)},
                 {2 * (q.x * q.y + q.w * q.z), 1 - 2 * (q.x * q.x + q.z * q.z), 2 * (q.y * q.z - q.w * q.x)},
                 {2 * (q.x * q.z - q.w * q.y), 2 * (q.y * q.z + q.w * q.x), 1 - 2 * (q.x * q.x + q.y * q.y)}}};
    }
};

struct EulerYXZ {
    double phi1 = 0.0, phi2 = 0.0, phi3 = 0.0;  // rotations about Y, X, Z in that order
};

// Half-angle product form of the Y-X-Z Euler sequence.
inline Quaternion euler_yxz_to_quaternion(const EulerYXZ& e) {
    const double s1 = std::sin(e.phi1 / 2), c1 = std::cos(e.phi1 / 2);
    const double s2 = std::sin(e.phi2 / 2), c2 = std::cos(e.phi2 / 2);
    const double s3 = std::sin(e.phi3 / 2), c3 = std::cos(e.phi3 / 2);
    Quaternion q;
    q.w = s1 * s2 * s3 + c1 * c2 * c3;
    q.x = s1 * c2 * s3 + c1 * s2 * c3;
    q.y = s1 * c2 * c3 - c1 * s2 * s3;
    q.z = c1 * c2 * s3 - s1 * s2 * c3;
    return q.normalized();
}

// Sign-invariant rotation angle between two unit quaternions, in [0, pi].
inline double quaternion_geodesic_distance(const Quaternion& a, const Quaternion& b) {
    if (std::abs(a.norm() - 1.0) > 1e-6 || std::abs(b.norm() - 1.0) > 1e-6)
        throw numeric_error("quaternion_geodesic_distance: inputs must be unit quaternions");
    double d = std::abs(a.dot(b));
    if (d > 1.0) d = 1.0;
    return 2.0 * std::acos(d);
}

namespace detail {

// Deserno-style equal-area spiral on S^2: latitude bands of width ~sqrt(area/n),
// points equally spaced along each band.
inline std::vector<Vec> sphere_points_s2(int n) {
    std::vector<Vec> pts;
    if (n == 1) {
        pts.push_back({0.0, 0.0, 1.0});
        return pts;
    }
    const double a = 4.0 * std::numbers::pi / n;
    const double d = std::sqrt(a);
    const int m_theta = std::max(1, static_cast<int>(std::lround(std::numbers::pi / d)));
    const double d_theta = std::numbers::pi / m_theta;
    const double d_phi = a / d_theta;
    for (int m = 0; m < m_theta; ++m) {
        const double theta = std::numbers::pi * (m + 0.5) / m_theta;
        const int m_phi = std::max(1, static_cast<int>(std::lround(2.0 * std::numbers::pi * std::sin(theta) / d_phi)));
        for (int j = 0; j < m_phi; ++j) {
            const double phi = 2.0 * std::numbers::pi * j / m_phi;
            pts.push_back({std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)});
        }
    }
    return pts;
}

// Extension to S^3: stratify the extra angle psi into bands with counts
// proportional to the sin^2 density of the 3-sphere area element, and run the
// S^2 construction within each band at radius sin(psi).
inline std::vector<Vec> sphere_points_s3(int n) {
    std::vector<Vec> pts;
    if (n == 1) {
        pts.push_back({0.0, 0.0, 0.0, 1.0});
        return pts;
    }
    // linear spacing estimate from the 3-sphere surface area 2*pi^2
    const double d = std::cbrt(2.0 * std::numbers::pi * std::numbers::pi / n);
    const int m_psi = std::max(1, static_cast<int>(std::lround(std::numbers::pi / d)));
    double sin2_total = 0.0;
    for (int m = 0; m < m_psi; ++m) sin2_total += sq(std::sin(std::numbers::pi * (m + 0.5) / m_psi));
    for (int m = 0; m < m_psi; ++m) {
        const double psi = std::numbers::pi * (m + 0.5) / m_psi;
        const int n_band = static_cast<int>(std::lround(n * sq(std::sin(psi)) / sin2_total));
        if (n_band < 1) continue;
        const double s = std::sin(psi), c = std::cos(psi);
        // rotate the band phase so consecutive bands do not align
        const double phase = 2.0 * std::numbers::pi * m / m_psi * 0.618033988749895;
        for (const auto& p : sphere_points_s2(n_band)) {
            const double cph = std::cos(phase), sph = std::sin(phase);
            pts.push_back({s * (p[0] * cph - p[1] * sph), s * (p[0] * sph + p[1] * cph), s * p[2], c});
        }
    }
    return pts;
}

}  // namespace detail

// Approximately equispaced unit vectors on the 2-sphere (dim=3) or 3-sphere
// (dim=4). The banded construction cannot hit n exactly; the returned count is
// within a few percent of the request.
inline std::vector<Vec> equispaced_hypersphere(int n, int dim) {
    if (n < 1) throw dimension_error("equispaced_hypersphere: n must be >= 1");
    if (dim == 3) return detail::sphere_points_s2(n);
    if (dim == 4) return detail::sphere_points_s3(n);
    throw dimension_error("equispaced_hypersphere: dim must be 3 or 4");
}

}  // namespace rtabc

#endif
