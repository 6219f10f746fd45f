#pragma once

#include <cmath>
#include <vector>

#include "poly_jet.hpp"

namespace loewner {

/// k-th element of the van der Corput sequence in the given prime base.
inline double radical_inverse(unsigned long k, unsigned base) {
    double f = 1.0, r = 0.0;
    while (k > 0) {
        f /= base;
        r += f * static_cast<double>(k % base);
        k /= base;
    }
    return r;
}

inline constexpr unsigned halton_primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

/// Deterministic points of the Euclidean ball of radius r in C^q (Halton, rejection in the cube).
/// skip offsets the sequence, which is how a sampling seed is applied.
inline std::vector<Point> halton_ball(int q, double r, std::size_t count, std::size_t skip = 0) {
    if (q < 1 || 2 * q > 12) throw precondition_error("halton_ball: supported for 1 <= q <= 6");
    std::vector<Point> pts;
    for (unsigned long k = 1 + skip; pts.size() < count && k < 100000 * (count + 1) + skip; ++k) {
        Point z(q);
        double n2 = 0;
        for (int c = 0; c < q; ++c) {
            double x = 2 * radical_inverse(k, halton_primes[2 * c]) - 1;
            double y = 2 * radical_inverse(k, halton_primes[2 * c + 1]) - 1;
            z(c) = cplx(x, y);
            n2 += x * x + y * y;
        }
        if (n2 < 1) pts.push_back(r * z);
    }
    return pts;
}

/// Points on the sphere of radius r: the coordinate axes (both signs, real and imaginary)
/// followed by radially projected Halton points.
inline std::vector<Point> halton_sphere(int q, double r, std::size_t count) {
    std::vector<Point> pts;
    for (int c = 0; c < q; ++c)
        for (cplx u : {cplx(1, 0), cplx(-1, 0), cplx(0, 1), cplx(0, -1)}) {
            Point z = Point::Zero(q);
            z(c) = r * u;
            pts.push_back(z);
        }
    for (auto& z : halton_ball(q, 1.0, count)) {
        double n = z.norm();
        if (n > 1e-3) pts.push_back(z * (r / n));
    }
    return pts;
}

} // namespace loewner
