#pragma once

#include <complex>
#include <cmath>
#include <cstddef>
#include <vector>

namespace lvgrid {

// Phasor scalar: magnitude = RMS value, angle in (-pi, pi].
using Complex = std::complex<double>;

// Per-snapshot vectors of length M.
using CVec = std::vector<Complex>;
using RVec = std::vector<double>;

inline RVec magnitudes(const CVec& x) {
    RVec out(x.size());
    for (std::size_t m = 0; m < x.size(); ++m) out[m] = std::abs(x[m]);
    return out;
}

inline RVec angles(const CVec& x) {
    RVec out(x.size());
    for (std::size_t m = 0; m < x.size(); ++m) out[m] = std::arg(x[m]);
    return out;
}

inline RVec real_part(const CVec& x) {
    RVec out(x.size());
    for (std::size_t m = 0; m < x.size(); ++m) out[m] = x[m].real();
    return out;
}

inline RVec imag_part(const CVec& x) {
    RVec out(x.size());
    for (std::size_t m = 0; m < x.size(); ++m) out[m] = x[m].imag();
    return out;
}

// Elementwise e^{i*phi}; every entry has unit magnitude.
inline CVec expi(const RVec& phi) {
    CVec out(phi.size());
    for (std::size_t m = 0; m < phi.size(); ++m)
        out[m] = Complex(std::cos(phi[m]), std::sin(phi[m]));
    return out;
}

// Reassemble phasors from magnitude and relative angle vectors.
inline CVec from_polar(const RVec& mag, const RVec& phi) {
    CVec out(mag.size());
    for (std::size_t m = 0; m < mag.size(); ++m)
        out[m] = std::polar(mag[m], phi[m]);
    return out;
}

inline double norm2(const RVec& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

inline double norm2(const CVec& x) {
    double s = 0.0;
    for (const Complex& v : x) s += std::norm(v);
    return std::sqrt(s);
}

inline double dot(const RVec& a, const RVec& b) {
    double s = 0.0;
    for (std::size_t m = 0; m < a.size(); ++m) s += a[m] * b[m];
    return s;
}

// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
    const double two_pi = 2.0 * M_PI;
    a = std::fmod(a, two_pi);
    if (a <= -M_PI) a += two_pi;
    if (a > M_PI) a -= two_pi;
    return a;
}

} // namespace lvgrid
