#pragma once

// Brute-force lattice oracle for the constrained least-squares fixed point,
// independent of the library solver: h is evaluated through its own closed
// form and the objective is scanned over the y lattice.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

// Instance with M = 3 rows and n = 2 unknowns:
// f(x, y) = ||A1 x - diag(v) y - c||^2, y = g(x) = sqrt(1 - (A2 x)^2 / v^2).
struct Instance3 {
    double a1[3][2];
    double a2[3][2];
    double v[3];
    double c[3];
};

struct LatticeResult {
    double best_f = 0.0;
    std::array<double, 3> best_y{};
};

namespace detail {

// x = h(y) = pinv(A1)(diag(v) y + c), precomputed as x = q + P y.
struct Affine {
    double P[2][3];
    double q[2];
};

inline Affine h_affine(const Instance3& I) {
    double g00 = 0, g01 = 0, g11 = 0;
    for (int m = 0; m < 3; ++m) {
        g00 += I.a1[m][0] * I.a1[m][0];
        g01 += I.a1[m][0] * I.a1[m][1];
        g11 += I.a1[m][1] * I.a1[m][1];
    }
    const double det = g00 * g11 - g01 * g01;
    Affine A{};
    for (int m = 0; m < 3; ++m) {
        const double p0 = (g11 * I.a1[m][0] - g01 * I.a1[m][1]) / det;
        const double p1 = (g00 * I.a1[m][1] - g01 * I.a1[m][0]) / det;
        A.P[0][m] = p0 * I.v[m];
        A.P[1][m] = p1 * I.v[m];
        A.q[0] += p0 * I.c[m];
        A.q[1] += p1 * I.c[m];
    }
    return A;
}

// Feasible-pair objective through h: F(y) = f(h(y), g(h(y))).
inline double feasible_objective(const Instance3& I, const double x[2]) {
    double F = 0.0;
    for (int m = 0; m < 3; ++m) {
        const double w = I.a2[m][0] * x[0] + I.a2[m][1] * x[1];
        double rad = 1.0 - (w * w) / (I.v[m] * I.v[m]);
        if (rad < 0.0) rad = 0.0;
        const double gam = std::sqrt(rad);
        const double r = I.a1[m][0] * x[0] + I.a1[m][1] * x[1] - I.v[m] * gam - I.c[m];
        F += r * r;
    }
    return F;
}

} // namespace detail

// Exhaustive scan of the full lattice {lo + k h} ^ 3 with (steps + 1) points
// per axis. steps = 1000 gives the 1e-3 grid on [0, 1].
inline LatticeResult full_scan(const Instance3& I, int steps, double lo = 0.0,
                               double hi = 1.0) {
    const detail::Affine A = detail::h_affine(I);
    const double h = (hi - lo) / steps;
    LatticeResult out;
    out.best_f = 1e300;
    double x1[2], x2[2], x[2];
    double dx1[2], dx2[2], dx3[2], x0[2];
    for (int k = 0; k < 2; ++k) {
        x0[k] = A.q[k] + (A.P[k][0] + A.P[k][1] + A.P[k][2]) * lo;
        dx1[k] = A.P[k][0] * h;
        dx2[k] = A.P[k][1] * h;
        dx3[k] = A.P[k][2] * h;
    }
    for (int i1 = 0; i1 <= steps; ++i1) {
        x1[0] = x0[0] + dx1[0] * i1;
        x1[1] = x0[1] + dx1[1] * i1;
        for (int i2 = 0; i2 <= steps; ++i2) {
            x2[0] = x1[0] + dx2[0] * i2;
            x2[1] = x1[1] + dx2[1] * i2;
            x[0] = x2[0];
            x[1] = x2[1];
            for (int i3 = 0; i3 <= steps; ++i3) {
                const double F = detail::feasible_objective(I, x);
                if (F < out.best_f) {
                    out.best_f = F;
                    out.best_y = {lo + h * i1, lo + h * i2, lo + h * i3};
                }
                x[0] += dx3[0];
                x[1] += dx3[1];
            }
        }
    }
    return out;
}

// Coarse-to-fine search over the same final lattice: scans a coarse grid,
// keeps the best cells, and refines each kept cell until the spacing reaches
// the target resolution. Every evaluated point lies on the final lattice, so
// the result is a minimum over a subset of full_scan's points.
inline LatticeResult refined_scan(const Instance3& I, double resolution = 1e-3,
                                  int keep = 64) {
    const detail::Affine A = detail::h_affine(I);
    struct Cell {
        double f;
        std::array<double, 3> y;
    };
    // Level spacings: 0.025 -> 0.005 -> 0.001 on [0, 1].
    const std::vector<double> spacing{25 * resolution, 5 * resolution, resolution};

    auto eval_y = [&](const std::array<double, 3>& y) {
        double x[2];
        for (int k = 0; k < 2; ++k)
            x[k] = A.q[k] + A.P[k][0] * y[0] + A.P[k][1] * y[1] + A.P[k][2] * y[2];
        return detail::feasible_objective(I, x);
    };

    std::vector<Cell> frontier;
    {
        const double h0 = spacing[0];
        const int n0 = static_cast<int>(std::round(1.0 / h0));
        for (int i1 = 0; i1 <= n0; ++i1)
            for (int i2 = 0; i2 <= n0; ++i2)
                for (int i3 = 0; i3 <= n0; ++i3) {
                    const std::array<double, 3> y{i1 * h0, i2 * h0, i3 * h0};
                    frontier.push_back({eval_y(y), y});
                }
    }
    auto shrink = [&](std::vector<Cell>& cells) {
        std::sort(cells.begin(), cells.end(),
                  [](const Cell& a, const Cell& b) { return a.f < b.f; });
        if (static_cast<int>(cells.size()) > keep) cells.resize(keep);
    };
    shrink(frontier);

    for (std::size_t level = 1; level < spacing.size(); ++level) {
        const double h_prev = spacing[level - 1];
        const double h = spacing[level];
        const int half = static_cast<int>(std::round(h_prev / h));
        std::vector<Cell> next;
        for (const Cell& cell : frontier) {
            for (int d1 = -half; d1 <= half; ++d1)
                for (int d2 = -half; d2 <= half; ++d2)
                    for (int d3 = -half; d3 <= half; ++d3) {
                        std::array<double, 3> y{cell.y[0] + d1 * h, cell.y[1] + d2 * h,
                                                cell.y[2] + d3 * h};
                        bool ok = true;
                        for (double& yi : y) {
                            // snap to the lattice and stay inside the box
                            yi = std::round(yi / h) * h;
                            if (yi < -1e-12 || yi > 1.0 + 1e-12) ok = false;
                        }
                        if (ok) next.push_back({eval_y(y), y});
                    }
        }
        shrink(next);
        frontier = std::move(next);
    }
    LatticeResult out;
    out.best_f = frontier.front().f;
    out.best_y = frontier.front().y;
    return out;
}

} // namespace oracle
