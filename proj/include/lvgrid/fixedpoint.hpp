#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "lvgrid/types.hpp"

namespace lvgrid {

// min_{x,y} ||A x - B y - c||^2  subject to  y = g(x),
// with A (M x n, full rank), B (M x M, diagonal in this problem family),
// c in R^M and g a continuous surjection onto the relevant y-range. Solved
// through the composition fixed point y* = g(h(y*)), where h(y) is the
// minimizer of the unconstrained quadratic in x.
//
// Rows may extend past the y block: rows beyond y_rows carry zero B entries
// and act as fixed penalty rows (regularization stacking). In the plain
// problem y_rows == rows().
struct ConstrainedLS {
    std::vector<RVec> a_cols;  // n columns of length rows()
    RVec b_diag;               // diagonal of B, length y_rows
    RVec c;                    // length rows()
    std::function<RVec(const RVec& x)> g;  // maps x (n) to y (y_rows)
    // Optional validity-domain predicate for g's argument. When absent, a NaN
    // in g's output is treated as a domain violation.
    std::function<bool(const RVec& x)> domain_ok;

    std::size_t rows() const { return c.size(); }
    std::size_t y_rows() const { return b_diag.size(); }
    std::size_t unknowns() const { return a_cols.size(); }

    // B y + c over all rows (zero B past the y block).
    RVec target(const RVec& y) const;
    // ||A x - B y - c||^2
    double objective(const RVec& x, const RVec& y) const;
};

// Unique minimizer of f(., y): the linear least-squares solution A^+(B y + c).
// A is factored once per problem and reused across calls.
class HSolver {
public:
    explicit HSolver(const ConstrainedLS& prob);
    RVec solve(const RVec& y) const;

private:
    const ConstrainedLS& prob_;
    struct Impl;
    std::shared_ptr<Impl> impl_;
};

struct FixedPointResult {
    RVec y_star;
    RVec x_star;
    int iterations = 0;      // number of h evaluations
    double final_gap = 0.0;  // ||g(h(y)) - y||_2 at the returned iterate
    bool converged = false;
};

RVec solve_h(const ConstrainedLS& prob, const RVec& y);

// Damped composition iteration y <- y + alpha (g(h(y)) - y) from y0, stopping
// when the gap drops to eps. On iteration exhaustion the best iterate seen is
// returned with converged = false. Throws DomainViolation when an iterate
// leaves g's validity domain.
FixedPointResult fixed_point_iterate(const ConstrainedLS& prob, double alpha, double eps,
                                     int max_iters, const RVec& y0);

} // namespace lvgrid
