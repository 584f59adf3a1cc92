#include "lvgrid/fixedpoint.hpp"

#include <cmath>
#include <limits>

#include "lvgrid/errors.hpp"
#include "lvgrid/lstsq.hpp"

namespace lvgrid {

RVec ConstrainedLS::target(const RVec& y) const {
    RVec t(c.size());
    const std::size_t yr = y_rows();
    for (std::size_t m = 0; m < c.size(); ++m)
        t[m] = (m < yr ? b_diag[m] * y[m] : 0.0) + c[m];
    return t;
}

double ConstrainedLS::objective(const RVec& x, const RVec& y) const {
    double s = 0.0;
    const std::size_t yr = y_rows();
    for (std::size_t m = 0; m < c.size(); ++m) {
        double ax = 0.0;
        for (std::size_t k = 0; k < a_cols.size(); ++k) ax += a_cols[k][m] * x[k];
        const double r = ax - (m < yr ? b_diag[m] * y[m] : 0.0) - c[m];
        s += r * r;
    }
    return s;
}

struct HSolver::Impl {
    std::unique_ptr<Lstsq1> s1;
    std::unique_ptr<Lstsq2> s2;
    std::vector<RVec> cols;  // generic n > 2 path
};

HSolver::HSolver(const ConstrainedLS& prob) : prob_(prob), impl_(std::make_shared<Impl>()) {
    if (prob.a_cols.empty() || prob.c.empty() || prob.b_diag.size() > prob.c.size())
        throw InvalidConfig("constrained least squares: inconsistent dimensions");
    for (const auto& col : prob.a_cols)
        if (col.size() != prob.c.size())
            throw InvalidConfig("constrained least squares: column length mismatch");
    const std::size_t n = prob.unknowns();
    if (n == 1)
        impl_->s1 = std::make_unique<Lstsq1>(prob.a_cols[0], prob.rows());
    else if (n == 2)
        impl_->s2 = std::make_unique<Lstsq2>(prob.a_cols[0], prob.a_cols[1], prob.rows());
    else
        impl_->cols = prob.a_cols;
}

RVec HSolver::solve(const RVec& y) const {
    const RVec t = prob_.target(y);
    if (impl_->s1) return {impl_->s1->solve(t)};
    if (impl_->s2) {
        const auto z = impl_->s2->solve(t);
        return {z[0], z[1]};
    }
    return lstsq_cols(impl_->cols, t, t.size());
}

RVec solve_h(const ConstrainedLS& prob, const RVec& y) {
    return HSolver(prob).solve(y);
}

namespace {

bool has_nan(const RVec& v) {
    for (double x : v)
        if (std::isnan(x)) return true;
    return false;
}

} // namespace

FixedPointResult fixed_point_iterate(const ConstrainedLS& prob, double alpha, double eps,
                                     int max_iters, const RVec& y0) {
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw InvalidConfig("fixed-point step size must satisfy 0 < alpha < 1");
    if (max_iters < 1) throw InvalidConfig("max_iters must be >= 1");
    if (y0.size() != prob.y_rows()) throw InvalidConfig("y0 length mismatch");

    HSolver h(prob);
    RVec y = y0;
    FixedPointResult best;
    best.final_gap = std::numeric_limits<double>::infinity();

    for (int iter = 1;; ++iter) {
        RVec x = h.solve(y);
        if (prob.domain_ok && !prob.domain_ok(x))
            throw DomainViolation("fixed-point iterate left the validity domain of g");
        RVec gx = prob.g(x);
        if (has_nan(gx))
            throw DomainViolation("g produced NaN (argument outside its domain)");

        double gap_sq = 0.0;
        for (std::size_t m = 0; m < y.size(); ++m) {
            const double d = gx[m] - y[m];
            gap_sq += d * d;
        }
        const double gap = std::sqrt(gap_sq);
        if (gap < best.final_gap) {
            best.final_gap = gap;
            best.y_star = y;
            best.x_star = x;
            best.iterations = iter;
        }
        if (gap <= eps) {
            best.converged = true;
            best.y_star = std::move(y);
            best.x_star = std::move(x);
            best.final_gap = gap;
            best.iterations = iter;
            return best;
        }
        if (iter >= max_iters) {
            best.converged = false;
            best.iterations = iter;
            return best;
        }
        for (std::size_t m = 0; m < y.size(); ++m) y[m] += alpha * (gx[m] - y[m]);
    }
}

} // namespace lvgrid
