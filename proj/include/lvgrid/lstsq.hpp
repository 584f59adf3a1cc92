#pragma once

#include <array>
#include <cstddef>

#include "lvgrid/types.hpp"

namespace lvgrid {

// M x 2 real matrix stored by column.
struct Mat2Cols {
    RVec c0, c1;
    std::size_t rows() const { return c0.size(); }
};

// J*Q1 = [Re(j), -Im(j)]: multiplies [Re(z), Im(z)]^T into Re(j z).
Mat2Cols q1_matrix(const CVec& j);
// J*Q2 = [Im(j), Re(j)]: multiplies [Re(z), Im(z)]^T into Im(j z).
Mat2Cols q2_matrix(const CVec& j);
// J = [Re(j), Im(j)], the per-line measurement matrix.
Mat2Cols j_matrix(const CVec& j);

// Relative singular-value threshold below which a matrix is treated as rank
// deficient (double precision noise floor for M <= 5000).
inline constexpr double kRankTol = 1e-10;

// Prepared two-column least-squares solver. The columns (optionally including
// stacked regularization rows whose right-hand side is implicitly zero) are
// factored once; solve() may then be called with many right-hand sides of
// length data_rows. Normal equations are used while the Gram condition stays
// below 1e8; beyond that a one-sided Jacobi factorization takes over.
class Lstsq2 {
public:
    Lstsq2(RVec c0, RVec c1, std::size_t data_rows);

    std::array<double, 2> solve(const RVec& b) const;

    double sigma_max() const { return sigma_max_; }
    double sigma_min() const { return sigma_min_; }
    double cond() const;

private:
    RVec c0_, c1_;       // raw columns (normal-equation path)
    RVec u0_, u1_;       // rotated orthogonal columns (Jacobi path)
    std::size_t data_rows_;
    bool use_jacobi_ = false;
    double gi00_ = 0, gi01_ = 0, gi11_ = 0;     // inverse Gram entries
    double cs_ = 1, sn_ = 0;                    // Jacobi rotation
    double inv_s0sq_ = 0, inv_s1sq_ = 0;
    double sigma_max_ = 0, sigma_min_ = 0;
};

// Prepared single-column solver (X/R-reduced problems).
class Lstsq1 {
public:
    Lstsq1(RVec col, std::size_t data_rows);
    double solve(const RVec& b) const;

private:
    RVec col_;
    std::size_t data_rows_;
    double inv_ss_ = 0;
};

// One-shot minimizer of ||b - A z||_2^2. Throws RankDeficient when the
// smallest singular value falls below kRankTol times the largest.
std::array<double, 2> lstsq_2col(const Mat2Cols& A, const RVec& b);

// Minimizer of ||b - A z||^2 + mu ||D z||^2 via the stacked system
// [A; sqrt(mu) D]. D may have any number of rows, including a single row.
// mu = 0 reduces exactly to lstsq_2col.
std::array<double, 2> regularized_lstsq(const Mat2Cols& A, const RVec& b,
                                        const Mat2Cols& D, double mu);

// Ratio of largest to smallest singular value; +inf for rank-deficient input.
double condition_number(const Mat2Cols& A);

// Small generic least squares over n columns (normal equations, partial
// pivoting). Rows of b beyond data_rows are implicitly zero. n = 1 and n = 2
// route through the specialized solvers above.
RVec lstsq_cols(const std::vector<RVec>& cols, const RVec& b, std::size_t data_rows);

} // namespace lvgrid
