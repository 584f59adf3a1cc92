#include "lvgrid/lstsq.hpp"

#include <cmath>
#include <limits>

#include "lvgrid/errors.hpp"

namespace lvgrid {

namespace {

double dot_head(const RVec& a, const RVec& b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

// Eigenvalues of the symmetric 2x2 matrix [[a, b], [b, c]], largest first.
std::array<double, 2> sym2_eigenvalues(double a, double b, double c) {
    const double tr = a + c;
    const double disc = std::sqrt((a - c) * (a - c) + 4.0 * b * b);
    double lo = 0.5 * (tr - disc);
    if (lo < 0.0) lo = 0.0;
    return {0.5 * (tr + disc), lo};
}

} // namespace

Mat2Cols q1_matrix(const CVec& j) {
    Mat2Cols A;
    A.c0.resize(j.size());
    A.c1.resize(j.size());
    for (std::size_t m = 0; m < j.size(); ++m) {
        A.c0[m] = j[m].real();
        A.c1[m] = -j[m].imag();
    }
    return A;
}

Mat2Cols q2_matrix(const CVec& j) {
    Mat2Cols A;
    A.c0.resize(j.size());
    A.c1.resize(j.size());
    for (std::size_t m = 0; m < j.size(); ++m) {
        A.c0[m] = j[m].imag();
        A.c1[m] = j[m].real();
    }
    return A;
}

Mat2Cols j_matrix(const CVec& j) {
    Mat2Cols A;
    A.c0.resize(j.size());
    A.c1.resize(j.size());
    for (std::size_t m = 0; m < j.size(); ++m) {
        A.c0[m] = j[m].real();
        A.c1[m] = j[m].imag();
    }
    return A;
}

Lstsq2::Lstsq2(RVec c0, RVec c1, std::size_t data_rows)
    : c0_(std::move(c0)), c1_(std::move(c1)), data_rows_(data_rows) {
    if (c0_.size() != c1_.size() || c0_.empty())
        throw InvalidConfig("lstsq: column sizes disagree or empty");
    if (data_rows_ > c0_.size()) throw InvalidConfig("lstsq: data_rows exceeds column length");

    const std::size_t n = c0_.size();
    const double g00 = dot_head(c0_, c0_, n);
    const double g01 = dot_head(c0_, c1_, n);
    const double g11 = dot_head(c1_, c1_, n);

    const auto lam = sym2_eigenvalues(g00, g01, g11);
    sigma_max_ = std::sqrt(lam[0]);
    sigma_min_ = std::sqrt(lam[1]);
    if (!(sigma_min_ > kRankTol * sigma_max_) || sigma_max_ == 0.0)
        throw RankDeficient("lstsq: 2-column system is rank deficient "
                            "(degenerate current data: identical or single-spike measurements)");

    const double gram_cond = lam[0] / lam[1];
    use_jacobi_ = gram_cond > 1e8;
    if (!use_jacobi_) {
        const double det = g00 * g11 - g01 * g01;
        gi00_ = g11 / det;
        gi01_ = -g01 / det;
        gi11_ = g00 / det;
    } else {
        // One-sided Jacobi: rotate the two columns to orthogonality.
        const double theta = 0.5 * std::atan2(2.0 * g01, g00 - g11);
        cs_ = std::cos(theta);
        sn_ = std::sin(theta);
        u0_.resize(n);
        u1_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            u0_[i] = cs_ * c0_[i] + sn_ * c1_[i];
            u1_[i] = -sn_ * c0_[i] + cs_ * c1_[i];
        }
        const double s0sq = dot_head(u0_, u0_, n);
        const double s1sq = dot_head(u1_, u1_, n);
        sigma_max_ = std::sqrt(std::max(s0sq, s1sq));
        sigma_min_ = std::sqrt(std::min(s0sq, s1sq));
        if (!(sigma_min_ > kRankTol * sigma_max_))
            throw RankDeficient("lstsq: 2-column system is rank deficient");
        inv_s0sq_ = 1.0 / s0sq;
        inv_s1sq_ = 1.0 / s1sq;
    }
}

std::array<double, 2> Lstsq2::solve(const RVec& b) const {
    const std::size_t n = std::min(b.size(), data_rows_);
    if (!use_jacobi_) {
        const double r0 = dot_head(c0_, b, n);
        const double r1 = dot_head(c1_, b, n);
        return {gi00_ * r0 + gi01_ * r1, gi01_ * r0 + gi11_ * r1};
    }
    const double t0 = dot_head(u0_, b, n) * inv_s0sq_;
    const double t1 = dot_head(u1_, b, n) * inv_s1sq_;
    return {cs_ * t0 - sn_ * t1, sn_ * t0 + cs_ * t1};
}

double Lstsq2::cond() const {
    return sigma_min_ == 0.0 ? std::numeric_limits<double>::infinity()
                             : sigma_max_ / sigma_min_;
}

Lstsq1::Lstsq1(RVec col, std::size_t data_rows)
    : col_(std::move(col)), data_rows_(data_rows) {
    const double ss = dot_head(col_, col_, col_.size());
    if (ss == 0.0) throw ZeroColumn("lstsq: measurement column is identically zero");
    inv_ss_ = 1.0 / ss;
}

double Lstsq1::solve(const RVec& b) const {
    return dot_head(col_, b, std::min(b.size(), data_rows_)) * inv_ss_;
}

std::array<double, 2> lstsq_2col(const Mat2Cols& A, const RVec& b) {
    if (A.rows() < 2 || b.size() != A.rows())
        throw InvalidConfig("lstsq_2col: need M >= 2 rows and matching b");
    Lstsq2 solver(A.c0, A.c1, A.rows());
    return solver.solve(b);
}

std::array<double, 2> regularized_lstsq(const Mat2Cols& A, const RVec& b,
                                        const Mat2Cols& D, double mu) {
    if (mu < 0.0 || mu > 1.0) throw InvalidConfig("regularized_lstsq: mu must lie in [0, 1]");
    if (b.size() != A.rows()) throw InvalidConfig("regularized_lstsq: b length mismatch");
    if (mu == 0.0) return lstsq_2col(A, b);

    const double w = std::sqrt(mu);
    RVec c0 = A.c0, c1 = A.c1;
    c0.reserve(A.rows() + D.rows());
    c1.reserve(A.rows() + D.rows());
    for (std::size_t i = 0; i < D.rows(); ++i) {
        c0.push_back(w * D.c0[i]);
        c1.push_back(w * D.c1[i]);
    }
    Lstsq2 solver(std::move(c0), std::move(c1), A.rows());
    return solver.solve(b);
}

double condition_number(const Mat2Cols& A) {
    // Jacobi column norms: exact zero singular values map to +inf.
    const std::size_t n = A.rows();
    const double g00 = dot_head(A.c0, A.c0, n);
    const double g01 = dot_head(A.c0, A.c1, n);
    const double g11 = dot_head(A.c1, A.c1, n);
    const double theta = 0.5 * std::atan2(2.0 * g01, g00 - g11);
    const double cs = std::cos(theta), sn = std::sin(theta);
    double s0sq = 0.0, s1sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u0 = cs * A.c0[i] + sn * A.c1[i];
        const double u1 = -sn * A.c0[i] + cs * A.c1[i];
        s0sq += u0 * u0;
        s1sq += u1 * u1;
    }
    const double smax = std::sqrt(std::max(s0sq, s1sq));
    const double smin = std::sqrt(std::min(s0sq, s1sq));
    if (smin == 0.0) return std::numeric_limits<double>::infinity();
    return smax / smin;
}

RVec lstsq_cols(const std::vector<RVec>& cols, const RVec& b, std::size_t data_rows) {
    const std::size_t n = cols.size();
    if (n == 0) throw InvalidConfig("lstsq_cols: no columns");
    if (n == 1) {
        Lstsq1 s(cols[0], data_rows);
        return {s.solve(b)};
    }
    if (n == 2) {
        Lstsq2 s(cols[0], cols[1], data_rows);
        const auto z = s.solve(b);
        return {z[0], z[1]};
    }

    // Normal equations with partial pivoting for small n.
    const std::size_t rows = cols[0].size();
    std::vector<RVec> G(n, RVec(n + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = i; k < n; ++k) {
            const double g = dot_head(cols[i], cols[k], rows);
            G[i][k] = g;
            G[k][i] = g;
        }
        G[i][n] = dot_head(cols[i], b, std::min(b.size(), data_rows));
    }
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, G[i][i]);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(G[r][col]) > std::abs(G[piv][col])) piv = r;
        std::swap(G[piv], G[col]);
        if (std::abs(G[col][col]) <= kRankTol * kRankTol * max_diag)
            throw RankDeficient("lstsq_cols: normal equations are singular");
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = G[r][col] / G[col][col];
            for (std::size_t k = col; k <= n; ++k) G[r][k] -= f * G[col][k];
        }
    }
    RVec z(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double s = G[i][n];
        for (std::size_t k = i + 1; k < n; ++k) s -= G[i][k] * z[k];
        z[i] = s / G[i][i];
    }
    return z;
}

} // namespace lvgrid
