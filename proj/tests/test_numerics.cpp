#include "spncs/numerics.hpp"
#include "spncs/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace spncs;
using namespace spncs::numerics;

namespace {

Matrix random_matrix(SplitMix64& rng, Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.next_in(-2.0, 2.0);
    return m;
}

Matrix random_symmetric(SplitMix64& rng, Eigen::Index n) {
    const Matrix m = random_matrix(rng, n, n);
    return 0.5 * (m + m.transpose());
}

// Oracle: naive triple-loop product.
Matrix triple_loop_product(const Matrix& a, const Matrix& b) {
    Matrix out = Matrix::Zero(a.rows(), b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.cols(); ++j)
            for (Eigen::Index k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
    return out;
}

// Oracle: power iteration on a^T a.
double power_iteration_norm(const Matrix& a, Vector* out_vec = nullptr) {
    const Matrix g = a.transpose() * a;
    Vector v = Vector::Ones(g.rows()).normalized();
    double lam = 0.0;
    for (int it = 0; it < 20000; ++it) {
        Vector w = g * v;
        const double n = w.norm();
        if (n == 0.0) return 0.0;
        w /= n;
        if ((w - v).norm() < 1e-14 && it > 10) { v = w; lam = n; break; }
        v = w;
        lam = n;
    }
    if (out_vec != nullptr) *out_vec = v;
    return std::sqrt(lam);
}

// Oracle: sign-scan plus bisection on det(a - lambda I); the extreme
// roots of the characteristic polynomial bracket every eigenvalue.
std::pair<double, double> det_bisection_extremes(const Matrix& a) {
    const Eigen::Index n = a.rows();
    double lo = a(0, 0), hi = a(0, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        double radius = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) radius += std::abs(a(i, j));
        lo = std::min(lo, a(i, i) - radius);
        hi = std::max(hi, a(i, i) + radius);
    }
    lo -= 1.0;
    hi += 1.0;
    auto f = [&](double lam) {
        return determinant(a - lam * Matrix::Identity(n, n));
    };
    const int scan = 4000;
    std::vector<double> roots;
    double prev_x = lo, prev_f = f(lo);
    for (int i = 1; i <= scan; ++i) {
        const double x = lo + (hi - lo) * i / scan;
        const double fx = f(x);
        if ((prev_f < 0 && fx > 0) || (prev_f > 0 && fx < 0) || fx == 0.0) {
            double a1 = prev_x, b1 = x, fa = prev_f;
            for (int it = 0; it < 200; ++it) {
                const double m = 0.5 * (a1 + b1);
                const double fm = f(m);
                if ((fa < 0 && fm < 0) || (fa > 0 && fm > 0)) { a1 = m; fa = fm; }
                else { b1 = m; }
            }
            roots.push_back(0.5 * (a1 + b1));
        }
        prev_x = x;
        prev_f = fx;
    }
    REQUIRE(!roots.empty());
    return {roots.front(), roots.back()};
}

}  // namespace

TEST_CASE("matrix product") {
    Matrix m = (Matrix(2, 2) << 0.3, -1.2, 4.5, 0.01).finished();
    CHECK((mat_mul(Matrix::Identity(2, 2), m) - m).norm() == 0.0);

    Matrix a = (Matrix(2, 2) << 1, 2, 3, 4).finished();
    Matrix b = (Matrix(2, 1) << 0, 1).finished();
    Matrix ab = mat_mul(a, b);
    CHECK(ab(0, 0) == 2.0);
    CHECK(ab(1, 0) == 4.0);

    SplitMix64 rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const Matrix x = random_matrix(rng, 3, 3);
        const Matrix y = random_matrix(rng, 3, 3);
        CHECK((mat_mul(x, y) - triple_loop_product(x, y)).cwiseAbs().maxCoeff() < 1e-13);
    }

    CHECK_THROWS_AS(mat_mul(Matrix::Zero(2, 3), Matrix::Zero(2, 3)), DimensionError);
    Matrix bad = m;
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(mat_mul(bad, m), NonFiniteError);
}

TEST_CASE("matrix inverse") {
    CHECK((mat_inv(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)).norm() == 0.0);

    Matrix d = (Matrix(2, 2) << 2, 0, 0, 4).finished();
    Matrix di = mat_inv(d);
    CHECK(di(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(di(1, 1) == doctest::Approx(0.25).epsilon(1e-15));

    const Matrix a33 = (Matrix(2, 2) << -0.2, 0, -0.2, -0.73).finished();
    const Matrix residual = a33 * mat_inv(a33) - Matrix::Identity(2, 2);
    CHECK(residual.norm() <= 1e-9 * a33.norm());

    SplitMix64 rng(12);
    for (int rep = 0; rep < 30; ++rep) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.next_u64() % 7);
        Matrix m = random_matrix(rng, n, n) + 3.0 * Matrix::Identity(n, n);
        const Matrix res = m * mat_inv(m) - Matrix::Identity(n, n);
        CHECK(res.norm() <= 1e-9 * m.norm());
    }

    Matrix singular = (Matrix(2, 2) << 1, 2, 2, 4).finished();
    CHECK_THROWS_AS(mat_inv(singular), SingularMatrixError);
    try {
        mat_inv(singular);
    } catch (const SingularMatrixError& e) {
        CHECK(e.pivot_index == 1);
    }
}

TEST_CASE("symmetric eigenvalue extremes") {
    Matrix d = Matrix::Zero(3, 3);
    d.diagonal() << 1, 5, -2;
    auto [lo, hi] = sym_eig_extremes(d);
    CHECK(lo == doctest::Approx(-2).epsilon(1e-12));
    CHECK(hi == doctest::Approx(5).epsilon(1e-12));

    // 2x2 closed form: eigenvalues from trace and determinant.
    Matrix ps = (Matrix(2, 2) << 54.91, -1.76, -1.76, 1.81).finished();
    const double tr = ps.trace(), det = ps(0, 0) * ps(1, 1) - ps(0, 1) * ps(1, 0);
    const double disc = std::sqrt(tr * tr - 4 * det);
    auto [ps_lo, ps_hi] = sym_eig_extremes(ps);
    CHECK(ps_lo == doctest::Approx(0.5 * (tr - disc)).epsilon(1e-12));
    CHECK(ps_hi == doctest::Approx(0.5 * (tr + disc)).epsilon(1e-12));
    CHECK(ps_lo == doctest::Approx(1.7517).epsilon(1e-3));
    CHECK(ps_hi == doctest::Approx(54.968).epsilon(1e-3));

    SplitMix64 rng(13);
    for (int rep = 0; rep < 10; ++rep) {
        const Matrix m = random_symmetric(rng, 4);
        auto [jl, jh] = sym_eig_extremes(m);
        auto [bl, bh] = det_bisection_extremes(m);
        CHECK(jl == doctest::Approx(bl).epsilon(1e-8));
        CHECK(jh == doctest::Approx(bh).epsilon(1e-8));
    }

    Matrix asym = (Matrix(2, 2) << 1, 2, 3, 4).finished();
    CHECK_THROWS_AS(sym_eig_extremes(asym), AsymmetryError);
}

TEST_CASE("rayleigh quotient sandwiched by the eigenvalue extremes") {
    SplitMix64 rng(14);
    const Matrix m = random_symmetric(rng, 5);
    auto [lo, hi] = sym_eig_extremes(m);
    for (int rep = 0; rep < 100; ++rep) {
        Vector v = random_matrix(rng, 5, 1);
        v.normalize();
        const double q = v.dot(m * v);
        CHECK(q >= lo - 1e-10);
        CHECK(q <= hi + 1e-10);
    }
}

TEST_CASE("spectral norm") {
    CHECK(spectral_norm(Matrix::Zero(3, 2)) == 0.0);

    Matrix d = Matrix::Zero(2, 2);
    d.diagonal() << 3, -4;
    CHECK(spectral_norm(d) == doctest::Approx(4).epsilon(1e-14));

    SplitMix64 rng(15);
    for (int rep = 0; rep < 10; ++rep) {
        const Matrix m = random_matrix(rng, 3, 2);
        Vector top;
        const double pw = power_iteration_norm(m, &top);
        const double sn = spectral_norm(m);
        CHECK(sn == doctest::Approx(pw).epsilon(1e-8));
        // Operator bound, with the oracle vector achieving it.
        for (int k = 0; k < 20; ++k) {
            Vector v = random_matrix(rng, 2, 1);
            if (v.norm() == 0) continue;
            CHECK(sn >= (m * v).norm() / v.norm() - 1e-10);
        }
        CHECK((m * top).norm() / top.norm() >= sn - 1e-6);
    }
}

TEST_CASE("negative semidefiniteness") {
    CHECK(is_neg_semidefinite(-Matrix::Identity(2, 2), 0.0));
    Matrix ind = Matrix::Zero(2, 2);
    ind.diagonal() << 1, -1;
    CHECK_FALSE(is_neg_semidefinite(ind, 0.0));
    CHECK(is_neg_semidefinite(ind, 1.0));
    Matrix asym = (Matrix(2, 2) << 0, 1, -1, 0).finished();
    CHECK_THROWS_AS(is_neg_semidefinite(asym, 0.0), AsymmetryError);
}
