#include "spncs/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace spncs::numerics {

void require_finite(const Matrix& a, const char* label) {
    if (!a.allFinite()) {
        throw NonFiniteError(std::string(label) + ": non-finite entry");
    }
}

void require_symmetric(const Matrix& a, const char* label) {
    if (a.rows() != a.cols()) {
        throw DimensionError(std::string(label) + ": matrix is not square");
    }
    const double scale = std::max(1e-300, a.cwiseAbs().maxCoeff());
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (asym > kAsymmetryTolerance * scale) {
        throw AsymmetryError(std::string(label) + ": asymmetry " + std::to_string(asym / scale) +
                             " exceeds tolerance");
    }
}

Matrix mat_mul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("mat_mul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                             " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    require_finite(a, "mat_mul lhs");
    require_finite(b, "mat_mul rhs");
    return a * b;
}

namespace {

struct LuFactors {
    Matrix lu;               // packed L (unit diagonal) and U
    std::vector<int> perm;   // row permutation
    int sign = 1;
};

LuFactors lu_decompose(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw DimensionError("mat_inv: matrix is not square");
    }
    require_finite(a, "mat_inv");
    const int n = static_cast<int>(a.rows());
    const double scale = std::max(1e-300, a.cwiseAbs().maxCoeff());

    LuFactors f;
    f.lu = a;
    f.perm.resize(n);
    for (int i = 0; i < n; ++i) f.perm[i] = i;

    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = std::abs(f.lu(k, k));
        for (int r = k + 1; r < n; ++r) {
            const double v = std::abs(f.lu(r, k));
            if (v > best) { best = v; piv = r; }
        }
        if (best <= kSingularityThreshold * scale) {
            throw SingularMatrixError(k, "singular matrix: pivot " + std::to_string(k) +
                                             " has magnitude " + std::to_string(best));
        }
        if (piv != k) {
            f.lu.row(piv).swap(f.lu.row(k));
            std::swap(f.perm[piv], f.perm[k]);
            f.sign = -f.sign;
        }
        for (int r = k + 1; r < n; ++r) {
            const double m = f.lu(r, k) / f.lu(k, k);
            f.lu(r, k) = m;
            for (int c = k + 1; c < n; ++c) {
                f.lu(r, c) -= m * f.lu(k, c);
            }
        }
    }
    return f;
}

Vector lu_solve(const LuFactors& f, const Vector& b) {
    const int n = static_cast<int>(f.lu.rows());
    Vector y(n);
    for (int i = 0; i < n; ++i) {
        double s = b[f.perm[i]];
        for (int j = 0; j < i; ++j) s -= f.lu(i, j) * y[j];
        y[i] = s;
    }
    Vector x(n);
    for (int i = n - 1; i >= 0; --i) {
        double s = y[i];
        for (int j = i + 1; j < n; ++j) s -= f.lu(i, j) * x[j];
        x[i] = s / f.lu(i, i);
    }
    return x;
}

}  // namespace

Matrix mat_inv(const Matrix& a) {
    const LuFactors f = lu_decompose(a);
    const int n = static_cast<int>(a.rows());
    Matrix inv(n, n);
    Vector e = Vector::Zero(n);
    for (int c = 0; c < n; ++c) {
        e[c] = 1.0;
        inv.col(c) = lu_solve(f, e);
        e[c] = 0.0;
    }
    return inv;
}

double determinant(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw DimensionError("determinant: matrix is not square");
    }
    if (a.rows() == 0) return 1.0;
    LuFactors f;
    try {
        f = lu_decompose(a);
    } catch (const SingularMatrixError&) {
        return 0.0;
    }
    double det = f.sign;
    for (int i = 0; i < a.rows(); ++i) det *= f.lu(i, i);
    return det;
}

Vector sym_eigenvalues(const Matrix& a) {
    require_finite(a, "sym_eigenvalues");
    require_symmetric(a, "sym_eigenvalues");
    const int n = static_cast<int>(a.rows());
    if (n == 0) return Vector(0);

    Matrix m = 0.5 * (a + a.transpose());
    const double fro = std::max(1e-300, m.norm());

    auto off_norm = [&] {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) s += 2.0 * m(i, j) * m(i, j);
        return std::sqrt(s);
    };

    for (int sweep = 0; sweep < 64 && off_norm() > 1e-12 * fro; ++sweep) {
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = m(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double mip = m(i, p), miq = m(i, q);
                    m(i, p) = c * mip - s * miq;
                    m(i, q) = s * mip + c * miq;
                }
                for (int i = 0; i < n; ++i) {
                    const double mpi = m(p, i), mqi = m(q, i);
                    m(p, i) = c * mpi - s * mqi;
                    m(q, i) = s * mpi + c * mqi;
                }
            }
        }
    }

    Vector ev = m.diagonal();
    std::sort(ev.data(), ev.data() + n);
    return ev;
}

std::pair<double, double> sym_eig_extremes(const Matrix& a) {
    const Vector ev = sym_eigenvalues(a);
    if (ev.size() == 0) {
        throw DimensionError("sym_eig_extremes: empty matrix");
    }
    return {ev[0], ev[ev.size() - 1]};
}

double spectral_norm(const Matrix& a) {
    require_finite(a, "spectral_norm");
    if (a.size() == 0) return 0.0;
    // Work on the smaller Gram matrix of the two.
    const Matrix g = (a.rows() <= a.cols()) ? Matrix(a * a.transpose()) : Matrix(a.transpose() * a);
    const Vector ev = sym_eigenvalues(g);
    return std::sqrt(std::max(0.0, ev[ev.size() - 1]));
}

bool is_neg_semidefinite(const Matrix& a, double tol) {
    require_symmetric(a, "is_neg_semidefinite");
    if (a.size() == 0) return true;
    return sym_eig_extremes(a).second <= tol;
}

}  // namespace spncs::numerics
