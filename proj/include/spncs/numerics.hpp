#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <utility>

namespace spncs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct AsymmetryError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NonFiniteError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Raised when LU elimination meets a pivot below the relative threshold.
/// For the closed-loop model a singular A33 means the quasi-steady state
/// does not exist, so callers surface this as a standing-assumption failure.
struct SingularMatrixError : std::runtime_error {
    int pivot_index;
    explicit SingularMatrixError(int pivot, const std::string& what)
        : std::runtime_error(what), pivot_index(pivot) {}
};

namespace numerics {

/// Relative pivot threshold for LU elimination.
inline constexpr double kSingularityThreshold = 1e-12;

/// Relative asymmetry admitted by the symmetric eigensolver.
inline constexpr double kAsymmetryTolerance = 1e-10;

void require_finite(const Matrix& a, const char* label);
void require_symmetric(const Matrix& a, const char* label);

/// Checked product; throws DimensionError on inner-dimension mismatch.
Matrix mat_mul(const Matrix& a, const Matrix& b);

/// Inverse by LU with partial pivoting. Matrices here are tiny (<= 8x8).
Matrix mat_inv(const Matrix& a);

/// log-free determinant via the same LU; used by test oracles as well.
double determinant(const Matrix& a);

/// All eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi
/// sweeps until the off-diagonal Frobenius mass drops below
/// 1e-12 x ||a||_F.
Vector sym_eigenvalues(const Matrix& a);

/// (lambda_min, lambda_max) of a symmetric matrix.
std::pair<double, double> sym_eig_extremes(const Matrix& a);

/// sqrt(lambda_max(a^T a)); the operator 2-norm.
double spectral_norm(const Matrix& a);

/// True iff lambda_max(a) <= tol for symmetric a.
bool is_neg_semidefinite(const Matrix& a, double tol);

}  // namespace numerics
}  // namespace spncs
