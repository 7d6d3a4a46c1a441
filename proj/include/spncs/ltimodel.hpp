#pragma once

#include "spncs/numerics.hpp"

namespace spncs {

struct StructuralError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Plant-side blocks. Absent signals are zero-dimensioned matrices, so a
/// single assembly path covers the general layout and reduced examples.
struct PlantMatrices {
    Matrix A11p, A12p, A21p, A22p;   // state blocks
    Matrix A13p, A14p, A23p, A24p;   // input blocks (u_s, u_f columns)
    Matrix Ax_ps, Ax_pf, Az_pf;      // output blocks

    Eigen::Index n_xp() const { return A11p.rows(); }
    Eigen::Index n_zp() const { return A22p.rows(); }
    Eigen::Index n_ys() const { return Ax_ps.rows(); }
    Eigen::Index n_yf() const { return Ax_pf.rows(); }
    Eigen::Index n_us() const { return A13p.cols(); }
    Eigen::Index n_uf() const { return A14p.cols(); }
};

struct ControllerMatrices {
    Matrix A11c, A12c, A21c, A22c;
    Matrix A13c, A14c, A23c, A24c;   // input blocks (y_s, y_f columns)
    Matrix Ax_cs, Ax_cf, Az_cf;      // output blocks

    Eigen::Index n_xc() const { return A11c.rows(); }
    Eigen::Index n_zc() const { return A22c.rows(); }
};

/// Every block of the single-channel LTI closed loop, with the derived
/// quasi-steady-state map and the reduced / boundary-layer matrices
/// cached at construction.
struct ClosedLoop {
    Matrix A11, A12, A13, A14;
    Matrix A21, A22, A23, A24;
    Matrix A31, A32, A33, A34;
    Matrix A41eps, A42eps, A43eps, A44eps;
    Matrix A41, A42, A43, A44;
    Matrix Ax_s, Ax_f, Az_f;
    Matrix dk_dx;                    // x-block of the fast-output map gradient

    Matrix A33_inv;
    Matrix Hx, He;                   // quasi-steady state: z = Hx x + He e_s
    Matrix A11s, A12s, A21s, A22s;   // reduced system
    Matrix A11f, A12f, A21f, A22f;   // boundary layer

    Eigen::Index n_x() const { return A11.rows(); }
    Eigen::Index n_es() const { return A12.cols(); }
    Eigen::Index n_z() const { return A33.rows(); }
    Eigen::Index n_ef() const { return A14.cols(); }
};

namespace ltimodel {

/// Builds every closed-loop block by the block formulas, inverting A33
/// once. Throws SingularMatrixError when A33 is singular (the
/// quasi-steady state of the fast dynamics then does not exist) and
/// StructuralError on dimension inconsistencies.
ClosedLoop assemble_closed_loop(const PlantMatrices& p, const ControllerMatrices& c);

/// H(x, e_s) = Hx x + He e_s, the root of the frozen fast flow.
Vector quasi_steady_state(const ClosedLoop& cl, const Vector& x, const Vector& e_s);

/// Plant/controller of the worked numerical example: a scalar slow plant
/// state, two fast plant states, one controller state, scalar u_s and
/// y_f, and no y_s / u_f / z_c.
PlantMatrices example_plant();
ControllerMatrices example_controller();

}  // namespace ltimodel
}  // namespace spncs
