#include "spncs/ltimodel.hpp"

namespace spncs::ltimodel {
namespace {

Matrix block2(const Matrix& tl, const Matrix& tr, const Matrix& bl, const Matrix& br) {
    if (tl.rows() != tr.rows() || bl.rows() != br.rows() || tl.cols() != bl.cols() ||
        tr.cols() != br.cols()) {
        throw StructuralError("block assembly: inconsistent block dimensions");
    }
    Matrix out(tl.rows() + bl.rows(), tl.cols() + tr.cols());
    out.topLeftCorner(tl.rows(), tl.cols()) = tl;
    out.topRightCorner(tr.rows(), tr.cols()) = tr;
    out.bottomLeftCorner(bl.rows(), bl.cols()) = bl;
    out.bottomRightCorner(br.rows(), br.cols()) = br;
    return out;
}

Matrix zeros(Eigen::Index r, Eigen::Index c) { return Matrix::Zero(r, c); }

void require_dims(const PlantMatrices& p, const ControllerMatrices& c) {
    const auto xp = p.n_xp(), zp = p.n_zp(), xc = c.n_xc(), zc = c.n_zc();
    const auto ys = p.n_ys(), yf = p.n_yf(), us = p.n_us(), uf = p.n_uf();

    auto want = [](const Matrix& m, Eigen::Index r, Eigen::Index cc, const char* name) {
        if (m.rows() != r || m.cols() != cc) {
            throw StructuralError(std::string("closed loop: block ") + name + " expected " +
                                  std::to_string(r) + "x" + std::to_string(cc) + ", got " +
                                  std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
        }
    };
    want(p.A11p, xp, xp, "A11p"); want(p.A12p, xp, zp, "A12p");
    want(p.A21p, zp, xp, "A21p"); want(p.A22p, zp, zp, "A22p");
    want(p.A13p, xp, us, "A13p"); want(p.A14p, xp, uf, "A14p");
    want(p.A23p, zp, us, "A23p"); want(p.A24p, zp, uf, "A24p");
    want(p.Ax_ps, ys, xp, "Ax_ps"); want(p.Ax_pf, yf, xp, "Ax_pf"); want(p.Az_pf, yf, zp, "Az_pf");
    want(c.A11c, xc, xc, "A11c"); want(c.A12c, xc, zc, "A12c");
    want(c.A21c, zc, xc, "A21c"); want(c.A22c, zc, zc, "A22c");
    want(c.A13c, xc, ys, "A13c"); want(c.A14c, xc, yf, "A14c");
    want(c.A23c, zc, ys, "A23c"); want(c.A24c, zc, yf, "A24c");
    want(c.Ax_cs, us, xc, "Ax_cs"); want(c.Ax_cf, uf, xc, "Ax_cf"); want(c.Az_cf, uf, zc, "Az_cf");
}

}  // namespace

ClosedLoop assemble_closed_loop(const PlantMatrices& p, const ControllerMatrices& c) {
    require_dims(p, c);
    const auto xp = p.n_xp(), zp = p.n_zp(), xc = c.n_xc(), zc = c.n_zc();
    const auto ys = p.n_ys(), yf = p.n_yf(), us = p.n_us(), uf = p.n_uf();

    ClosedLoop cl;
    cl.A11 = block2(p.A11p, p.A13p * c.Ax_cs + p.A14p * c.Ax_cf,
                    c.A13c * p.Ax_ps + c.A14c * p.Ax_pf, c.A11c);
    cl.A12 = block2(zeros(xp, ys), p.A13p, c.A13c, zeros(xc, us));
    cl.A13 = block2(p.A12p, p.A14p * c.Az_cf, c.A14c * p.Az_pf, c.A12c);
    cl.A14 = block2(zeros(xp, yf), p.A14p, c.A14c, zeros(xc, uf));

    cl.A31 = block2(p.A21p, p.A23p * c.Ax_cs + p.A24p * c.Ax_cf,
                    c.A23c * p.Ax_ps + c.A24c * p.Ax_pf, c.A21c);
    cl.A32 = block2(zeros(zp, ys), p.A23p, c.A23c, zeros(zc, us));
    cl.A33 = block2(p.A22p, p.A24p * c.Az_cf, c.A24c * p.Az_pf, c.A22c);
    cl.A34 = block2(zeros(zp, yf), p.A24p, c.A24c, zeros(zc, uf));

    cl.Ax_s = block2(-p.Ax_ps, zeros(ys, xc), zeros(us, xp), -c.Ax_cs);
    cl.Ax_f = block2(-p.Ax_pf, zeros(yf, xc), zeros(uf, xp), -c.Ax_cf);
    cl.Az_f = block2(-p.Az_pf, zeros(yf, zc), zeros(uf, zp), -c.Az_cf);
    cl.dk_dx = block2(p.Ax_pf, zeros(yf, xc), zeros(uf, xp), c.Ax_cf);

    cl.A21 = cl.Ax_s * cl.A11;
    cl.A22 = cl.Ax_s * cl.A12;
    cl.A23 = cl.Ax_s * cl.A13;
    cl.A24 = cl.Ax_s * cl.A14;

    cl.A41eps = cl.Ax_f * cl.A11;
    cl.A42eps = cl.Ax_f * cl.A12;
    cl.A43eps = cl.Ax_f * cl.A13;
    cl.A44eps = cl.Ax_f * cl.A14;
    cl.A41 = cl.Az_f * cl.A31;
    cl.A42 = cl.Az_f * cl.A32;
    cl.A43 = cl.Az_f * cl.A33;
    cl.A44 = cl.Az_f * cl.A34;

    cl.A33_inv = numerics::mat_inv(cl.A33);
    cl.Hx = -cl.A33_inv * cl.A31;
    cl.He = -cl.A33_inv * cl.A32;

    cl.A11s = cl.A11 - cl.A13 * cl.A33_inv * cl.A31;
    cl.A12s = cl.A12 - cl.A13 * cl.A33_inv * cl.A32;
    cl.A21s = cl.A21 - cl.A23 * cl.A33_inv * cl.A31;
    cl.A22s = cl.A22 - cl.A23 * cl.A33_inv * cl.A32;

    cl.A11f = cl.A33;
    cl.A12f = cl.A34;
    cl.A21f = cl.Az_f * cl.A33;
    cl.A22f = cl.Az_f * cl.A34;
    return cl;
}

Vector quasi_steady_state(const ClosedLoop& cl, const Vector& x, const Vector& e_s) {
    if (x.size() != cl.n_x() || e_s.size() != cl.n_es()) {
        throw DimensionError("quasi_steady_state: dimension mismatch");
    }
    return cl.Hx * x + cl.He * e_s;
}

PlantMatrices example_plant() {
    const double a1 = 1e-4, a2 = 0.2, a3 = 0.6, a4 = 0.73;
    const double n1 = 0.02, n2 = 0.0018;
    PlantMatrices p;
    p.A11p = Matrix::Constant(1, 1, a1);
    p.A12p = (Matrix(1, 2) << a2, 0).finished();
    p.A21p = (Matrix(2, 1) << 0, a3).finished();
    p.A22p = (Matrix(2, 2) << -a2, 0, -a2, -a4).finished();
    p.A13p = Matrix::Constant(1, 1, n1);
    p.A14p = Matrix(1, 0);
    p.A23p = (Matrix(2, 1) << -n2, -n2).finished();
    p.A24p = Matrix(2, 0);
    p.Ax_ps = Matrix(0, 1);
    p.Ax_pf = Matrix::Constant(1, 1, 1.0);
    p.Az_pf = (Matrix(1, 2) << 0, 1).finished();
    return p;
}

ControllerMatrices example_controller() {
    const double a5 = 1.11, a6 = 0.37, k = 1.5;
    ControllerMatrices c;
    c.A11c = Matrix::Constant(1, 1, -a5);
    c.A12c = Matrix(1, 0);
    c.A21c = Matrix(0, 1);
    c.A22c = Matrix(0, 0);
    c.A13c = Matrix(1, 0);
    c.A14c = Matrix::Constant(1, 1, a6);
    c.A23c = Matrix(0, 0);
    c.A24c = Matrix(0, 1);
    c.Ax_cs = Matrix::Constant(1, 1, -k);
    c.Ax_cf = Matrix(0, 1);
    c.Az_cf = Matrix(0, 0);
    return c;
}

}  // namespace spncs::ltimodel
