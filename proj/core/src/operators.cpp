#include "nlsbif/operators.hpp"

#include <algorithm>
#include <cmath>

namespace nlsbif {

OperatorMatrix::OperatorMatrix(GridPtr grid, SymTridiag m, OpLabel label,
                               std::optional<double> ess_edge,
                               std::vector<double> sqrtm)
    : grid_(std::move(grid)), m_(std::move(m)), label_(label),
      ess_edge_(ess_edge), sqrtm_(std::move(sqrtm)) {
    require(m_.n() == grid_->ndof(), ErrorKind::structural,
            "operator size must match grid DOFs");
}

std::vector<double> OperatorMatrix::to_dof(const Field& f) const {
    const int nd = grid_->ndof();
    const int b = grid_->dof_begin();
    std::vector<double> x(static_cast<size_t>(nd));
    for (int i = 0; i < nd; ++i) {
        double v = f[b + i];
        if (!sqrtm_.empty()) v *= sqrtm_[static_cast<size_t>(i)];
        x[static_cast<size_t>(i)] = v;
    }
    return x;
}

Field OperatorMatrix::from_dof(const std::vector<double>& x) const {
    Field f(grid_);
    const int nd = grid_->ndof();
    const int b = grid_->dof_begin();
    for (int i = 0; i < nd; ++i) {
        double v = x[static_cast<size_t>(i)];
        if (!sqrtm_.empty()) v /= sqrtm_[static_cast<size_t>(i)];
        f[b + i] = v;
    }
    if (grid_->frame() == Frame::radial && f.size() >= 3)
        f[0] = (4.0 * f[1] - f[2]) / 3.0; // even regularity at r = 0
    return f;
}

Field OperatorMatrix::apply(const Field& f) const {
    require(f.grid() && f.grid()->same_as(*grid_), ErrorKind::structural,
            "operator applied to a field on a different grid");
    return from_dof(m_.apply(to_dof(f)));
}

Field OperatorMatrix::solve(const Field& rhs) const {
    TriLU lu(m_);
    return from_dof(lu.solve(to_dof(rhs)));
}

void OperatorMatrix::add_diagonal(const Field& w, double a) {
    const int b = grid_->dof_begin();
    for (int i = 0; i < m_.n(); ++i)
        m_.diag[static_cast<size_t>(i)] += a * w[b + i];
}

void OperatorMatrix::add_scalar(double a) {
    for (double& d : m_.diag) d += a;
}

OperatorMatrix laplacian_matrix(const GridPtr& grid) {
    const int nd = grid->ndof();
    const double h = grid->h();
    SymTridiag T(nd);
    if (grid->frame() == Frame::line) {
        for (int i = 0; i < nd; ++i) T.diag[static_cast<size_t>(i)] = 2.0 / (h * h);
        for (int i = 0; i + 1 < nd; ++i) T.off[static_cast<size_t>(i)] = -1.0 / (h * h);
        return OperatorMatrix(grid, std::move(T), OpLabel::custom, 0.0);
    }
    // radial: centered stencil for -v'' - ((n-1)/r) v', second-order at every
    // node. The r = 0 coupling is folded in through the even-regularity
    // extrapolation v0 = (4 v1 - v2)/3, and the nonsymmetric tridiagonal is
    // turned symmetric by an exact diagonal similarity.
    const int n = grid->dim();
    std::vector<double> lower(static_cast<size_t>(nd), 0.0);
    std::vector<double> upper(static_cast<size_t>(nd), 0.0);
    for (int i = 0; i < nd; ++i) {
        const double r = grid->node(i + 1);
        const double gco = (n - 1) / r;
        T.diag[static_cast<size_t>(i)] = 2.0 / (h * h);
        lower[static_cast<size_t>(i)] = -1.0 / (h * h) + gco / (2.0 * h);
        upper[static_cast<size_t>(i)] = -1.0 / (h * h) - gco / (2.0 * h);
    }
    // fold the ghost value at r = 0 into the first row
    T.diag[0] += lower[0] * 4.0 / 3.0;
    upper[0] -= lower[0] / 3.0;
    // diagonal similarity: m_{i+1} = m_i upper_i / lower_{i+1}
    std::vector<double> m(static_cast<size_t>(nd), 1.0);
    for (int i = 0; i + 1 < nd; ++i) {
        require(upper[static_cast<size_t>(i)] < 0.0 &&
                    lower[static_cast<size_t>(i + 1)] < 0.0,
                ErrorKind::structural, "radial stencil not symmetrizable");
        m[static_cast<size_t>(i + 1)] = m[static_cast<size_t>(i)] *
                                        upper[static_cast<size_t>(i)] /
                                        lower[static_cast<size_t>(i + 1)];
        T.off[static_cast<size_t>(i)] = -std::sqrt(upper[static_cast<size_t>(i)] *
                                                   lower[static_cast<size_t>(i + 1)]);
    }
    std::vector<double> sqrtm(static_cast<size_t>(nd));
    for (int i = 0; i < nd; ++i)
        sqrtm[static_cast<size_t>(i)] = std::sqrt(m[static_cast<size_t>(i)]);
    return OperatorMatrix(grid, std::move(T), OpLabel::custom, 0.0, std::move(sqrtm));
}

OperatorMatrix assemble_H0(const ProblemSpec& prob, const GridPtr& grid) {
    OperatorMatrix op = laplacian_matrix(grid);
    Field V = evaluate(prob.potential, grid);
    op.add_diagonal(V, 1.0);
    std::vector<double> sqrtm = op.sqrtm();
    return OperatorMatrix(grid, std::move(op.matrix()), OpLabel::H0, 0.0,
                          std::move(sqrtm));
}

namespace {
OperatorMatrix linearization(const ProblemSpec& prob, const Field& psi, double E,
                             double coef, OpLabel label) {
    const GridPtr& grid = psi.grid();
    OperatorMatrix lap = laplacian_matrix(grid);
    Field V = evaluate(prob.potential, grid);
    Field nl(grid);
    const double tp = 2.0 * prob.p;
    for (int i = 0; i < psi.size(); ++i)
        nl[i] = std::pow(std::abs(psi[i]), tp);
    lap.add_diagonal(V, 1.0);
    lap.add_scalar(E);
    lap.add_diagonal(nl, coef * prob.sigma);
    std::vector<double> sqrtm = lap.sqrtm();
    return OperatorMatrix(grid, std::move(lap.matrix()), label, E, std::move(sqrtm));
}
} // namespace

OperatorMatrix assemble_Lplus(const ProblemSpec& prob, const Field& psi, double E) {
    return linearization(prob, psi, E, 2.0 * prob.p + 1.0, OpLabel::Lplus);
}

OperatorMatrix assemble_Lminus(const ProblemSpec& prob, const Field& psi, double E) {
    return linearization(prob, psi, E, 1.0, OpLabel::Lminus);
}

double default_tol_zero(double E) { return 1e-6 * std::max(1.0, E); }

Inertia inertia(const OperatorMatrix& op, double shift, double tol_zero) {
    Inertia in;
    in.tol_zero = tol_zero;
    const int below = sturm_count_below(op.matrix(), shift - tol_zero);
    const int upto = sturm_count_below(op.matrix(), shift + tol_zero);
    in.n_neg = below;
    in.n_zero = upto - below;
    in.n_pos = op.matrix().n() - upto;
    return in;
}

Inertia inertia(const OperatorMatrix& op, double shift) {
    const double E = op.ess_edge().value_or(0.0);
    return inertia(op, shift, default_tol_zero(E));
}

std::vector<EigPair> smallest_eigs(const OperatorMatrix& op, int k) {
    require(k >= 1 && k <= 10, ErrorKind::structural,
            "smallest_eigs: k must be in [1, 10]");
    auto pairs = eig_smallest(op.matrix(), k);
    std::vector<EigPair> out;
    out.reserve(pairs.size());
    const double edge = op.ess_edge().value_or(0.0);
    const double tol = default_tol_zero(edge);
    for (auto& pr : pairs) {
        EigPair e;
        e.value = pr.value;
        e.vec = op.from_dof(pr.vector);
        const double nrm = lp_norm(e.vec, 2.0);
        if (nrm > 0.0) e.vec *= 1.0 / nrm;
        // deterministic sign on the physical field
        double mx = 0.0;
        for (int i = 0; i < e.vec.size(); ++i) mx = std::max(mx, std::abs(e.vec[i]));
        for (int i = 0; i < e.vec.size(); ++i) {
            if (std::abs(e.vec[i]) > 1e-6 * mx) {
                if (e.vec[i] < 0.0) e.vec *= -1.0;
                break;
            }
        }
        e.continuum = op.ess_edge().has_value() && e.value >= edge - 10.0 * tol;
        out.push_back(std::move(e));
    }
    return out;
}

Field projected_solve(const OperatorMatrix& op, const Field& rhs,
                      const std::vector<Field>& constraints) {
    const int m = static_cast<int>(constraints.size());
    require(m >= 1, ErrorKind::structural, "projected_solve needs constraints");

    // Gram determinant check on normalized constraints
    std::vector<Field> cn;
    cn.reserve(constraints.size());
    for (const auto& c : constraints) {
        const double nc = lp_norm(c, 2.0);
        require(nc > 0.0, ErrorKind::structural, "zero constraint vector");
        Field t = c;
        t *= 1.0 / nc;
        cn.push_back(std::move(t));
    }
    std::vector<std::vector<double>> G(static_cast<size_t>(m),
                                       std::vector<double>(static_cast<size_t>(m)));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            G[static_cast<size_t>(i)][static_cast<size_t>(j)] = inner(cn[static_cast<size_t>(i)], cn[static_cast<size_t>(j)]);
    // determinant by elimination (m is tiny)
    {
        auto A = G;
        double det = 1.0;
        for (int c = 0; c < m; ++c) {
            int piv = c;
            for (int r = c + 1; r < m; ++r)
                if (std::abs(A[static_cast<size_t>(r)][static_cast<size_t>(c)]) >
                    std::abs(A[static_cast<size_t>(piv)][static_cast<size_t>(c)]))
                    piv = r;
            if (piv != c) {
                std::swap(A[static_cast<size_t>(piv)], A[static_cast<size_t>(c)]);
                det = -det;
            }
            det *= A[static_cast<size_t>(c)][static_cast<size_t>(c)];
            if (A[static_cast<size_t>(c)][static_cast<size_t>(c)] == 0.0) break;
            for (int r = c + 1; r < m; ++r) {
                const double f = A[static_cast<size_t>(r)][static_cast<size_t>(c)] /
                                 A[static_cast<size_t>(c)][static_cast<size_t>(c)];
                for (int j = c; j < m; ++j)
                    A[static_cast<size_t>(r)][static_cast<size_t>(j)] -=
                        f * A[static_cast<size_t>(c)][static_cast<size_t>(j)];
            }
        }
        require(std::abs(det) > 1e-10, ErrorKind::structural,
                "constraints linearly dependent");
    }

    // Border vectors in the DOF variable: with x_i = sqrt(m_i) v_i the
    // constraint <v, c>_L2 = sum qw_i v_i c_i becomes <c_hat, x> with
    // c_hat_i = qw_i c_i / sqrt(m_i).
    const GridPtr& grid = op.grid();
    const int nd = grid->ndof();
    const int b0 = grid->dof_begin();
    const auto& qw = grid->qweights();
    const auto& sm = op.sqrtm();
    std::vector<std::vector<double>> cols, rows;
    for (const auto& c : cn) {
        std::vector<double> chat(static_cast<size_t>(nd));
        for (int i = 0; i < nd; ++i) {
            double v = qw[static_cast<size_t>(b0 + i)] * c[b0 + i];
            if (!sm.empty()) v /= sm[static_cast<size_t>(i)];
            chat[static_cast<size_t>(i)] = v;
        }
        cols.push_back(chat);
        rows.push_back(std::move(chat));
    }

    BorderedTridiag bt(op.matrix(), cols, rows,
                       std::vector<std::vector<double>>(
                           static_cast<size_t>(m),
                           std::vector<double>(static_cast<size_t>(m), 0.0)));
    if (bt.singular()) fail(ErrorKind::solver, "projected operator singular");
    const std::vector<double> f = op.to_dof(rhs);
    std::vector<double> x, y;
    bt.solve(f, std::vector<double>(static_cast<size_t>(m), 0.0), x, y);
    // two rounds of iterative refinement: the band is near-singular by
    // design, and refinement restores the constraint to rounding level
    for (int pass = 0; pass < 2; ++pass) {
        std::vector<double> rf = op.matrix().apply(x);
        for (int i = 0; i < nd; ++i) {
            for (int j = 0; j < m; ++j)
                rf[static_cast<size_t>(i)] +=
                    cols[static_cast<size_t>(j)][static_cast<size_t>(i)] *
                    y[static_cast<size_t>(j)];
            rf[static_cast<size_t>(i)] = f[static_cast<size_t>(i)] - rf[static_cast<size_t>(i)];
        }
        std::vector<double> rg(static_cast<size_t>(m), 0.0);
        for (int j = 0; j < m; ++j) {
            double s = 0.0;
            for (int i = 0; i < nd; ++i)
                s += rows[static_cast<size_t>(j)][static_cast<size_t>(i)] *
                     x[static_cast<size_t>(i)];
            rg[static_cast<size_t>(j)] = -s;
        }
        std::vector<double> dx, dy;
        bt.solve(rf, rg, dx, dy);
        for (int i = 0; i < nd; ++i) x[static_cast<size_t>(i)] += dx[static_cast<size_t>(i)];
        for (int j = 0; j < m; ++j) y[static_cast<size_t>(j)] += dy[static_cast<size_t>(j)];
    }
    return op.from_dof(x);
}

} // namespace nlsbif
