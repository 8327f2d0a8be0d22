#include "nlsbif/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace nlsbif {

namespace {

// Effective potential seen by the frame: V(x), or E^{-1} V(E^{-1/2} y).
Field effective_potential(const ProblemSpec& prob, const GridPtr& grid, double E,
                          PFrame frame) {
    Field W(grid);
    if (frame == PFrame::physical) {
        for (int i = 0; i < grid->npoints(); ++i)
            W[i] = prob.potential.value(grid->node(i));
    } else {
        const double rt = std::sqrt(E);
        for (int i = 0; i < grid->npoints(); ++i)
            W[i] = prob.potential.value(grid->node(i) / rt) / E;
    }
    return W;
}

double mass_coef(double E, PFrame frame) {
    return frame == PFrame::physical ? E : 1.0;
}

OperatorMatrix frame_linearization(const ProblemSpec& prob, const Field& psi,
                                   double E, PFrame frame, double coef,
                                   OpLabel label) {
    const GridPtr& grid = psi.grid();
    OperatorMatrix op = laplacian_matrix(grid);
    Field W = effective_potential(prob, grid, E, frame);
    op.add_diagonal(W, 1.0);
    op.add_scalar(mass_coef(E, frame));
    Field nl(grid);
    const double tp = 2.0 * prob.p;
    for (int i = 0; i < psi.size(); ++i)
        nl[i] = std::pow(std::abs(psi[i]), tp);
    op.add_diagonal(nl, coef * prob.sigma);
    std::vector<double> sqrtm = op.sqrtm();
    return OperatorMatrix(grid, std::move(op.matrix()), label,
                          mass_coef(E, frame), std::move(sqrtm));
}

void zero_boundary(Field& f) {
    const Grid& g = *f.grid();
    if (g.frame() == Frame::line) f[0] = 0.0;
    f[g.npoints() - 1] = 0.0;
}

// attainable residual level: rounding noise amplified by the stencil scale
double residual_floor(const GridPtr& g, double e, double psinorm) {
    const double h = g->h();
    return 5.0 * std::numeric_limits<double>::epsilon() *
           (2.0 / (h * h) + std::abs(e) + 1.0) * (psinorm + 1.0);
}

bool reflection_available(const ProblemSpec& prob, const GridPtr& grid) {
    return grid->frame() == Frame::line && prob.potential.reflection_center &&
           *prob.potential.reflection_center == 0.0;
}

} // namespace

Field residual(const ProblemSpec& prob, const Field& psi, double E, PFrame frame) {
    const GridPtr& grid = psi.grid();
    OperatorMatrix lap = laplacian_matrix(grid);
    Field r = lap.apply(psi);
    Field W = effective_potential(prob, grid, E, frame);
    const double e = mass_coef(E, frame);
    const double tp = 2.0 * prob.p;
    const int b = grid->dof_begin();
    for (int i = b; i < b + grid->ndof(); ++i)
        r[i] += (W[i] + e) * psi[i] +
                prob.sigma * std::pow(std::abs(psi[i]), tp) * psi[i];
    return r;
}

Field nonlinear_remainder(const ProblemSpec& prob, const Field& U, const Field& v) {
    U.check_same_grid(v);
    Field r(U.grid());
    const double tp = 2.0 * prob.p;
    for (int i = 0; i < U.size(); ++i) {
        const double s = U[i] + v[i];
        r[i] = prob.sigma * (std::pow(std::abs(s), tp) * s -
                             std::pow(std::abs(U[i]), tp) * U[i] -
                             (tp + 1.0) * std::pow(std::abs(U[i]), tp) * v[i]);
    }
    return r;
}

OperatorMatrix frame_Lplus(const ProblemSpec& prob, const Field& psi, double E,
                           PFrame frame) {
    return frame_linearization(prob, psi, E, frame, 2.0 * prob.p + 1.0,
                               OpLabel::Lplus);
}

OperatorMatrix frame_Lminus(const ProblemSpec& prob, const Field& psi, double E,
                            PFrame frame) {
    return frame_linearization(prob, psi, E, frame, 1.0, OpLabel::Lminus);
}

Field residual_dE(const ProblemSpec& prob, const Field& psi, double E, PFrame frame) {
    if (frame == PFrame::physical) return psi;
    require(prob.potential.has_closed_form(), ErrorKind::structural,
            "renormalized continuation needs a closed-form potential");
    const GridPtr& grid = psi.grid();
    Field out(grid);
    const double rt = std::sqrt(E);
    for (int i = 0; i < grid->npoints(); ++i) {
        const double y = grid->node(i);
        const double xi = y / rt;
        const double dW = -prob.potential.value(xi) / (E * E) -
                          0.5 * y * prob.potential.deriv(xi) / (E * E * rt);
        out[i] = dW * psi[i];
    }
    zero_boundary(out);
    return out;
}

Field enforce_symmetry(const Field& psi) {
    require(psi.grid()->frame() == Frame::line, ErrorKind::structural,
            "symmetry projection needs a line grid");
    const int n = psi.size();
    Field out(psi.grid());
    for (int i = 0; i < n; ++i) out[i] = 0.5 * (psi[i] + psi[n - 1 - i]);
    return out;
}

namespace {

void fill_point(const ProblemSpec& prob, BranchPoint& pt,
                const ContinuationConfig& cfg) {
    const GridPtr& grid = pt.psi.grid();
    const double E = pt.E;
    const PFrame frame = pt.frame;

    // native-frame functionals
    const double Nu = lp_norm(pt.psi, 2.0) * lp_norm(pt.psi, 2.0);
    const double Qu = std::pow(lp_norm(pt.psi, 2.0 * prob.p + 2.0), 2.0 * prob.p + 2.0);
    OperatorMatrix lap = laplacian_matrix(grid);
    const double g2u = inner(lap.apply(pt.psi), pt.psi);
    Field W = effective_potential(prob, grid, E, frame);
    Field Wpsi = pt.psi;
    for (int i = 0; i < Wpsi.size(); ++i) Wpsi[i] *= W[i];
    const double iVu = inner(Wpsi, pt.psi);

    if (frame == PFrame::physical) {
        pt.N = Nu;
        pt.Q = Qu;
        pt.grad2 = g2u;
        pt.intV = iVu;
    } else {
        const double n2 = 0.5 * prob.n;
        const double facN = std::pow(E, 1.0 / prob.p - n2);
        const double fac = std::pow(E, 1.0 + 1.0 / prob.p - n2);
        pt.N = facN * Nu;
        pt.Q = fac * Qu;
        pt.grad2 = fac * g2u;
        pt.intV = fac * iVu;
    }
    pt.energy = pt.grad2 + pt.intV + prob.sigma / (prob.p + 1.0) * pt.Q;
    pt.stationarity_res = std::abs(pt.grad2 + pt.intV + prob.sigma * pt.Q + E * pt.N) /
                          (E * pt.N + 1.0);

    OperatorMatrix Lp = frame_Lplus(prob, pt.psi, E, frame);
    const double eig_scale = (frame == PFrame::physical) ? 1.0 : E;
    const double tolz = (frame == PFrame::physical) ? default_tol_zero(E) : 1e-6;
    pt.lplus_inertia = inertia(Lp, 0.0, tolz);
    pt.lplus_inertia.tol_zero = tolz * eig_scale;
    pt.lplus_min_eigs.clear();
    if (cfg.track_eigs) {
        auto eps = smallest_eigs(Lp, cfg.n_eigs);
        for (const auto& e : eps) pt.lplus_min_eigs.push_back(e.value * eig_scale);
        OperatorMatrix Lm = frame_Lminus(prob, pt.psi, E, frame);
        auto ems = smallest_eigs(Lm, 1);
        pt.lminus_min_eig = ems[0].value * eig_scale;
    }
}

} // namespace

BranchPoint newton_solve(const ProblemSpec& prob, const Field& guess, double E,
                         double tol, PFrame frame, const ContinuationConfig& cfg) {
    Field psi = guess;
    if (cfg.enforce_reflection) psi = enforce_symmetry(psi);
    zero_boundary(psi);
    double nr = 0.0;
    bool converged = false;
    for (int it = 0; it < cfg.max_newton_iter; ++it) {
        Field r = residual(prob, psi, E, frame);
        nr = lp_norm(r, 2.0);
        const double np_ = lp_norm(psi, 2.0);
        if (nr < tol * (1.0 + np_) +
                     residual_floor(psi.grid(), mass_coef(E, frame), np_)) {
            converged = true;
            break;
        }
        OperatorMatrix Lp = frame_Lplus(prob, psi, E, frame);
        TriLU lu(Lp.matrix());
        if (lu.min_pivot_ratio() < 1e-13)
            fail(ErrorKind::solver, "Jacobian singular");
        Field du = Lp.from_dof(lu.solve(Lp.to_dof(r)));
        du *= -1.0;
        const double ndu = lp_norm(du, 2.0);
        if (!std::isfinite(ndu) || ndu > 1e10 * (1.0 + lp_norm(psi, 2.0)))
            fail(ErrorKind::solver, "Jacobian singular");
        double t = 1.0;
        bool accepted = false;
        while (t >= 1.0 / 64) {
            Field trial = psi;
            axpy(t, du, trial);
            if (cfg.enforce_reflection) trial = enforce_symmetry(trial);
            if (lp_norm(residual(prob, trial, E, frame), 2.0) < (1.0 - 0.25 * t) * nr) {
                psi = std::move(trial);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            axpy(1.0 / 64, du, psi);
            if (cfg.enforce_reflection) psi = enforce_symmetry(psi);
        }
    }
    require(converged, ErrorKind::solver,
            "Newton did not converge, residual " + std::to_string(nr));
    BranchPoint pt;
    pt.E = E;
    pt.psi = std::move(psi);
    pt.frame = frame;
    pt.newton_residual = nr;
    fill_point(prob, pt, cfg);
    return pt;
}

BranchPoint seed_from_zero(const ProblemSpec& prob, const LinearGroundState& lin,
                           double a, const SeedOptions& opts,
                           const ContinuationConfig& cfg) {
    require(a > 0.0, ErrorKind::config, "amplitude must be positive");
    require(a <= opts.a_max, ErrorKind::solver, "seed amplitude too large");
    const GridPtr& grid = lin.psi0.grid();

    const double q = 2.0 * prob.p + 2.0;
    const double qn = std::pow(lp_norm(lin.psi0, q), q);
    double E = lin.E0 - prob.sigma * std::pow(a, 2.0 * prob.p) * qn;
    Field psi = lin.psi0;
    psi *= a;

    bool ok = false;
    for (int it = 0; it < 100; ++it) {
        Field r = residual(prob, psi, E, PFrame::physical);
        const double g = inner(lin.psi0, psi) - a;
        const double nr = lp_norm(r, 2.0) + std::abs(g);
        if (nr < opts.tol * (1.0 + std::abs(E)) +
                     residual_floor(grid, E, lp_norm(psi, 2.0))) {
            ok = true;
            break;
        }
        OperatorMatrix Lp = frame_Lplus(prob, psi, E, PFrame::physical);
        std::vector<double> col = Lp.to_dof(psi); // dF/dE = psi
        // constraint row <psi0, .> in the DOF variable
        const int nd = grid->ndof();
        const int b0 = grid->dof_begin();
        std::vector<double> row(static_cast<size_t>(nd));
        const auto& sm = Lp.sqrtm();
        for (int i = 0; i < nd; ++i) {
            double v = grid->qweights()[static_cast<size_t>(b0 + i)] * lin.psi0[b0 + i];
            if (!sm.empty()) v /= sm[static_cast<size_t>(i)];
            row[static_cast<size_t>(i)] = v;
        }
        BorderedTridiag bt(Lp.matrix(), {col}, {row}, {{0.0}});
        if (bt.singular()) break;
        std::vector<double> dx, dy;
        bt.solve(Lp.to_dof(r), {g}, dx, dy);
        Field dpsi = Lp.from_dof(dx);
        axpy(-1.0, dpsi, psi);
        E -= dy[0];
    }
    require(ok, ErrorKind::solver, "seed amplitude too large");

    BranchPoint pt;
    pt.E = E;
    pt.psi = std::move(psi);
    pt.frame = PFrame::physical;
    pt.newton_residual = lp_norm(residual(prob, pt.psi, E, PFrame::physical), 2.0);
    fill_point(prob, pt, cfg);
    return pt;
}

BranchPoint seed_from_infinity(const ProblemSpec& prob, const ProfileTemplate& t,
                               const LimitingProfile& profile, double E,
                               const GridPtr& renorm_grid, const SeedOptions& opts,
                               const ContinuationConfig& cfg) {
    require(E >= opts.E_switch, ErrorKind::solver, "E too small for template");
    ProfileTemplate tt = t;
    tt.E = E;
    tt.renormalized_frame = true;
    TemplateField guess = build_template(tt, profile, renorm_grid);
    require(!guess.separation_warning, ErrorKind::solver, "E too small for template");
    try {
        return newton_solve(prob, guess.field, E, cfg.tol_newton,
                            PFrame::renormalized, cfg);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::solver)
            fail(ErrorKind::solver, std::string("E too small for template: ") + e.what());
        throw;
    }
}

Field branch_tangent(const ProblemSpec& prob, const BranchPoint& pt) {
    OperatorMatrix Lp = frame_Lplus(prob, pt.psi, pt.E, pt.frame);
    Field fe = residual_dE(prob, pt.psi, pt.E, pt.frame);
    Field t = Lp.solve(fe);
    t *= -1.0;
    return t;
}

Field to_physical(const ProblemSpec& prob, const BranchPoint& pt,
                  const GridPtr& physical_grid) {
    if (pt.frame == PFrame::physical) {
        if (physical_grid->same_as(*pt.psi.grid())) return pt.psi;
        Field out(physical_grid);
        for (int i = 0; i < physical_grid->npoints(); ++i)
            out[i] = interp_field(pt.psi, physical_grid->node(i));
        zero_boundary(out);
        return out;
    }
    const double rt = std::sqrt(pt.E);
    const double amp = std::pow(pt.E, 1.0 / (2.0 * prob.p));
    Field out(physical_grid);
    for (int i = 0; i < physical_grid->npoints(); ++i)
        out[i] = amp * interp_field(pt.psi, rt * physical_grid->node(i));
    zero_boundary(out);
    return out;
}

Field to_renormalized(const ProblemSpec& prob, const BranchPoint& pt,
                      const GridPtr& renorm_grid) {
    if (pt.frame == PFrame::renormalized) {
        if (renorm_grid->same_as(*pt.psi.grid())) return pt.psi;
        Field out(renorm_grid);
        for (int i = 0; i < renorm_grid->npoints(); ++i)
            out[i] = interp_field(pt.psi, renorm_grid->node(i));
        zero_boundary(out);
        return out;
    }
    const double rt = std::sqrt(pt.E);
    if (renorm_grid->h() / rt <= 0.0)
        fail(ErrorKind::resolution, "bad renormalized grid");
    const double amp = std::pow(pt.E, -1.0 / (2.0 * prob.p));
    Field out(renorm_grid);
    for (int i = 0; i < renorm_grid->npoints(); ++i)
        out[i] = amp * interp_field(pt.psi, renorm_grid->node(i) / rt);
    zero_boundary(out);
    return out;
}

namespace {

struct Tangent {
    Field psi;  // unit tangent field component
    double E;   // unit tangent E component
    Field dpsidE; // raw natural tangent (may be large near folds)
};

Tangent unit_tangent(const ProblemSpec& prob, const BranchPoint& pt) {
    Tangent t;
    t.dpsidE = branch_tangent(prob, pt);
    const double nd = lp_norm(t.dpsidE, 2.0);
    const double scale = std::sqrt(nd * nd + 1.0);
    t.psi = t.dpsidE;
    t.psi *= 1.0 / scale;
    t.E = 1.0 / scale;
    return t;
}

// one pseudo-arclength corrector (Keller): F(psi,E)=0 with the hyperplane
// constraint <tpsi, psi - pred_psi> + tE (E - pred_E) = 0
BranchPoint arclength_corrector(const ProblemSpec& prob, const GridPtr& grid,
                                PFrame frame, Field pred_psi, double pred_E,
                                const Field& tpsi, double tE,
                                const ContinuationConfig& cfg) {
    Field psi = pred_psi;
    if (cfg.enforce_reflection) psi = enforce_symmetry(psi);
    zero_boundary(psi);
    double E = pred_E;
    const int nd = grid->ndof();
    const int b0 = grid->dof_begin();
    bool ok = false;
    double nr = 0.0;
    for (int it = 0; it < cfg.max_newton_iter; ++it) {
        Field r = residual(prob, psi, E, frame);
        Field dpsi0 = psi;
        axpy(-1.0, pred_psi, dpsi0);
        const double g = inner(tpsi, dpsi0) + tE * (E - pred_E);
        nr = lp_norm(r, 2.0) + std::abs(g);
        const double np_ = lp_norm(psi, 2.0);
        if (nr < cfg.tol_newton * (1.0 + np_) +
                     residual_floor(grid, mass_coef(E, frame), np_)) {
            ok = true;
            break;
        }
        OperatorMatrix Lp = frame_Lplus(prob, psi, E, frame);
        std::vector<double> col = Lp.to_dof(residual_dE(prob, psi, E, frame));
        std::vector<double> row(static_cast<size_t>(nd));
        const auto& sm = Lp.sqrtm();
        for (int i = 0; i < nd; ++i) {
            double v = grid->qweights()[static_cast<size_t>(b0 + i)] * tpsi[b0 + i];
            if (!sm.empty()) v /= sm[static_cast<size_t>(i)];
            row[static_cast<size_t>(i)] = v;
        }
        BorderedTridiag bt(Lp.matrix(), {col}, {row}, {{tE}});
        if (bt.singular()) fail(ErrorKind::solver, "arclength corrector singular");
        std::vector<double> dx, dy;
        bt.solve(Lp.to_dof(r), {g}, dx, dy);
        Field dpsi = Lp.from_dof(dx);
        axpy(-1.0, dpsi, psi);
        if (cfg.enforce_reflection) psi = enforce_symmetry(psi);
        E -= dy[0];
    }
    require(ok, ErrorKind::solver, "arclength corrector did not converge");
    BranchPoint pt;
    pt.E = E;
    pt.psi = std::move(psi);
    pt.frame = frame;
    pt.newton_residual = nr;
    fill_point(prob, pt, cfg);
    return pt;
}

BifurcationEvent::KernelSym classify_kernel(const ProblemSpec& prob,
                                            const Field& phi) {
    if (!reflection_available(prob, phi.grid()))
        return BifurcationEvent::KernelSym::na;
    const int n = phi.size();
    double mx = 0.0, even_def = 0.0, odd_def = 0.0;
    for (int i = 0; i < n; ++i) mx = std::max(mx, std::abs(phi[i]));
    for (int i = 0; i < n; ++i) {
        even_def = std::max(even_def, std::abs(phi[i] - phi[n - 1 - i]));
        odd_def = std::max(odd_def, std::abs(phi[i] + phi[n - 1 - i]));
    }
    if (mx == 0.0) return BifurcationEvent::KernelSym::none;
    if (even_def < 1e-6 * mx) return BifurcationEvent::KernelSym::even;
    if (odd_def < 1e-6 * mx) return BifurcationEvent::KernelSym::odd;
    return BifurcationEvent::KernelSym::none;
}

// Event comparisons use the strict negative count only: points where the
// crossing eigenvalue sits inside the +-tol_zero band would otherwise match
// neither bracket endpoint and wedge the bisection.
bool inertia_equal(const Inertia& a, const Inertia& b) {
    return a.n_neg == b.n_neg;
}

} // namespace

namespace {

void finish_event(const ProblemSpec& prob, BifurcationEvent& ev,
                  const BranchPoint& lo, const BranchPoint& hi) {
    ev.E_star = 0.5 * (lo.E + hi.E);
    ev.bracket_width = std::abs(hi.E - lo.E);
    ev.inertia_before = lo.lplus_inertia;
    ev.inertia_after = hi.lplus_inertia;

    // kernel vector: eigenvector of the near-zero eigenvalue at the bracket
    OperatorMatrix Lp = frame_Lplus(prob, lo.psi, lo.E, lo.frame);
    const int k = std::min(10, std::max(lo.lplus_inertia.n_neg,
                                        hi.lplus_inertia.n_neg) + 1);
    auto eigs = smallest_eigs(Lp, std::max(1, k));
    size_t best = 0;
    for (size_t i = 1; i < eigs.size(); ++i)
        if (std::abs(eigs[i].value) < std::abs(eigs[best].value)) best = i;
    ev.kernel_vector = eigs[best].vec;
    ev.kernel_symmetry = classify_kernel(prob, ev.kernel_vector);
    ev.psi_star = lo.psi;
}

// corrector that pins the mass: F(psi, E) = 0 with ||psi||^2 = N_t (E free);
// the mass is a regular parameterization of the branch through a fold
BranchPoint mass_pinned_corrector(const ProblemSpec& prob, const GridPtr& grid,
                                  PFrame frame, Field guess, double E_guess,
                                  double N_target, const ContinuationConfig& cfg) {
    Field psi = std::move(guess);
    zero_boundary(psi);
    double E = E_guess;
    const int nd = grid->ndof();
    const int b0 = grid->dof_begin();
    auto merit = [&](const Field& f, double e) {
        const double nn = lp_norm(f, 2.0);
        return lp_norm(residual(prob, f, e, frame), 2.0) +
               std::abs(nn * nn - N_target) / (1.0 + N_target);
    };
    for (int it = 0; it < 2 * cfg.max_newton_iter; ++it) {
        Field r = residual(prob, psi, E, frame);
        const double np_ = lp_norm(psi, 2.0);
        const double g = np_ * np_ - N_target;
        const double nr = lp_norm(r, 2.0) + std::abs(g) / (1.0 + N_target);
        if (nr < cfg.tol_newton * (1.0 + np_) +
                     residual_floor(grid, mass_coef(E, frame), np_)) {
            BranchPoint pt;
            pt.E = E;
            pt.psi = std::move(psi);
            pt.frame = frame;
            pt.newton_residual = lp_norm(r, 2.0);
            fill_point(prob, pt, cfg);
            return pt;
        }
        OperatorMatrix Lp = frame_Lplus(prob, psi, E, frame);
        std::vector<double> col = Lp.to_dof(residual_dE(prob, psi, E, frame));
        std::vector<double> row(static_cast<size_t>(nd));
        const auto& sm = Lp.sqrtm();
        for (int i = 0; i < nd; ++i) {
            double v = 2.0 * grid->qweights()[static_cast<size_t>(b0 + i)] * psi[b0 + i];
            if (!sm.empty()) v /= sm[static_cast<size_t>(i)];
            row[static_cast<size_t>(i)] = v;
        }
        BorderedTridiag bt(Lp.matrix(), {col}, {row}, {{0.0}});
        if (bt.singular()) fail(ErrorKind::solver, "mass-pinned corrector singular");
        std::vector<double> dx, dy;
        bt.solve(Lp.to_dof(r), {g}, dx, dy);
        Field dpsi = Lp.from_dof(dx);
        double t = 1.0;
        bool accepted = false;
        while (t >= 1.0 / 64) {
            Field trial = psi;
            axpy(-t, dpsi, trial);
            if (merit(trial, E - t * dy[0]) < (1.0 - 0.25 * t) * nr) {
                psi = std::move(trial);
                E -= t * dy[0];
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            axpy(-1.0 / 64, dpsi, psi);
            E -= dy[0] / 64;
        }
    }
    fail(ErrorKind::solver, "mass-pinned corrector did not converge");
}

// Localize a fold between two points (possibly on different sheets) by
// bisecting the mass, which stays monotone along the branch through the
// turning point, until the E-gap closes.
BifurcationEvent refine_fold(const ProblemSpec& prob, BranchPoint pa,
                             BranchPoint pb, const ContinuationConfig& cfg) {
    const GridPtr grid = pa.psi.grid();
    for (int it = 0; it < 80; ++it) {
        const double scale = std::max({1e-8, std::abs(pa.E), std::abs(pb.E)});
        if (std::abs(pa.E - pb.E) <= cfg.event_bracket_rel * scale) break;
        // bisect the native-frame mass between the bracket states
        const double na = lp_norm(pa.psi, 2.0) * lp_norm(pa.psi, 2.0);
        const double nb = lp_norm(pb.psi, 2.0) * lp_norm(pb.psi, 2.0);
        if (std::abs(na - nb) < 1e-12 * (1.0 + na)) break;
        const double Nt = 0.5 * (na + nb);
        const double t = (Nt - na) / (nb - na);
        Field pred = pa.psi;
        Field dir = pb.psi;
        axpy(-1.0, pa.psi, dir);
        axpy(t, dir, pred);
        BranchPoint mid;
        try {
            mid = mass_pinned_corrector(prob, grid, pa.frame, std::move(pred),
                                        pa.E + t * (pb.E - pa.E), Nt, cfg);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::solver) throw;
            break; // keep the bracket we have
        }
        // only accept mids that actually shrink the E-bracket; in crowded
        // regions near E0 the mass parameterization can wander off, in which
        // case the event keeps its honest (wider) bracket
        const double gap = std::abs(pa.E - pb.E);
        const bool to_a = inertia_equal(mid.lplus_inertia, pa.lplus_inertia);
        const double newgap =
            to_a ? std::abs(mid.E - pb.E) : std::abs(pa.E - mid.E);
        if (newgap >= gap) break;
        if (to_a)
            pa = std::move(mid);
        else
            pb = std::move(mid);
    }
    BifurcationEvent ev;
    ev.kind = BifurcationEvent::Kind::fold;
    finish_event(prob, ev, pa, pb);
    return ev;
}

} // namespace

BifurcationEvent detect_event(const ProblemSpec& prob, const BranchPoint& a,
                              const BranchPoint& b, const ContinuationConfig& cfg) {
    require(!a.psi.empty() && !b.psi.empty(), ErrorKind::structural,
            "detect_event needs stored fields");
    require(a.frame == b.frame, ErrorKind::structural,
            "detect_event across frames");
    BranchPoint lo = a, hi = b;
    while (std::abs(hi.E - lo.E) >
           cfg.event_bracket_rel * std::max({1e-8, std::abs(lo.E), std::abs(hi.E)})) {
        const double Emid = 0.5 * (lo.E + hi.E);
        Field guess = lo.psi;
        guess += hi.psi;
        guess *= 0.5;
        BranchPoint mid;
        try {
            mid = newton_solve(prob, guess, Emid, cfg.tol_newton, a.frame, cfg);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::solver) throw;
            // no solution near the path inside the bracket: a turning point
            return refine_fold(prob, lo, hi, cfg);
        }
        if (inertia_equal(mid.lplus_inertia, lo.lplus_inertia))
            lo = std::move(mid);
        else
            hi = std::move(mid);
    }

    BifurcationEvent ev;
    const int zero_count =
        std::max(lo.lplus_inertia.n_zero, hi.lplus_inertia.n_zero);
    const int jump = std::abs(hi.lplus_inertia.n_neg - lo.lplus_inertia.n_neg);
    if (zero_count >= 2 || jump >= 2)
        ev.kind = BifurcationEvent::Kind::degenerate;
    else
        ev.kind = BifurcationEvent::Kind::simple_crossing;
    finish_event(prob, ev, lo, hi);
    return ev;
}

void continue_branch(const ProblemSpec& prob, Branch& branch, int direction,
                     const ContinuationConfig& cfg) {
    require(!branch.points.empty(), ErrorKind::structural,
            "continue_branch needs a seeded branch");
    require(direction == 1 || direction == -1, ErrorKind::structural,
            "direction must be +-1");
    if (cfg.enforce_reflection)
        require(reflection_available(prob, branch.grid), ErrorKind::config,
                "symmetry enforcement needs a line grid with reflection at 0");

    BranchPoint cur = branch.points.back();
    require(!cur.psi.empty(), ErrorKind::structural,
            "cannot continue a branch whose tail has no stored field");
    const PFrame frame = branch.frame;
    double ds = cfg.ds0;
    Field prev_tan_psi;   // previous unit tangent for orientation
    double prev_tan_E = 0.0;
    int orient = direction;
    // travel flips when the branch turns at a fold
    int travel = direction;
    size_t steps = 0;

    while (true) {
        if (travel > 0 && cur.E >= cfg.E_max - 1e-12) break;
        if (travel < 0 && cur.E <= cfg.E_min + 1e-12) break;
        if (cur.E > cfg.E_max + 1e-12 || cur.E < cfg.E_min - 1e-12) break;
        if (++steps > cfg.max_points) {
            branch.stalled = true;
            break;
        }

        Tangent tan = unit_tangent(prob, cur);
        // orientation continuity (fall back to the E direction)
        if (!prev_tan_psi.empty()) {
            const double along = inner(tan.psi, prev_tan_psi) + tan.E * prev_tan_E;
            orient = (along >= 0.0) ? 1 : -1;
        } else {
            orient = (travel > 0) == (tan.E > 0.0) ? 1 : -1;
        }
        const bool use_arclength = std::abs(tan.E) < cfg.fold_tangent_threshold;

        BranchPoint next;
        bool stepped = false;
        while (!stepped) {
            try {
                if (!use_arclength) {
                    double dE = travel * ds;
                    if (travel > 0) dE = std::min(dE, cfg.E_max - cur.E);
                    if (travel < 0) dE = std::max(dE, cfg.E_min - cur.E);
                    Field pred = cur.psi;
                    axpy(dE, tan.dpsidE, pred);
                    next = newton_solve(prob, pred, cur.E + dE, cfg.tol_newton,
                                        frame, cfg);
                    const double plen = std::abs(dE) * lp_norm(tan.dpsidE, 2.0);
                    Field diff = next.psi;
                    axpy(-1.0, cur.psi, diff);
                    require(lp_norm(diff, 2.0) <= 10.0 * plen + 1e-9,
                            ErrorKind::solver, "branch jump rejected");
                } else {
                    Field pred = cur.psi;
                    axpy(orient * ds, tan.psi, pred);
                    const double Epred = cur.E + orient * ds * tan.E;
                    next = arclength_corrector(prob, branch.grid, frame, pred,
                                               Epred, tan.psi, tan.E, cfg);
                    Field diff = next.psi;
                    axpy(-1.0, cur.psi, diff);
                    require(lp_norm(diff, 2.0) <= 10.0 * ds + 1e-9,
                            ErrorKind::solver, "branch jump rejected");
                }
                stepped = true;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::solver) throw;
                ds *= 0.5;
                if (ds < cfg.ds_min) {
                    branch.stalled = true;
                    return;
                }
            }
        }

        // inertia-change event between cur and next
        if (cfg.detect_events && !inertia_equal(cur.lplus_inertia, next.lplus_inertia)) {
            // distinguish a fold (tangent E-component flips along the step)
            Tangent tn = unit_tangent(prob, next);
            double along = inner(tn.psi, tan.psi) + tn.E * tan.E;
            const double tE_next = (along >= 0.0 ? 1.0 : -1.0) * tn.E * orient;
            const double tE_cur = tan.E * orient;
            if (use_arclength && tE_cur * tE_next < 0.0) {
                branch.events.push_back(refine_fold(prob, cur, next, cfg));
            } else {
                BranchPoint lo = cur, hi = next;
                if (lo.E > hi.E) std::swap(lo, hi);
                branch.events.push_back(detect_event(prob, lo, hi, cfg));
            }
            if (branch.events.back().kind == BifurcationEvent::Kind::fold)
                travel = -travel;
            if (branch.events.back().kind == BifurcationEvent::Kind::degenerate) {
                branch.points.push_back(next);
                if (!cfg.record_fields) branch.points.back().psi = Field();
                return; // stop at degenerate events, do not enumerate sheets
            }
        }

        // closed-loop detection: revisiting an earlier point in (E, N, psi)
        for (size_t i = 0; i + 1 < branch.points.size(); ++i) {
            const BranchPoint& q = branch.points[i];
            if (std::abs(q.E - next.E) < 1e-6 * std::max(1.0, std::abs(next.E)) &&
                std::abs(q.N - next.N) < 1e-6 * (1.0 + next.N)) {
                bool same = true;
                if (!q.psi.empty()) {
                    Field diff = next.psi;
                    axpy(-1.0, q.psi, diff);
                    same = lp_norm(diff, 2.0) < 1e-6 * (1.0 + std::sqrt(next.N));
                }
                if (same) {
                    branch.closed_loop = true;
                    break;
                }
            }
        }

        prev_tan_psi = tan.psi;
        prev_tan_E = tan.E;
        cur = next;
        if (cfg.observer) cfg.observer(next);
        branch.points.push_back(std::move(next));
        if (!cfg.record_fields) branch.points.back().psi = Field();
        if (branch.closed_loop) return;
        ds = std::min(ds * cfg.grow, cfg.ds_max);
    }
}

Branch switch_branch(const ProblemSpec& prob, const BifurcationEvent& event,
                     const Branch& parent, double delta,
                     const ContinuationConfig& cfg) {
    require(event.kind == BifurcationEvent::Kind::simple_crossing,
            ErrorKind::structural, "can only switch at a simple crossing");
    require(!event.psi_star.empty() && !event.kernel_vector.empty(),
            ErrorKind::structural, "event carries no state");

    const GridPtr& grid = parent.grid;
    const PFrame frame = parent.frame;
    Field phi = event.kernel_vector;
    phi *= 1.0 / lp_norm(phi, 2.0);

    ContinuationConfig sub = cfg;
    sub.enforce_reflection = false; // the switched branch breaks the symmetry

    auto pinned_solve = [&](double dval, BranchPoint& out) -> bool {
        Field psi = event.psi_star;
        axpy(dval, phi, psi);
        double E = event.E_star;
        const int nd = grid->ndof();
        const int b0 = grid->dof_begin();
        for (int it = 0; it < 2 * sub.max_newton_iter; ++it) {
            Field r = residual(prob, psi, E, frame);
            Field dpsi0 = psi;
            axpy(-1.0, event.psi_star, dpsi0);
            const double g = inner(phi, dpsi0) - dval;
            const double nr = lp_norm(r, 2.0) + std::abs(g);
            if (nr < sub.tol_newton * (1.0 + lp_norm(psi, 2.0)) +
                         residual_floor(grid, mass_coef(E, frame),
                                        lp_norm(psi, 2.0))) {
                out.E = E;
                out.psi = psi;
                out.frame = frame;
                out.newton_residual = lp_norm(r, 2.0);
                fill_point(prob, out, sub);
                return true;
            }
            OperatorMatrix Lp = frame_Lplus(prob, psi, E, frame);
            std::vector<double> col = Lp.to_dof(residual_dE(prob, psi, E, frame));
            std::vector<double> row(static_cast<size_t>(nd));
            const auto& sm = Lp.sqrtm();
            for (int i = 0; i < nd; ++i) {
                double v = grid->qweights()[static_cast<size_t>(b0 + i)] * phi[b0 + i];
                if (!sm.empty()) v /= sm[static_cast<size_t>(i)];
                row[static_cast<size_t>(i)] = v;
            }
            BorderedTridiag bt(Lp.matrix(), {col}, {row}, {{0.0}});
            if (bt.singular()) return false;
            std::vector<double> dx, dy;
            bt.solve(Lp.to_dof(r), {g}, dx, dy);
            Field dpsi = Lp.from_dof(dx);
            axpy(-1.0, dpsi, psi);
            E -= dy[0];
        }
        return false;
    };

    auto collapsed = [&](const BranchPoint& cand) -> bool {
        // re-solve the parent at cand.E (with the parent's symmetry when the
        // kernel is odd) and compare
        try {
            ContinuationConfig pcfg = cfg;
            pcfg.enforce_reflection =
                (event.kernel_symmetry == BifurcationEvent::KernelSym::odd) &&
                reflection_available(prob, grid);
            BranchPoint par = newton_solve(prob, event.psi_star, cand.E,
                                           cfg.tol_newton, frame, pcfg);
            Field diff = cand.psi;
            axpy(-1.0, par.psi, diff);
            return lp_norm(diff, 2.0) < std::abs(delta) / 10.0;
        } catch (const Error&) {
            return false;
        }
    };

    BranchPoint plus, minus;
    const bool ok_plus = pinned_solve(delta, plus) && !collapsed(plus);
    const bool ok_minus = pinned_solve(-delta, minus) && !collapsed(minus);
    require(ok_plus || ok_minus, ErrorKind::solver, "transcritical/no-switch");

    Branch out;
    out.id = parent.id + 1;
    out.seed_kind = SeedKind::switched;
    out.parent_id = parent.id;
    out.frame = frame;
    out.grid = grid;
    out.points.push_back(ok_plus ? plus : minus);

    // continue away from the crossing in both E directions; downward stops at
    // the birth point
    ContinuationConfig up = sub;
    Branch down_part = out;
    ContinuationConfig down = sub;
    down.E_min = std::max(cfg.E_min, event.E_star);
    continue_branch(prob, down_part, -1, down);
    continue_branch(prob, out, +1, up);
    // splice: reversed downward tail, then the upward run
    std::vector<BranchPoint> pts;
    for (size_t i = down_part.points.size(); i-- > 1;)
        pts.push_back(std::move(down_part.points[i]));
    for (auto& p : out.points) pts.push_back(std::move(p));
    out.points = std::move(pts);
    out.stalled = out.stalled || down_part.stalled;
    for (auto& e : down_part.events) out.events.push_back(std::move(e));
    return out;
}

} // namespace nlsbif
