#include "nlsbif/potential.hpp"

#include <algorithm>
#include <cmath>

#include "nlsbif/operators.hpp"

namespace nlsbif {

namespace {
double sech(double x) { return 1.0 / std::cosh(x); }
} // namespace

double PotentialSpec::value(double x) const {
    switch (family) {
        case Family::poschl_teller: {
            double v = 0.0;
            for (const auto& w : wells) {
                const double s = sech(x - w.center);
                v -= w.depth * s * s;
            }
            return v;
        }
        case Family::gaussian: {
            double v = 0.0;
            for (const auto& w : wells) {
                const double t = (x - w.center) / w.width;
                v -= w.depth * std::exp(-0.5 * t * t);
            }
            return v;
        }
        case Family::tabulated: {
            require(!tab_x.empty(), ErrorKind::structural, "empty tabulated potential");
            if (x <= tab_x.front() || x >= tab_x.back())
                fail(ErrorKind::structural,
                     "tabulated potential does not cover the requested point");
            auto it = std::upper_bound(tab_x.begin(), tab_x.end(), x);
            const size_t j = static_cast<size_t>(it - tab_x.begin());
            const double t = (x - tab_x[j - 1]) / (tab_x[j] - tab_x[j - 1]);
            return (1.0 - t) * tab_v[j - 1] + t * tab_v[j];
        }
    }
    return 0.0;
}

double PotentialSpec::deriv(double x) const {
    switch (family) {
        case Family::poschl_teller: {
            double v = 0.0;
            for (const auto& w : wells) {
                const double u = x - w.center;
                const double s = sech(u);
                v += 2.0 * w.depth * s * s * std::tanh(u);
            }
            return v;
        }
        case Family::gaussian: {
            double v = 0.0;
            for (const auto& w : wells) {
                const double t = (x - w.center) / w.width;
                v += w.depth * (t / w.width) * std::exp(-0.5 * t * t);
            }
            return v;
        }
        case Family::tabulated:
            fail(ErrorKind::structural, "no derivative available");
    }
    return 0.0;
}

double PotentialSpec::second_deriv(double x) const {
    const double d = 1e-5 * std::max(1.0, std::abs(x));
    return (deriv(x + d) - deriv(x - d)) / (2.0 * d);
}

Field evaluate(const PotentialSpec& spec, const GridPtr& grid) {
    Field V(grid);
    if (spec.family == PotentialSpec::Family::tabulated) {
        require(!spec.tab_x.empty() && spec.tab_x.front() <= grid->nodes().front() &&
                    spec.tab_x.back() >= grid->nodes().back(),
                ErrorKind::structural,
                "tabulated potential range smaller than grid");
    }
    for (int i = 0; i < grid->npoints(); ++i) V[i] = spec.value(grid->node(i));
    return V;
}

std::vector<CriticalPoint> critical_points(const PotentialSpec& spec,
                                           const GridPtr& grid) {
    require(spec.has_closed_form(), ErrorKind::structural,
            "critical points need a closed-form potential");
    std::vector<CriticalPoint> out;
    if (spec.wells.empty()) return out;

    // tolerance scales from the grid samples
    double maxdV = 0.0, maxd2V = 0.0;
    for (int i = 0; i < grid->npoints(); ++i) {
        maxdV = std::max(maxdV, std::abs(spec.deriv(grid->node(i))));
        maxd2V = std::max(maxd2V, std::abs(spec.second_deriv(grid->node(i))));
    }
    const double tol_grad = 1e-10 * std::max(maxdV, 1e-30);
    const double tol_hess = 1e-8 * std::max(maxd2V, 1e-30);

    const auto& x = grid->nodes();
    const int n = grid->npoints();
    const int lo = (grid->frame() == Frame::radial) ? 0 : 1;
    // dead-flat intervals (underflowed tails) carry no roots
    const double floor_grad = 1e-13 * std::max(maxdV, 1e-300);
    for (int i = lo; i < n - 2; ++i) {
        const double a = spec.deriv(x[static_cast<size_t>(i)]);
        const double b = spec.deriv(x[static_cast<size_t>(i + 1)]);
        const bool sign_change = a * b < 0.0;
        const bool node_root = a == 0.0 && std::abs(b) > floor_grad;
        if (!sign_change && !node_root) continue;
        // refine by bisection to |dx| < 1e-8
        double xl = x[static_cast<size_t>(i)], xr = x[static_cast<size_t>(i + 1)];
        double fl = a;
        while (xr - xl > 1e-8) {
            const double xm = 0.5 * (xl + xr);
            const double fm = spec.deriv(xm);
            if (fl * fm <= 0.0)
                xr = xm;
            else {
                xl = xm;
                fl = fm;
            }
        }
        CriticalPoint cp;
        cp.location = 0.5 * (xl + xr);
        if (std::abs(spec.deriv(cp.location)) > std::max(tol_grad, 1e-7 * maxdV))
            continue; // grazing sign flip from rounding, not a root
        const double h2 = spec.second_deriv(cp.location);
        cp.hessian_eigs = {h2};
        if (std::abs(h2) < tol_hess) {
            cp.kind = CriticalPoint::Kind::degenerate;
            cp.n_negative = 0;
        } else if (h2 > 0.0) {
            cp.kind = CriticalPoint::Kind::minimum;
            cp.n_negative = 0;
        } else {
            cp.kind = CriticalPoint::Kind::maximum;
            cp.n_negative = 1;
        }
        if (!out.empty() && std::abs(out.back().location - cp.location) < 1e-6)
            continue;
        out.push_back(cp);
    }
    return out;
}

LinearGroundState linear_ground_state(const PotentialSpec& spec,
                                      const GridPtr& grid) {
    ProblemSpec prob;
    prob.frame = grid->frame();
    prob.n = grid->dim();
    prob.potential = spec;
    OperatorMatrix H0 = assemble_H0(prob, grid);
    auto pairs = smallest_eigs(H0, 2);
    const double lam0 = pairs[0].value;
    require(lam0 < 0.0, ErrorKind::solver, "H3 violated");
    const double gap = pairs[1].value - lam0;
    require(gap > 1e-8 * std::max(1.0, std::abs(lam0)), ErrorKind::eigen,
            "lowest eigenvalue of -Lap+V is not simple on this grid");

    LinearGroundState gs;
    gs.E0 = -lam0;
    gs.psi0 = pairs[0].vec;
    // sign-fix positive and normalize in the grid's L2
    double mx = 0.0;
    int imx = 0;
    for (int i = 0; i < gs.psi0.size(); ++i)
        if (std::abs(gs.psi0[i]) > mx) {
            mx = std::abs(gs.psi0[i]);
            imx = i;
        }
    if (gs.psi0[imx] < 0.0) gs.psi0 *= -1.0;
    gs.psi0 *= 1.0 / lp_norm(gs.psi0, 2.0);

    // residual check of (-Lap + V + E0) psi0 = 0
    Field r = H0.apply(gs.psi0);
    axpy(gs.E0, gs.psi0, r);
    require(lp_norm(r, 2.0) < 1e-8 * std::max(1.0, gs.E0), ErrorKind::eigen,
            "linear ground state residual too large");
    return gs;
}

} // namespace nlsbif
