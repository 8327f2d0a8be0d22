#include "nlsbif/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nlsbif {

namespace {

// fourth-order first derivative, one-sided fallback near the ends
Field gradient4(const Field& f) {
    const Grid& g = *f.grid();
    const int n = g.npoints();
    const double h = g.h();
    Field d(f.grid());
    for (int i = 2; i < n - 2; ++i)
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
    if (n >= 2) {
        d[0] = (f[1] - f[0]) / h;
        d[n - 1] = (f[n - 1] - f[n - 2]) / h;
    }
    if (n >= 4) {
        d[1] = (f[2] - f[0]) / (2.0 * h);
        d[n - 2] = (f[n - 1] - f[n - 3]) / (2.0 * h);
    }
    if (g.frame() == Frame::radial) d[0] = 0.0;
    return d;
}

double quad_weighted(const Field& f) { // integral of f against the measure
    const auto& w = f.grid()->qweights();
    double s = 0.0;
    for (size_t i = 0; i < w.size(); ++i) s += w[i] * f[static_cast<int>(i)];
    return s;
}

// nonuniform 3-point centered derivative at x1 of (x0,f0),(x1,f1),(x2,f2)
double centered3(double x0, double f0, double x1, double f1, double x2, double f2) {
    const double h1 = x1 - x0, h2 = x2 - x1;
    return -h2 / (h1 * (h1 + h2)) * f0 + (h2 - h1) / (h1 * h2) * f1 +
           h1 / (h2 * (h1 + h2)) * f2;
}

std::vector<std::pair<size_t, size_t>> monotone_segments(const Branch& b) {
    std::vector<std::pair<size_t, size_t>> segs;
    const auto& pts = b.points;
    if (pts.size() < 2) return segs;
    size_t start = 0;
    int dir = 0;
    for (size_t i = 1; i < pts.size(); ++i) {
        const int d = (pts[i].E > pts[i - 1].E) ? 1 : -1;
        if (dir == 0) dir = d;
        if (d != dir) {
            segs.emplace_back(start, i - 1);
            start = i - 1;
            dir = d;
        }
    }
    segs.emplace_back(start, pts.size() - 1);
    return segs;
}

} // namespace

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size() && x.size() >= 2, ErrorKind::structural,
            "ls_slope needs >= 2 samples");
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(y.size());
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    return sxy / sxx;
}

double pohozaev_residual(const ProblemSpec& prob, const BranchPoint& pt) {
    require(!pt.psi.empty(), ErrorKind::structural,
            "pohozaev_residual needs a stored field");
    require(prob.potential.has_closed_form(), ErrorKind::structural,
            "no derivative available");
    const GridPtr& grid = pt.psi.grid();
    const int n = prob.n;
    const double p = prob.p;
    const double E = pt.E;

    double mx = 0.0;
    for (int i = 0; i < pt.psi.size(); ++i) mx = std::max(mx, std::abs(pt.psi[i]));
    if (mx == 0.0) return 0.0;

    // frame-local quantities
    Field d = gradient4(pt.psi);
    Field d2 = d;
    for (int i = 0; i < d2.size(); ++i) d2[i] *= d[i];
    const double g2 = quad_weighted(d2);

    const double e = (pt.frame == PFrame::physical) ? E : 1.0;
    Field pot(grid); // n W + x . grad W, frame-local
    const double rt = std::sqrt(E);
    for (int i = 0; i < grid->npoints(); ++i) {
        const double x = grid->node(i);
        if (pt.frame == PFrame::physical) {
            pot[i] = n * prob.potential.value(x) + x * prob.potential.deriv(x);
        } else {
            const double xi = x / rt;
            pot[i] = (n * prob.potential.value(xi) + xi * prob.potential.deriv(xi)) / E;
        }
    }
    Field p2 = pt.psi;
    for (int i = 0; i < p2.size(); ++i) p2[i] *= pot[i] * pt.psi[i];
    const double potterm = quad_weighted(p2);

    const double Nloc = lp_norm(pt.psi, 2.0) * lp_norm(pt.psi, 2.0);
    const double Qloc = std::pow(lp_norm(pt.psi, 2.0 * p + 2.0), 2.0 * p + 2.0);

    const double t1 = (n - 2.0) * g2;
    const double t2 = potterm;
    const double t3 = n * prob.sigma / (p + 1.0) * Qloc;
    const double t4 = e * n * Nloc;
    const double scale =
        std::abs(t1) + std::abs(t2) + std::abs(t3) + std::abs(t4);
    if (scale == 0.0) return 0.0;
    return std::abs(t1 + t2 + t3 + t4) / scale;
}

IdentityReport stationarity_report(const Branch& branch, double tol) {
    IdentityReport rep;
    rep.name = "stationarity";
    rep.tolerance = tol;
    for (const auto& pt : branch.points) {
        rep.E.push_back(pt.E);
        rep.residuals.push_back(pt.stationarity_res);
        rep.max_residual = std::max(rep.max_residual, pt.stationarity_res);
    }
    rep.pass = rep.max_residual < tol;
    return rep;
}

IdentityReport pohozaev_report(const ProblemSpec& prob, const Branch& branch,
                               double tol) {
    IdentityReport rep;
    rep.name = "pohozaev";
    rep.tolerance = tol;
    for (const auto& pt : branch.points) {
        if (pt.psi.empty()) continue;
        const double r = pohozaev_residual(prob, pt);
        rep.E.push_back(pt.E);
        rep.residuals.push_back(r);
        rep.max_residual = std::max(rep.max_residual, r);
    }
    rep.pass = rep.max_residual < tol;
    return rep;
}

IdentityReport energy_mass_relation(const Branch& branch, double tol) {
    IdentityReport rep;
    rep.name = "energy_mass";
    rep.tolerance = tol;
    require(branch.points.size() >= 3, ErrorKind::structural,
            "energy_mass_relation needs >= 3 points");
    for (auto [s, t] : monotone_segments(branch)) {
        for (size_t i = s + 1; i + 1 <= t; ++i) {
            const auto& a = branch.points[i - 1];
            const auto& b = branch.points[i];
            const auto& c = branch.points[i + 1];
            const double dEn = centered3(a.E, a.energy, b.E, b.energy, c.E, c.energy);
            const double dN = centered3(a.E, a.N, b.E, b.N, c.E, c.N);
            const double target = -b.E * dN;
            const double res = std::abs(dEn - target) / (std::abs(target) + 1e-12);
            rep.E.push_back(b.E);
            rep.residuals.push_back(res);
            rep.max_residual = std::max(rep.max_residual, res);
        }
    }
    rep.pass = rep.max_residual < tol;
    return rep;
}

IdentityReport dq_law(const ProblemSpec& prob, const Branch& branch, double tol) {
    IdentityReport rep;
    rep.name = "dq_law";
    rep.tolerance = tol;
    require(branch.points.size() >= 3, ErrorKind::structural,
            "dq_law needs >= 3 points");
    const double coef = (prob.p + 1.0) / (-prob.sigma * prob.p);
    for (auto [s, t] : monotone_segments(branch)) {
        for (size_t i = s + 1; i + 1 <= t; ++i) {
            const auto& a = branch.points[i - 1];
            const auto& b = branch.points[i];
            const auto& c = branch.points[i + 1];
            const double dQ = centered3(a.E, a.Q, b.E, b.Q, c.E, c.Q);
            const double target = coef * b.N;
            const double res = std::abs(dQ - target) / (std::abs(target) + 1e-12);
            rep.E.push_back(b.E);
            rep.residuals.push_back(res);
            rep.max_residual = std::max(rep.max_residual, res);
        }
    }
    rep.pass = rep.max_residual < tol;
    return rep;
}

ScalingReport scaling_exponents(const ProblemSpec& prob, const Branch& branch,
                                double E_lo, double E_hi) {
    require(E_hi >= 2.0 * E_lo, ErrorKind::structural,
            "scaling window must span at least a factor of 2 in E");
    ScalingReport rep;
    rep.window_lo = E_lo;
    rep.window_hi = E_hi;
    const double p = prob.p, n = prob.n, sig = prob.sigma;
    rep.target_N = 1.0 / p - 0.5 * n;
    rep.target_Q = 1.0 - 0.5 * n + 1.0 / p;
    rep.target_grad = rep.target_Q;

    std::vector<double> lE, lN, lQ, lG;
    const BranchPoint* top = nullptr;
    for (const auto& pt : branch.points) {
        if (pt.E < E_lo || pt.E > E_hi) continue;
        if (pt.N <= 0.0 || pt.Q <= 0.0 || pt.grad2 <= 0.0) continue;
        lE.push_back(std::log(pt.E));
        lN.push_back(std::log(pt.N));
        lQ.push_back(std::log(pt.Q));
        lG.push_back(std::log(pt.grad2));
        if (!top || pt.E > top->E) top = &pt;
    }
    require(lE.size() >= 5, ErrorKind::structural,
            "scaling window contains too few branch points");
    rep.slope_N = ls_slope(lE, lN);
    rep.slope_Q = ls_slope(lE, lQ);
    rep.slope_grad = ls_slope(lE, lG);

    // b from Q at the pinned target slope (least-squares intercept)
    double acc = 0.0;
    for (size_t i = 0; i < lE.size(); ++i) acc += lQ[i] - rep.target_Q * lE[i];
    rep.fitted_b = std::exp(acc / static_cast<double>(lE.size()));
    rep.b_prefactor_N = (-sig / 2.0) * ((2.0 * p + 2.0 - n * p) / (p + 1.0)) * rep.fitted_b;
    rep.b_prefactor_grad = (-sig / 2.0) * (n * p / (p + 1.0)) * rep.fitted_b;
    rep.measured_prefactor_N = top->N / std::pow(top->E, rep.target_N);
    rep.measured_prefactor_grad = top->grad2 / std::pow(top->E, rep.target_grad);

    // R^2 of the free log-log fit of Q
    {
        double myy = 0.0;
        for (double v : lQ) myy += v;
        myy /= static_cast<double>(lQ.size());
        double mxx = 0.0;
        for (double v : lE) mxx += v;
        mxx /= static_cast<double>(lE.size());
        double ss_tot = 0.0, ss_res = 0.0;
        const double b0 = myy - rep.slope_Q * mxx;
        for (size_t i = 0; i < lQ.size(); ++i) {
            ss_tot += (lQ[i] - myy) * (lQ[i] - myy);
            const double fit = rep.slope_Q * lE[i] + b0;
            ss_res += (lQ[i] - fit) * (lQ[i] - fit);
        }
        rep.r2_logQ = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;
    }
    return rep;
}

Field renormalize(const ProblemSpec& prob, const BranchPoint& pt,
                  const GridPtr& target) {
    require(pt.E > 0.0, ErrorKind::structural, "renormalize needs E > 0");
    if (pt.frame == PFrame::physical) {
        const double rt = std::sqrt(pt.E);
        if (pt.psi.grid()->h() * rt > 0.25)
            fail(ErrorKind::resolution,
                 "physical grid too coarse to renormalize at this E");
    }
    return to_renormalized(prob, pt, target);
}

LimitReport limit_profile_report(const ProblemSpec& prob, const Branch& branch,
                                 const LimitingProfile& profile,
                                 const std::vector<CriticalPoint>& crits,
                                 const GridPtr& renorm_grid, int K,
                                 double E_switch) {
    LimitReport rep;
    std::vector<const BranchPoint*> tail;
    for (const auto& pt : branch.points)
        if (pt.E >= E_switch && !pt.psi.empty()) tail.push_back(&pt);
    if (static_cast<int>(tail.size()) > K)
        tail.erase(tail.begin(), tail.end() - K);
    require(!tail.empty(), ErrorKind::structural,
            "branch does not reach E_switch (no tail to classify)");

    // resample u_inf on the working grid once
    Field uinf(renorm_grid);
    for (int i = 0; i < renorm_grid->npoints(); ++i)
        uinf[i] = interp_field(profile.u_inf, renorm_grid->node(i));

    // usable critical points
    std::vector<int> usable;
    for (size_t i = 0; i < crits.size(); ++i)
        if (crits[i].kind != CriticalPoint::Kind::degenerate)
            usable.push_back(static_cast<int>(i));

    // enumerate subsets of size 1..3 with sign patterns
    std::vector<std::pair<std::vector<int>, std::vector<int>>> candidates;
    const int nc = static_cast<int>(usable.size());
    for (int mask = 1; mask < (1 << nc); ++mask) {
        std::vector<int> subset;
        for (int i = 0; i < nc; ++i)
            if (mask & (1 << i)) subset.push_back(usable[static_cast<size_t>(i)]);
        if (subset.size() > 3) continue;
        const int m = static_cast<int>(subset.size());
        for (int smask = 0; smask < (1 << m); ++smask) {
            std::vector<int> signs;
            for (int i = 0; i < m; ++i) signs.push_back((smask & (1 << i)) ? -1 : 1);
            candidates.emplace_back(subset, signs);
        }
    }

    const BranchPoint* last = tail.back();
    const Field u_last = renormalize(prob, *last, renorm_grid);
    double best_rem = std::numeric_limits<double>::max();
    size_t best_cand = 0;
    FitOptions fo;
    fo.check_preconditions = false;
    for (size_t c = 0; c < candidates.size(); ++c) {
        const auto& [subset, signs] = candidates[c];
        const double rt = std::sqrt(last->E);
        std::vector<Field> profs;
        std::vector<double> guesses;
        double tnorm2 = 0.0;
        for (size_t j = 0; j < subset.size(); ++j) {
            Field pj = uinf;
            pj *= static_cast<double>(signs[j]);
            profs.push_back(std::move(pj));
            guesses.push_back(crits[static_cast<size_t>(subset[j])].location * rt);
            tnorm2 += profile.mass;
        }
        // guesses must stay on the grid
        bool onto = true;
        for (double gss : guesses)
            if (std::abs(gss) > renorm_grid->L() - 8.0) onto = false;
        if (!onto) continue;
        try {
            ProfileFit fit = profile_fit(u_last, profs, guesses, {}, Field(), fo);
            const double rel = fit.remainder_norm / std::sqrt(tnorm2);
            if (rel < best_rem) {
                best_rem = rel;
                best_cand = c;
            }
        } catch (const Error&) {
            continue;
        }
    }
    if (best_rem == std::numeric_limits<double>::max()) {
        rep.classified = false; // unclassified limit (possible drift)
        return rep;
    }
    rep.template_centers = candidates[best_cand].first;
    rep.template_signs = candidates[best_cand].second;
    rep.classified = best_rem < 0.5;

    // per-point fits with the selected template
    for (const BranchPoint* pt : tail) {
        const double rt = std::sqrt(pt->E);
        Field uE = renormalize(prob, *pt, renorm_grid);
        std::vector<Field> profs;
        std::vector<double> guesses;
        double tnorm2 = 0.0;
        for (size_t j = 0; j < rep.template_centers.size(); ++j) {
            Field pj = uinf;
            pj *= static_cast<double>(rep.template_signs[j]);
            profs.push_back(std::move(pj));
            guesses.push_back(crits[static_cast<size_t>(rep.template_centers[j])].location * rt);
            tnorm2 += profile.mass;
        }
        LimitFitPoint fp;
        fp.E = pt->E;
        try {
            ProfileFit fit = profile_fit(uE, profs, guesses, {}, Field(), fo);
            fp.remainder_rel = fit.remainder_norm / std::sqrt(tnorm2);
            for (size_t j = 0; j < guesses.size(); ++j) {
                fp.centers.push_back(guesses[j] + fit.shifts[j]);
                fp.drift_ratios.push_back((guesses[j] + fit.shifts[j]) / rt);
            }
        } catch (const Error&) {
            fp.remainder_rel = std::numeric_limits<double>::quiet_NaN();
        }
        rep.points.push_back(std::move(fp));
    }
    rep.remainder_decreasing = true;
    for (size_t i = 1; i < rep.points.size(); ++i) {
        if (!(rep.points[i].remainder_rel <=
              rep.points[i - 1].remainder_rel * 1.1 + 1e-12))
            rep.remainder_decreasing = false;
    }
    if (!rep.classified)
        rep.points.clear();
    return rep;
}

bool morse_index_check(const BranchPoint& pt, const ProfileTemplate& t,
                       const std::vector<CriticalPoint>& crits) {
    int expected = static_cast<int>(t.centers.size());
    for (double c : t.centers) {
        bool matched = false;
        for (const auto& cp : crits) {
            if (std::abs(cp.location - c) < 1e-6 * std::max(1.0, std::abs(c))) {
                require(cp.kind != CriticalPoint::Kind::degenerate,
                        ErrorKind::structural, "not applicable");
                expected += cp.n_negative;
                matched = true;
                break;
            }
        }
        require(matched, ErrorKind::structural, "not applicable");
    }
    return pt.lplus_inertia.n_neg == expected;
}

StabilityLabel stability_label(const Branch& branch, size_t index) {
    require(index < branch.points.size(), ErrorKind::structural,
            "stability_label index out of range");
    const BranchPoint& pt = branch.points[index];
    StabilityLabel lab;

    const double tolz = default_tol_zero(pt.E);
    if (pt.lminus_min_eig < -tolz) {
        lab.stability = Stability::undetermined;
        lab.basis = StabilityBasis::lminus_indefinite;
        return lab;
    }
    if (pt.lplus_inertia.n_neg >= 2) {
        lab.stability = Stability::unstable;
        lab.basis = StabilityBasis::multi_negative;
        return lab;
    }
    if (pt.lplus_inertia.n_neg != 1) {
        lab.stability = Stability::undetermined;
        lab.basis = StabilityBasis::slope_criterion;
        return lab;
    }
    // slope criterion needs interior neighbors on the same monotone segment
    lab.basis = StabilityBasis::slope_criterion;
    for (auto [s, t] : monotone_segments(branch)) {
        if (index > s && index < t) {
            const auto& a = branch.points[index - 1];
            const auto& b = branch.points[index];
            const auto& c = branch.points[index + 1];
            lab.dN_dE = centered3(a.E, a.N, b.E, b.N, c.E, c.N);
            if (lab.dN_dE > 0.0)
                lab.stability = Stability::stable;
            else if (lab.dN_dE < 0.0)
                lab.stability = Stability::unstable;
            return lab;
        }
    }
    lab.stability = Stability::undetermined; // fold or segment endpoint
    return lab;
}

bool decay_check(const Field& psi, double E, double gamma) {
    require(gamma > 0.0 && gamma < E, ErrorKind::structural,
            "decay_check needs 0 < gamma < E");
    const Grid& g = *psi.grid();
    const double L = g.L();
    std::vector<double> xs, ls;
    double mx = 0.0, mxw = 0.0;
    for (int i = 0; i < g.npoints(); ++i) mx = std::max(mx, std::abs(psi[i]));
    for (int i = 0; i < g.npoints(); ++i) {
        const double x = std::abs(g.node(i));
        if (x < 0.5 * L || x > 0.75 * L) continue;
        mxw = std::max(mxw, std::abs(psi[i]));
        if (std::abs(psi[i]) > 1e-300) {
            xs.push_back(x);
            ls.push_back(std::log(std::abs(psi[i])));
        }
    }
    if (mxw < 1e-14 * mx) return true; // tail below machine precision
    if (xs.size() < 4) return true;
    const double slope = ls_slope(xs, ls);
    return slope <= -std::sqrt(E - gamma) * 0.95;
}

bool decay_check(const BranchPoint& pt, double gamma) {
    require(!pt.psi.empty(), ErrorKind::structural, "decay_check needs a field");
    if (pt.frame == PFrame::physical) return decay_check(pt.psi, pt.E, gamma);
    return decay_check(pt.psi, 1.0, gamma / pt.E);
}

} // namespace nlsbif
