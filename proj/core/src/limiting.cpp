#include "nlsbif/limiting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nlsbif/operators.hpp"

namespace nlsbif {

namespace {

double sech(double x) { return 1.0 / std::cosh(x); }

Field limit_residual(const ProblemSpec& prob, const Field& u, double E) {
    OperatorMatrix lap = laplacian_matrix(u.grid());
    Field r = lap.apply(u);
    const double tp = 2.0 * prob.p;
    const int b = u.grid()->dof_begin();
    const int nd = u.grid()->ndof();
    for (int i = b; i < b + nd; ++i)
        r[i] += E * u[i] + prob.sigma * std::pow(std::abs(u[i]), tp) * u[i];
    return r;
}

// plain damped Newton for the limiting equation at fixed E; on line grids the
// iterates are projected onto the even subspace (the profile is even, and the
// projection pins the translation quasi-kernel)
Field newton_limit(const ProblemSpec& prob, Field u, double E, double tol,
                   int max_iter, bool* converged) {
    *converged = false;
    auto symmetrize = [](Field& f) {
        if (f.grid()->frame() != Frame::line) return;
        const int n = f.size();
        for (int i = 0; i < n / 2; ++i) {
            const double avg = 0.5 * (f[i] + f[n - 1 - i]);
            f[i] = avg;
            f[n - 1 - i] = avg;
        }
    };
    symmetrize(u);
    for (int it = 0; it < max_iter; ++it) {
        Field r = limit_residual(prob, u, E);
        const double nr = lp_norm(r, 2.0);
        const double h = u.grid()->h();
        const double floor = 5.0 * std::numeric_limits<double>::epsilon() *
                             (2.0 / (h * h) + std::abs(E) + 1.0) *
                             (lp_norm(u, 2.0) + 1.0);
        if (nr < tol * (1.0 + lp_norm(u, 2.0)) + floor) {
            *converged = true;
            return u;
        }
        OperatorMatrix Lp = assemble_Lplus(prob.without_potential(), u, E);
        Field du = Lp.solve(r);
        du *= -1.0;
        double t = 1.0;
        bool accepted = false;
        while (t >= 1.0 / 64) {
            Field trial = u;
            axpy(t, du, trial);
            if (lp_norm(limit_residual(prob, trial, E), 2.0) < (1.0 - 0.25 * t) * nr) {
                u = std::move(trial);
                symmetrize(u);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            axpy(1.0 / 64, du, u);
            symmetrize(u);
        }
    }
    return u;
}

} // namespace

double interp_field(const Field& f, double x) {
    const Grid& g = *f.grid();
    double xq = x;
    if (g.frame() == Frame::radial) xq = std::abs(x); // even reflection
    const double x0 = g.nodes().front();
    const double h = g.h();
    const int n = g.npoints();
    const double t = (xq - x0) / h;
    if (t <= -1e-12 || t >= n - 1 + 1e-12) return 0.0;
    int i = static_cast<int>(std::floor(t));
    i = std::clamp(i, 0, n - 2);
    const double s = t - i;
    // Catmull-Rom with clamped end handling
    const double f1 = f[i], f2 = f[i + 1];
    const double f0 = (i > 0) ? f[i - 1] : 2.0 * f1 - f2;
    const double f3 = (i + 2 < n) ? f[i + 2] : 2.0 * f2 - f1;
    const double a0 = -0.5 * f0 + 1.5 * f1 - 1.5 * f2 + 0.5 * f3;
    const double a1 = f0 - 2.5 * f1 + 2.0 * f2 - 0.5 * f3;
    const double a2 = -0.5 * f0 + 0.5 * f2;
    return ((a0 * s + a1) * s + a2) * s + f1;
}

Field shift_field(const Field& f, double s) {
    require(f.grid()->frame() == Frame::line, ErrorKind::structural,
            "shift_field needs a line grid");
    Field out(f.grid());
    for (int i = 0; i < f.size(); ++i)
        out[i] = interp_field(f, f.grid()->node(i) - s);
    return out;
}

LimitingProfile solve_uinfinity(const ProblemSpec& prob_in, const GridPtr& grid) {
    ProblemSpec prob = prob_in.without_potential();
    prob.validate();
    require(prob.sigma < 0.0, ErrorKind::structural,
            "limiting profile needs focusing nonlinearity (sigma < 0)");

    const double tol = 1e-12;
    Field u(grid);
    bool ok = false;

    if (grid->frame() == Frame::line) {
        // closed-form seed ((p+1)/(-sigma))^{1/2p} sech^{1/p}(p x)
        const double amp = std::pow((prob.p + 1.0) / (-prob.sigma), 1.0 / (2.0 * prob.p));
        for (int i = 0; i < grid->npoints(); ++i)
            u[i] = amp * std::pow(sech(prob.p * grid->node(i)), 1.0 / prob.p);
        u[0] = u[grid->npoints() - 1] = 0.0;
        u = newton_limit(prob, u, 1.0, tol, 50, &ok);
    } else {
        // amplitude-pinned Newton from a Gaussian bump, marching the pinned
        // amplitude until one solve converges, then rescale to E = 1.
        const int nd = grid->ndof();
        for (double A : {2.0, 3.0, 4.5, 1.3, 6.75, 0.9, 10.0}) {
            Field v(grid);
            for (int i = 0; i < grid->npoints(); ++i) {
                const double r = grid->node(i);
                v[i] = A * std::exp(-0.5 * r * r);
            }
            v[grid->npoints() - 1] = 0.0;
            double Ehat = 1.0;
            bool conv = false;
            const int pin_node = grid->dof_begin();
            for (int it = 0; it < 80; ++it) {
                Field r = limit_residual(prob, v, Ehat);
                const double pin = v[pin_node] - A;
                const double nr = lp_norm(r, 2.0) + std::abs(pin);
                const double h = grid->h();
                const double floor =
                    5.0 * std::numeric_limits<double>::epsilon() *
                    (2.0 / (h * h) + std::abs(Ehat) + 1.0) *
                    (lp_norm(v, 2.0) + 1.0);
                if (nr < tol * (1.0 + lp_norm(v, 2.0)) + floor) {
                    conv = Ehat > 1e-8;
                    break;
                }
                OperatorMatrix Lp = assemble_Lplus(prob, v, Ehat);
                std::vector<double> col = Lp.to_dof(v);
                std::vector<double> row(static_cast<size_t>(nd), 0.0);
                const auto& sm = Lp.sqrtm();
                row[0] = sm.empty() ? 1.0 : 1.0 / sm[0];
                BorderedTridiag bt(Lp.matrix(), {col}, {row},
                                   {{0.0}});
                if (bt.singular()) break;
                std::vector<double> dx, dy;
                bt.solve(Lp.to_dof(r), {pin}, dx, dy);
                Field dv = Lp.from_dof(dx);
                axpy(-1.0, dv, v);
                Ehat -= dy[0];
            }
            if (conv) {
                u = v;
                ok = true;
                break;
            }
        }
        require(ok, ErrorKind::solver,
                "limiting profile Newton diverged for all seed amplitudes");
        // the pinned solve converged at some Ehat; recover it from the
        // quotient of residual pieces: Ehat = -<(-Lap u + sigma|u|^2p u), u>/<u,u>
        OperatorMatrix lap = laplacian_matrix(grid);
        Field Au = lap.apply(u);
        double num = 0.0, den = 0.0;
        const int b = grid->dof_begin();
        for (int i = b; i < b + grid->ndof(); ++i) {
            const double w = grid->qweights()[static_cast<size_t>(i)];
            num += w * (Au[i] + prob.sigma * std::pow(std::abs(u[i]), 2.0 * prob.p) * u[i]) * u[i];
            den += w * u[i] * u[i];
        }
        const double Ehat = -num / den;
        require(Ehat > 0.0, ErrorKind::solver, "limiting profile has E <= 0");
        // u_1(x) = Ehat^{-1/2p} u(x / sqrt(Ehat)), then polish at E = 1
        Field u1(grid);
        const double sc = std::pow(Ehat, -1.0 / (2.0 * prob.p));
        for (int i = 0; i < grid->npoints(); ++i)
            u1[i] = sc * interp_field(u, grid->node(i) / std::sqrt(Ehat));
        u1[grid->npoints() - 1] = 0.0;
        u = newton_limit(prob, u1, 1.0, tol, 50, &ok);
    }
    require(ok, ErrorKind::solver, "limiting profile Newton did not converge");

    LimitingProfile out;
    out.problem = prob;
    out.u_inf = u;
    out.mass = lp_norm(u, 2.0);
    out.mass *= out.mass;
    out.q_norm = std::pow(lp_norm(u, 2.0 * prob.p + 2.0), 2.0 * prob.p + 2.0);
    out.residual = lp_norm(limit_residual(prob, u, 1.0), 2.0);
    require(out.residual < 1e-8 * std::sqrt(out.mass), ErrorKind::solver,
            "limiting profile residual too large");
    // positivity on the interior (exponentially small tails may underflow)
    for (int i = 0; i < u.size(); ++i)
        require(u[i] > -1e-12, ErrorKind::solver, "limiting profile not positive");
    return out;
}

Field scale_profile(const LimitingProfile& profile, double E,
                    const GridPtr& target) {
    require(E > 0.0, ErrorKind::structural, "scale_profile needs E > 0");
    const double rt = std::sqrt(E);
    if (target->h() * rt > 0.25)
        fail(ErrorKind::resolution,
             "target grid too coarse to resolve width 1/sqrt(E): h*sqrt(E) = " +
                 std::to_string(target->h() * rt));
    Field out(target);
    const double amp = std::pow(E, 1.0 / (2.0 * profile.problem.p));
    for (int i = 0; i < target->npoints(); ++i)
        out[i] = amp * interp_field(profile.u_inf, rt * target->node(i));
    out[0] = 0.0;
    out[target->npoints() - 1] = 0.0;
    if (target->frame() == Frame::radial) out[0] = amp * interp_field(profile.u_inf, 0.0);
    return out;
}

TemplateField build_template(const ProfileTemplate& t,
                             const LimitingProfile& profile,
                             const GridPtr& grid) {
    require(t.centers.size() == t.signs.size() && !t.centers.empty(),
            ErrorKind::structural, "template needs matching centers and signs");
    require(t.E > 0.0, ErrorKind::structural, "template needs E > 0");
    TemplateField out;
    out.field = Field(grid);
    const double rt = std::sqrt(t.E);
    double minsep = std::numeric_limits<double>::max();
    for (size_t i = 0; i < t.centers.size(); ++i)
        for (size_t j = i + 1; j < t.centers.size(); ++j)
            minsep = std::min(minsep, rt * std::abs(t.centers[i] - t.centers[j]));
    out.separation_warning = (t.centers.size() > 1 && minsep <= 6.0);

    for (int k = 0; k < grid->npoints(); ++k) {
        const double x = grid->node(k);
        double v = 0.0;
        for (size_t i = 0; i < t.centers.size(); ++i) {
            if (t.renormalized_frame) {
                v += t.signs[i] * interp_field(profile.u_inf, x - t.centers[i] * rt);
            } else {
                const double amp = std::pow(t.E, 1.0 / (2.0 * profile.problem.p));
                v += t.signs[i] * amp *
                     interp_field(profile.u_inf, rt * (x - t.centers[i]));
            }
        }
        out.field[k] = v;
    }
    out.field[0] = 0.0;
    out.field[grid->npoints() - 1] = 0.0;
    return out;
}

ProfileFit profile_fit(const Field& u, const std::vector<Field>& profiles,
                       const std::vector<double>& center_guesses,
                       const std::vector<Field>& kernel_modes,
                       const Field& base_psi, const FitOptions& opts) {
    const int m = static_cast<int>(profiles.size());
    const int d = static_cast<int>(kernel_modes.size());
    require(m >= 1 && center_guesses.size() == profiles.size(),
            ErrorKind::structural, "profile_fit needs one guess per profile");
    require(u.grid()->frame() == Frame::line, ErrorKind::structural,
            "profile_fit operates on line grids");

    // precompute profile gradients and norms
    std::vector<Field> dprofiles;
    std::vector<double> dnorm2(static_cast<size_t>(m));
    double min_unorm = std::numeric_limits<double>::max();
    for (int j = 0; j < m; ++j) {
        dprofiles.push_back(gradient(profiles[static_cast<size_t>(j)]));
        const double dn = lp_norm(dprofiles.back(), 2.0);
        dnorm2[static_cast<size_t>(j)] = dn * dn;
        min_unorm = std::min(min_unorm, lp_norm(profiles[static_cast<size_t>(j)], 2.0));
    }
    std::vector<double> knorm2(static_cast<size_t>(d));
    for (int r = 0; r < d; ++r) {
        const double kn = lp_norm(kernel_modes[static_cast<size_t>(r)], 2.0);
        knorm2[static_cast<size_t>(r)] = kn * kn;
    }

    if (opts.check_preconditions) {
        Field w0 = u;
        if (!base_psi.empty()) w0 -= base_psi;
        for (int j = 0; j < m; ++j)
            axpy(-1.0, shift_field(profiles[static_cast<size_t>(j)],
                                   center_guesses[static_cast<size_t>(j)]), w0);
        const double eps = opts.closeness_factor * min_unorm;
        require(lp_norm(w0, 2.0) < eps, ErrorKind::decomposition,
                "profile_fit guess too far from the template");
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j)
                require(std::abs(center_guesses[static_cast<size_t>(i)] -
                                 center_guesses[static_cast<size_t>(j)]) >
                            opts.min_separation,
                        ErrorKind::decomposition,
                        "profile_fit centers closer than the separation bound");
    }

    const int nz = m + d;
    std::vector<double> z(static_cast<size_t>(nz), 0.0); // (s_1..s_m, a_1..a_d)

    auto remainder_of = [&](const std::vector<double>& zz) {
        Field w = u;
        if (!base_psi.empty()) w -= base_psi;
        for (int j = 0; j < m; ++j)
            axpy(-1.0, shift_field(profiles[static_cast<size_t>(j)],
                                   center_guesses[static_cast<size_t>(j)] +
                                       zz[static_cast<size_t>(j)]), w);
        for (int r = 0; r < d; ++r)
            axpy(-zz[static_cast<size_t>(m + r)], kernel_modes[static_cast<size_t>(r)], w);
        return w;
    };
    auto system_of = [&](const std::vector<double>& zz) {
        Field w = remainder_of(zz);
        std::vector<double> Fz(static_cast<size_t>(nz));
        for (int j = 0; j < m; ++j) {
            Field dsh = shift_field(dprofiles[static_cast<size_t>(j)],
                                    center_guesses[static_cast<size_t>(j)] +
                                        zz[static_cast<size_t>(j)]);
            Fz[static_cast<size_t>(j)] = inner(dsh, w) / dnorm2[static_cast<size_t>(j)];
        }
        for (int r = 0; r < d; ++r)
            Fz[static_cast<size_t>(m + r)] =
                inner(kernel_modes[static_cast<size_t>(r)], w) / knorm2[static_cast<size_t>(r)];
        return Fz;
    };

    std::string hist;
    int it = 0;
    for (; it < opts.max_iter; ++it) {
        std::vector<double> Fz = system_of(z);
        double nF = 0.0;
        for (double f : Fz) nF = std::max(nF, std::abs(f));
        hist += (it ? " " : "") + std::to_string(nF);
        if (nF < opts.tol) break;
        // finite-difference Jacobian (nz is tiny)
        std::vector<std::vector<double>> J(static_cast<size_t>(nz),
                                           std::vector<double>(static_cast<size_t>(nz)));
        const double step = 1e-7;
        for (int c = 0; c < nz; ++c) {
            std::vector<double> zp = z, zm = z;
            zp[static_cast<size_t>(c)] += step;
            zm[static_cast<size_t>(c)] -= step;
            auto Fp = system_of(zp);
            auto Fm = system_of(zm);
            for (int r = 0; r < nz; ++r)
                J[static_cast<size_t>(r)][static_cast<size_t>(c)] =
                    (Fp[static_cast<size_t>(r)] - Fm[static_cast<size_t>(r)]) / (2.0 * step);
        }
        // dense solve J dz = -F
        std::vector<double> rhs(static_cast<size_t>(nz));
        for (int r = 0; r < nz; ++r) rhs[static_cast<size_t>(r)] = -Fz[static_cast<size_t>(r)];
        for (int c = 0; c < nz; ++c) {
            int piv = c;
            for (int r = c + 1; r < nz; ++r)
                if (std::abs(J[static_cast<size_t>(r)][static_cast<size_t>(c)]) >
                    std::abs(J[static_cast<size_t>(piv)][static_cast<size_t>(c)]))
                    piv = r;
            std::swap(J[static_cast<size_t>(c)], J[static_cast<size_t>(piv)]);
            std::swap(rhs[static_cast<size_t>(c)], rhs[static_cast<size_t>(piv)]);
            require(std::abs(J[static_cast<size_t>(c)][static_cast<size_t>(c)]) > 1e-12,
                    ErrorKind::decomposition, "decomposition degenerate");
            for (int r = c + 1; r < nz; ++r) {
                const double f = J[static_cast<size_t>(r)][static_cast<size_t>(c)] /
                                 J[static_cast<size_t>(c)][static_cast<size_t>(c)];
                for (int j = c; j < nz; ++j)
                    J[static_cast<size_t>(r)][static_cast<size_t>(j)] -=
                        f * J[static_cast<size_t>(c)][static_cast<size_t>(j)];
                rhs[static_cast<size_t>(r)] -= f * rhs[static_cast<size_t>(c)];
            }
        }
        for (int r = nz - 1; r >= 0; --r) {
            double s = rhs[static_cast<size_t>(r)];
            for (int j = r + 1; j < nz; ++j)
                s -= J[static_cast<size_t>(r)][static_cast<size_t>(j)] * rhs[static_cast<size_t>(j)];
            rhs[static_cast<size_t>(r)] = s / J[static_cast<size_t>(r)][static_cast<size_t>(r)];
        }
        for (int r = 0; r < nz; ++r) z[static_cast<size_t>(r)] += rhs[static_cast<size_t>(r)];
    }
    {
        auto Fz = system_of(z);
        double nF = 0.0;
        for (double f : Fz) nF = std::max(nF, std::abs(f));
        require(nF < 1e3 * opts.tol, ErrorKind::decomposition,
                "profile fit did not converge; residual history: " + hist);
    }

    ProfileFit fit;
    fit.shifts.assign(z.begin(), z.begin() + m);
    fit.amplitudes.assign(z.begin() + m, z.end());
    fit.remainder = remainder_of(z);
    fit.remainder_norm = lp_norm(fit.remainder, 2.0);
    fit.iterations = it;
    double orth = 0.0;
    for (int j = 0; j < m; ++j) {
        Field dsh = shift_field(dprofiles[static_cast<size_t>(j)],
                                center_guesses[static_cast<size_t>(j)] +
                                    fit.shifts[static_cast<size_t>(j)]);
        orth = std::max(orth, std::abs(inner(dsh, fit.remainder)) /
                                  std::sqrt(dnorm2[static_cast<size_t>(j)]));
    }
    for (int r = 0; r < d; ++r)
        orth = std::max(orth, std::abs(inner(kernel_modes[static_cast<size_t>(r)], fit.remainder)) /
                                  std::sqrt(knorm2[static_cast<size_t>(r)]));
    fit.orth_residual = orth;
    return fit;
}

double log_derivative_ratio(const LimitingProfile& profile) {
    const Field& u = profile.u_inf;
    Field du = gradient(u);
    double mx = 0.0;
    for (int i = 0; i < u.size(); ++i) mx = std::max(mx, u[i]);
    double ratio = 0.0;
    for (int i = 1; i < u.size() - 1; ++i)
        if (u[i] > 1e-8 * mx) ratio = std::max(ratio, std::abs(du[i] / u[i]));
    return ratio;
}

} // namespace nlsbif
