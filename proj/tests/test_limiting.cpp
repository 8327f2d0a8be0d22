#include <doctest.h>

#include <cmath>

#include "nlsbif/diagnostics.hpp"
#include "nlsbif/limiting.hpp"
#include "oracles.hpp"

using namespace nlsbif;
using oracles::sech;

namespace {
ProblemSpec focusing(double p = 1.0) {
    ProblemSpec prob;
    prob.p = p;
    prob.sigma = -1.0;
    prob.n = 1;
    prob.frame = Frame::line;
    return prob;
}
} // namespace

TEST_CASE("u_infinity closed form for p=1") {
    // the closed-form checks carry absolute tolerances of 1e-6 on the peak,
    // which the O(h^2) discretization meets at h = 0.0025
    auto g = Grid::line(30.0, 24001);
    LimitingProfile prof = solve_uinfinity(focusing(), g);
    CHECK(prof.u_inf[12000] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-6));
    CHECK(prof.mass == doctest::Approx(4.0).epsilon(1e-5 / 4.0));
    CHECK(prof.q_norm == doctest::Approx(16.0 / 3.0).epsilon(1e-4));
    CHECK(prof.residual < 1e-8 * std::sqrt(prof.mass));
    // radially nonincreasing on x > 0
    for (int i = 12000; i + 1 < 24001; ++i)
        CHECK(prof.u_inf[i + 1] <= prof.u_inf[i] * (1.0 + 1e-12) + 1e-300);
}

TEST_CASE("u_infinity closed form for p=2") {
    auto g = Grid::line(30.0, 24001);
    LimitingProfile prof = solve_uinfinity(focusing(2.0), g);
    CHECK(prof.u_inf[12000] == doctest::Approx(std::pow(3.0, 0.25)).epsilon(1e-6));
    CHECK(prof.residual < 1e-8 * std::sqrt(prof.mass));
}

TEST_CASE("u_infinity tail decay rate is 1") {
    auto g = Grid::line(30.0, 6001);
    LimitingProfile prof = solve_uinfinity(focusing(), g);
    std::vector<double> xs, ls;
    for (int i = 0; i < g->npoints(); ++i) {
        const double x = g->node(i);
        if (x < 15.0 || x > 22.5) continue;
        xs.push_back(x);
        ls.push_back(std::log(prof.u_inf[i]));
    }
    const double slope = ls_slope(xs, ls);
    CHECK(slope > -1.03);
    CHECK(slope < -0.97);
}

TEST_CASE("u_infinity is stable under grid refinement") {
    auto e = [](int np) {
        auto g = Grid::line(30.0, np);
        LimitingProfile prof = solve_uinfinity(focusing(), g);
        return std::abs(prof.u_inf[(np - 1) / 2] - std::sqrt(2.0));
    };
    CHECK(e(1501) / e(3001) > 3.5);
}

TEST_CASE("radial u_infinity: 3D cubic ground state peak") {
    auto g = Grid::radial(3, 20.0, 2001);
    LimitingProfile prof = solve_uinfinity(focusing(), g);
    // classical value u(0) = 4.3373877034
    CHECK(prof.u_inf[0] == doctest::Approx(4.3373877034).epsilon(5e-4));
    CHECK(prof.residual < 1e-8 * std::sqrt(prof.mass));
}

TEST_CASE("radial u_infinity: 2D Townes profile peak") {
    auto g = Grid::radial(2, 20.0, 2001);
    LimitingProfile prof = solve_uinfinity(focusing(), g);
    CHECK(prof.u_inf[0] == doctest::Approx(2.2062).epsilon(2e-3));
}

TEST_CASE("scale_profile") {
    auto g = Grid::line(30.0, 6001);
    LimitingProfile prof = solve_uinfinity(focusing(), g);

    SUBCASE("E = 1 is the identity resample") {
        Field u = scale_profile(prof, 1.0, g);
        double diff = 0.0;
        for (int i = 0; i < u.size(); ++i)
            diff = std::max(diff, std::abs(u[i] - prof.u_inf[i]));
        CHECK(diff < 1e-12);
    }
    SUBCASE("E = 4 peak doubles and mass scales") {
        Field u = scale_profile(prof, 4.0, g);
        CHECK(u[3000] == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-4));
        Field u9 = scale_profile(prof, 9.0, g);
        const double m = lp_norm(u9, 2.0);
        CHECK(m * m == doctest::Approx(3.0 * prof.mass).epsilon(1e-3 / 12.0));
    }
    SUBCASE("refuses unresolved widths") {
        CHECK_THROWS_AS((void)scale_profile(prof, 900.0, g), Error);
    }
}

TEST_CASE("build_template") {
    auto g = Grid::line(60.0, 6001);
    auto gp = Grid::line(30.0, 3001);
    LimitingProfile prof = solve_uinfinity(focusing(), gp);

    SUBCASE("single centered profile reproduces u_inf") {
        ProfileTemplate t;
        t.centers = {0.0};
        t.signs = {1};
        t.E = 1.0;
        TemplateField f = build_template(t, prof, gp);
        CHECK(!f.separation_warning);
        double diff = 0.0;
        for (int i = 0; i < f.field.size(); ++i)
            diff = std::max(diff, std::abs(f.field[i] - prof.u_inf[i]));
        CHECK(diff < 1e-12);
    }
    SUBCASE("two bumps at +-4, E=25") {
        ProfileTemplate t;
        t.centers = {-4.0, 4.0};
        t.signs = {1, 1};
        t.E = 25.0;
        TemplateField f = build_template(t, prof, g);
        CHECK(!f.separation_warning);
        const double m2 = lp_norm(f.field, 2.0) * lp_norm(f.field, 2.0);
        CHECK(m2 == doctest::Approx(2.0 * prof.mass).epsilon(1e-4));
        // bumps sit at +-20 in renormalized coordinates
        int imax = 0;
        for (int i = 0; i < f.field.size(); ++i)
            if (f.field[i] > f.field[imax]) imax = i;
        CHECK(std::abs(std::abs(g->node(imax)) - 20.0) < 0.05);
    }
    SUBCASE("antisymmetric signs give an odd field") {
        ProfileTemplate t;
        t.centers = {-4.0, 4.0};
        t.signs = {1, -1};
        t.E = 25.0;
        TemplateField f = build_template(t, prof, g);
        const int n = f.field.size();
        double odd_defect = 0.0;
        for (int i = 0; i < n; ++i)
            odd_defect = std::max(odd_defect,
                                  std::abs(f.field[i] + f.field[n - 1 - i]));
        CHECK(odd_defect < 1e-12);
    }
    SUBCASE("close centers carry a warning") {
        ProfileTemplate t;
        t.centers = {-0.5, 0.5};
        t.signs = {1, 1};
        t.E = 4.0;
        TemplateField f = build_template(t, prof, g);
        CHECK(f.separation_warning);
    }
}

TEST_CASE("profile_fit recovers planted shifts") {
    auto g = Grid::line(30.0, 3001);
    LimitingProfile prof = solve_uinfinity(focusing(), g);
    FitOptions fo;
    fo.check_preconditions = false;

    SUBCASE("exact template gives zero shift and remainder") {
        Field u = shift_field(prof.u_inf, 2.0);
        ProfileFit fit = profile_fit(u, {prof.u_inf}, {2.0}, {}, Field(), fo);
        CHECK(std::abs(fit.shifts[0]) < 1e-10);
        CHECK(fit.remainder_norm < 1e-10);
        CHECK(fit.orth_residual < 1e-10);
    }
    SUBCASE("planted 0.1 shift") {
        Field u = shift_field(prof.u_inf, 2.1);
        ProfileFit fit = profile_fit(u, {prof.u_inf}, {2.0}, {}, Field(), fo);
        CHECK(fit.shifts[0] == doctest::Approx(0.1).epsilon(1e-8));
        CHECK(fit.remainder_norm < 1e-8);
    }
    SUBCASE("perturbation orthogonal to the kernel leaves shifts second order") {
        Field du = gradient(prof.u_inf);
        oracles::Lcg rng(5);
        Field w(g);
        for (int i = 0; i < w.size(); ++i) w[i] = rng.uniform() * sech(0.2 * g->node(i));
        w[0] = w[w.size() - 1] = 0.0;
        axpy(-inner(w, du) / inner(du, du), du, w); // project out the kernel
        w *= 1.0 / lp_norm(w, 2.0);

        double prev_s = 0.0;
        for (int k = 0; k < 2; ++k) {
            const double t = (k == 0) ? 1e-2 : 1e-3;
            Field u = prof.u_inf;
            axpy(t, w, u);
            ProfileFit fit = profile_fit(u, {prof.u_inf}, {0.0}, {}, Field(), fo);
            CHECK(std::abs(fit.shifts[0]) < 1e-3);
            CHECK(fit.remainder_norm == doctest::Approx(t).epsilon(0.05));
            if (k == 1 && prev_s > 1e-14)
                CHECK(std::abs(fit.shifts[0]) <= prev_s / 10.0 + 1e-14);
            prev_s = std::abs(fit.shifts[0]);
        }
    }
    SUBCASE("equivariance under whole-node input shifts") {
        const double delta = 50 * g->h(); // exact node shift
        Field u0 = shift_field(prof.u_inf, 1.0);
        Field u1 = shift_field(prof.u_inf, 1.0 + delta);
        ProfileFit f0 = profile_fit(u0, {prof.u_inf}, {1.0}, {}, Field(), fo);
        ProfileFit f1 = profile_fit(u1, {prof.u_inf}, {1.0}, {}, Field(), fo);
        CHECK(f1.shifts[0] - f0.shifts[0] == doctest::Approx(delta).epsilon(1e-8));
    }
    SUBCASE("kernel modes are fitted when supplied") {
        Field phi(g);
        for (int i = 0; i < phi.size(); ++i) phi[i] = sech(0.5 * g->node(i));
        phi[0] = phi[phi.size() - 1] = 0.0;
        Field u = shift_field(prof.u_inf, 1.05);
        axpy(0.02, phi, u);
        ProfileFit fit = profile_fit(u, {prof.u_inf}, {1.0}, {phi}, Field(), fo);
        CHECK(fit.shifts[0] == doctest::Approx(0.05).epsilon(1e-5));
        CHECK(fit.amplitudes[0] == doctest::Approx(0.02).epsilon(1e-5));
        CHECK(fit.orth_residual < 1e-10);
    }
    SUBCASE("two-profile decomposition") {
        Field u = shift_field(prof.u_inf, 10.03);
        Field u2 = shift_field(prof.u_inf, -9.95);
        u += u2;
        ProfileFit fit =
            profile_fit(u, {prof.u_inf, prof.u_inf}, {10.0, -10.0}, {}, Field(), fo);
        CHECK(fit.shifts[0] == doctest::Approx(0.03).epsilon(1e-6));
        CHECK(fit.shifts[1] == doctest::Approx(0.05).epsilon(1e-6));
        CHECK(fit.remainder_norm < 1e-6);
    }
}

TEST_CASE("profile_fit preconditions") {
    auto g = Grid::line(30.0, 1501);
    LimitingProfile prof = solve_uinfinity(focusing(), g);
    FitOptions fo; // preconditions on

    SUBCASE("guess too far from the template") {
        Field u = shift_field(prof.u_inf, 5.0); // far off the guess at 0
        CHECK_THROWS_AS(
            (void)profile_fit(u, {prof.u_inf}, {0.0}, {}, Field(), fo), Error);
    }
    SUBCASE("profiles too close together") {
        Field u = shift_field(prof.u_inf, 2.0);
        Field u2 = shift_field(prof.u_inf, -2.0);
        u += u2;
        CHECK_THROWS_AS(
            (void)profile_fit(u, {prof.u_inf, prof.u_inf}, {2.0, -2.0}, {},
                              Field(), fo),
            Error);
    }
    SUBCASE("well-separated two-profile fit passes the checks") {
        Field u = shift_field(prof.u_inf, 10.0);
        Field u2 = shift_field(prof.u_inf, -10.0);
        u += u2;
        ProfileFit fit = profile_fit(u, {prof.u_inf, prof.u_inf}, {10.0, -10.0},
                                     {}, Field(), fo);
        CHECK(std::abs(fit.shifts[0]) < 1e-8);
    }
}

TEST_CASE("duplicated kernel modes degenerate the fit") {
    auto g = Grid::line(30.0, 1501);
    LimitingProfile prof = solve_uinfinity(focusing(), g);
    FitOptions fo;
    fo.check_preconditions = false;
    Field u = shift_field(prof.u_inf, 1.02);
    Field mode(g);
    for (int i = 0; i < mode.size(); ++i)
        mode[i] = sech(0.5 * g->node(i));
    mode[0] = mode[mode.size() - 1] = 0.0;
    CHECK_THROWS_WITH_AS((void)profile_fit(u, {prof.u_inf}, {1.0},
                                           {mode, mode}, Field(), fo),
                         "decomposition degenerate", Error);
}

TEST_CASE("radial scale_profile mass scaling") {
    auto g = Grid::radial(3, 20.0, 2001);
    ProblemSpec prob = focusing();
    prob.n = 3;
    prob.frame = Frame::radial;
    LimitingProfile prof = solve_uinfinity(prob, g);
    Field u4 = scale_profile(prof, 4.0, g);
    const double m = lp_norm(u4, 2.0) * lp_norm(u4, 2.0);
    // ||U_E||^2 = E^{1/p - n/2} mass = E^{-1/2} mass at p=1, n=3
    CHECK(m == doctest::Approx(prof.mass / 2.0).epsilon(1e-4));
}

TEST_CASE("log derivative ratio of the limiting profile") {
    auto g = Grid::line(30.0, 6001);
    LimitingProfile p1 = solve_uinfinity(focusing(), g);
    CHECK(log_derivative_ratio(p1) == doctest::Approx(1.0).epsilon(1e-3));
    LimitingProfile p2 = solve_uinfinity(focusing(2.0), g);
    CHECK(log_derivative_ratio(p2) == doctest::Approx(1.0).epsilon(1e-2));
    // even symmetry at the center
    Field du = gradient(p1.u_inf);
    CHECK(std::abs(du[3000] / p1.u_inf[3000]) < 1e-6);
}
