#include <doctest.h>

#include <cmath>

#include "nlsbif/continuation.hpp"
#include "nlsbif/diagnostics.hpp"
#include "oracles.hpp"

using namespace nlsbif;
using oracles::sech;

namespace {

ProblemSpec well_problem(double depth = 2.0, double sigma = -1.0, double p = 1.0) {
    ProblemSpec prob;
    prob.p = p;
    prob.sigma = sigma;
    prob.n = 1;
    prob.frame = Frame::line;
    prob.potential.family = PotentialSpec::Family::poschl_teller;
    if (depth > 0.0) prob.potential.wells.push_back({depth, 0.0, 1.0});
    return prob;
}

Field soliton_at(const GridPtr& g, double E) {
    Field u(g);
    const double rt = std::sqrt(E);
    for (int i = 0; i < g->npoints(); ++i)
        u[i] = std::sqrt(2.0 * E) * sech(rt * g->node(i));
    u[0] = u[g->npoints() - 1] = 0.0;
    return u;
}

// synthetic branch with consistent scalars: N = c E, energy = -c E^2 / 2,
// Q from dQ/dE = 2N (p = 1, sigma = -1)
Branch synthetic_branch(double c, double E0, double E1, int npts) {
    Branch br;
    for (int k = 0; k < npts; ++k) {
        BranchPoint pt;
        pt.E = E0 + (E1 - E0) * k / (npts - 1);
        pt.N = c * pt.E;
        pt.energy = -0.5 * c * pt.E * pt.E;
        pt.Q = c * pt.E * pt.E; // dQ/dE = 2cE = 2N
        pt.lplus_inertia.n_neg = 1;
        pt.lminus_min_eig = 0.0;
        br.points.push_back(pt);
    }
    return br;
}

} // namespace

TEST_CASE("pohozaev residual") {
    ProblemSpec prob = well_problem(0.0); // V = 0

    SUBCASE("zero field returns zero by convention") {
        auto g = Grid::line(30.0, 1001);
        BranchPoint pt;
        pt.E = 1.0;
        pt.psi = Field(g);
        pt.frame = PFrame::physical;
        CHECK(pohozaev_residual(prob, pt) == 0.0);
    }
    SUBCASE("exact soliton satisfies the identity") {
        // O(h^2) identity residual: h = 0.0025 puts it below 1e-6
        auto g = Grid::line(30.0, 24001);
        BranchPoint pt = newton_solve(prob, soliton_at(g, 1.0), 1.0, 1e-12);
        CHECK(pohozaev_residual(prob, pt) < 1e-6);
    }
    SUBCASE("converged single-well point at E = 10 (renormalized frame)") {
        ProblemSpec wp = well_problem(2.0);
        auto gren = Grid::line(40.0, 8001);
        Field guess(gren);
        for (int i = 0; i < gren->npoints(); ++i)
            guess[i] = std::sqrt(2.0) * sech(gren->node(i));
        BranchPoint pt = newton_solve(wp, guess, 10.0, 1e-12, PFrame::renormalized);
        CHECK(pohozaev_residual(wp, pt) < 1e-5);
    }
    SUBCASE("tabulated potentials have no derivative") {
        ProblemSpec tp = well_problem(0.0);
        tp.potential.family = PotentialSpec::Family::tabulated;
        auto g = Grid::line(30.0, 1001);
        BranchPoint pt;
        pt.E = 1.0;
        pt.psi = soliton_at(g, 1.0);
        pt.frame = PFrame::physical;
        CHECK_THROWS_WITH_AS((void)pohozaev_residual(tp, pt),
                             "no derivative available", Error);
    }
}

TEST_CASE("frame invariance of the pohozaev residual") {
    ProblemSpec prob = well_problem(2.0);
    auto g = Grid::line(30.0, 6001);
    auto gren = Grid::line(40.0, 8001);
    LinearGroundState lin = linear_ground_state(prob.potential, g);
    Branch br;
    br.grid = g;
    br.points.push_back(seed_from_zero(prob, lin, 0.1));
    ContinuationConfig cfg;
    cfg.E_max = 4.0;
    cfg.ds0 = 0.01;
    cfg.track_eigs = false;
    continue_branch(prob, br, +1, cfg);
    const BranchPoint& p4 = br.points.back();
    REQUIRE(p4.E == doctest::Approx(4.0).epsilon(1e-9));
    const double r_phys = pohozaev_residual(prob, p4);

    BranchPoint pren = newton_solve(prob, to_renormalized(prob, p4, gren), p4.E,
                                    1e-12, PFrame::renormalized);
    const double r_ren = pohozaev_residual(prob, pren);
    // both are small discretization residuals of the same identity
    CHECK(r_phys < 1e-4);
    CHECK(r_ren < 1e-5);
}

TEST_CASE("energy-mass law on a consistent synthetic branch") {
    Branch br = synthetic_branch(0.7, 1.0, 3.0, 41);
    IdentityReport rep = energy_mass_relation(br, 1e-10);
    CHECK(rep.pass);
    CHECK(rep.max_residual < 1e-12);
}

TEST_CASE("dq law") {
    SUBCASE("synthetic branch with constant N has Q affine in E") {
        Branch br;
        const double N = 1.4;
        for (int k = 0; k < 21; ++k) {
            BranchPoint pt;
            pt.E = 2.0 + 0.1 * k;
            pt.N = N;
            pt.Q = 2.0 * N * pt.E + 0.3; // slope exactly 2N for p=1, sigma=-1
            pt.energy = 0.0;
            br.points.push_back(pt);
        }
        ProblemSpec prob = well_problem(0.0);
        IdentityReport rep = dq_law(prob, br, 1e-10);
        CHECK(rep.pass);
        CHECK(rep.max_residual < 1e-12);
    }
    SUBCASE("defocusing branches have decreasing Q") {
        ProblemSpec prob = well_problem(2.0, +1.0);
        auto g = Grid::line(30.0, 3001);
        LinearGroundState lin = linear_ground_state(prob.potential, g);
        Branch br;
        br.grid = g;
        br.points.push_back(seed_from_zero(prob, lin, 0.1));
        ContinuationConfig cfg;
        cfg.E_min = 0.6;
        cfg.ds0 = 0.01;
        cfg.track_eigs = false;
        continue_branch(prob, br, -1, cfg);
        REQUIRE(br.points.size() > 4);
        // dQ/dE < 0 in the defocusing case: E decreases along this branch, so
        // Q grows point-to-point
        for (size_t i = 1; i < br.points.size(); ++i) {
            CHECK(br.points[i].E < br.points[i - 1].E);
            CHECK(br.points[i].Q >= br.points[i - 1].Q * (1.0 - 1e-12));
        }
        IdentityReport rep = dq_law(prob, br, 5e-2);
        CHECK(rep.pass);
    }
}

TEST_CASE("scaling report on an exact power-law branch") {
    Branch br;
    const double b = 16.0 / 3.0;
    for (int k = 0; k < 30; ++k) {
        BranchPoint pt;
        pt.E = 50.0 * std::pow(2.0, k / 29.0);
        pt.Q = b * std::pow(pt.E, 1.5);
        pt.N = 4.0 * std::sqrt(pt.E);
        pt.grad2 = (4.0 / 3.0) * std::pow(pt.E, 1.5);
        br.points.push_back(pt);
    }
    ProblemSpec prob = well_problem(0.0);
    ScalingReport rep = scaling_exponents(prob, br, 50.0, 100.0);
    CHECK(rep.slope_N == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(rep.slope_Q == doctest::Approx(1.5).epsilon(1e-10));
    CHECK(rep.slope_grad == doctest::Approx(1.5).epsilon(1e-10));
    CHECK(rep.fitted_b == doctest::Approx(b).epsilon(1e-10));
    CHECK(rep.b_prefactor_N == doctest::Approx(4.0).epsilon(1e-10));
    CHECK(rep.b_prefactor_grad == doctest::Approx(4.0 / 3.0).epsilon(1e-10));
    CHECK(rep.measured_prefactor_N == doctest::Approx(4.0).epsilon(1e-10));
    CHECK(rep.r2_logQ > 0.999999);
    CHECK_THROWS_AS((void)scaling_exponents(prob, br, 50.0, 60.0), Error);
}

TEST_CASE("renormalize round trip and norm identity") {
    ProblemSpec prob = well_problem(0.0);
    auto g = Grid::line(30.0, 6001);
    auto gren = Grid::line(30.0, 6001);
    BranchPoint pt = newton_solve(prob, soliton_at(g, 4.0), 4.0, 1e-12);
    Field uE = renormalize(prob, pt, gren);

    // ||u_E||^2 = E^{-(1/p - n/2)} ||psi||^2 by change of variables
    const double nu = lp_norm(uE, 2.0);
    CHECK(nu * nu == doctest::Approx(pt.N / std::sqrt(4.0)).epsilon(1e-6));

    // with V = 0 the whole renormalized family collapses onto u_inf: the
    // renormalized-frame equation does not see E at all
    LimitingProfile prof = solve_uinfinity(prob, gren);
    for (double E : {4.0, 25.0, 64.0}) {
        BranchPoint rpt = newton_solve(prob, prof.u_inf, E, 1e-12,
                                       PFrame::renormalized);
        Field d = rpt.psi;
        axpy(-1.0, prof.u_inf, d);
        CHECK(lp_norm(d, 2.0) < 1e-10);
    }

    // renormalizing the physical solve reproduces u_inf at O(h^2 (E-1))
    Field diff = uE;
    axpy(-1.0, prof.u_inf, diff);
    const double err_h = lp_norm(diff, 2.0);
    CHECK(err_h < 1e-4);
    {
        auto g2 = Grid::line(30.0, 12001);
        auto gren2 = Grid::line(30.0, 12001);
        BranchPoint pt2 = newton_solve(prob, soliton_at(g2, 4.0), 4.0, 1e-12);
        Field uE2 = renormalize(prob, pt2, gren2);
        LimitingProfile prof2 = solve_uinfinity(prob, gren2);
        Field diff2 = uE2;
        axpy(-1.0, prof2.u_inf, diff2);
        CHECK(err_h / lp_norm(diff2, 2.0) > 3.5); // second order
    }

    // round trip back to the physical frame
    BranchPoint rp;
    rp.E = 4.0;
    rp.frame = PFrame::renormalized;
    rp.psi = uE;
    Field back = to_physical(prob, rp, g);
    axpy(-1.0, pt.psi, back);
    CHECK(lp_norm(back, 2.0) < 1e-6 * std::sqrt(pt.N));

    // resolution refusal
    BranchPoint coarse = pt;
    coarse.E = 1e4;
    CHECK_THROWS_AS((void)renormalize(prob, coarse, gren), Error);
}

TEST_CASE("stability labels from stored scalars") {
    Branch br = synthetic_branch(0.7, 1.0, 3.0, 11); // N rising, n_neg = 1
    SUBCASE("slope criterion, rising mass: stable") {
        StabilityLabel lab = stability_label(br, 5);
        CHECK(lab.stability == Stability::stable);
        CHECK(lab.basis == StabilityBasis::slope_criterion);
        CHECK(lab.dN_dE > 0.0);
    }
    SUBCASE("falling mass: unstable") {
        for (auto& pt : br.points) pt.N = 3.0 / pt.E;
        StabilityLabel lab = stability_label(br, 5);
        CHECK(lab.stability == Stability::unstable);
    }
    SUBCASE("two negative directions dominate") {
        br.points[5].lplus_inertia.n_neg = 2;
        StabilityLabel lab = stability_label(br, 5);
        CHECK(lab.stability == Stability::unstable);
        CHECK(lab.basis == StabilityBasis::multi_negative);
    }
    SUBCASE("indefinite L- is undetermined") {
        br.points[5].lminus_min_eig = -1.0;
        StabilityLabel lab = stability_label(br, 5);
        CHECK(lab.stability == Stability::undetermined);
        CHECK(lab.basis == StabilityBasis::lminus_indefinite);
    }
    SUBCASE("endpoints are undetermined under the slope rule") {
        StabilityLabel lab = stability_label(br, 0);
        CHECK(lab.stability == Stability::undetermined);
    }
}

TEST_CASE("no label flicker along a converged branch segment") {
    ProblemSpec prob = well_problem(2.0);
    auto g = Grid::line(30.0, 3001);
    LinearGroundState lin = linear_ground_state(prob.potential, g);
    Branch br;
    br.grid = g;
    br.points.push_back(seed_from_zero(prob, lin, 0.1));
    ContinuationConfig cfg;
    cfg.E_max = 8.0;
    cfg.ds0 = 0.02;
    cfg.track_eigs = true;
    cfg.n_eigs = 1;
    continue_branch(prob, br, +1, cfg);
    REQUIRE(br.points.size() > 6);
    int changes = 0;
    Stability prev = Stability::undetermined;
    for (size_t i = 1; i + 1 < br.points.size(); ++i) {
        Stability s = stability_label(br, i).stability;
        if (i > 1 && s != prev) ++changes;
        prev = s;
    }
    CHECK(changes == 0);
    CHECK(prev == Stability::stable);
}

TEST_CASE("decay check") {
    ProblemSpec prob = well_problem(0.0);
    auto g = Grid::line(30.0, 6001);

    SUBCASE("soliton at E = 4 decays at rate 2") {
        BranchPoint pt = newton_solve(prob, soliton_at(g, 4.0), 4.0, 1e-12);
        CHECK(decay_check(pt, 0.1));
        // measured slope close to -2
        std::vector<double> xs, ls;
        for (int i = 0; i < g->npoints(); ++i) {
            const double x = g->node(i);
            if (x < 15.0 || x > 22.5 || pt.psi[i] <= 0.0) continue;
            xs.push_back(x);
            ls.push_back(std::log(pt.psi[i]));
        }
        CHECK(ls_slope(xs, ls) == doctest::Approx(-2.0).epsilon(0.03));
    }
    SUBCASE("linear mode decays at rate 1") {
        ProblemSpec wp = well_problem(2.0);
        LinearGroundState lin = linear_ground_state(wp.potential, g);
        CHECK(decay_check(lin.psi0, 1.0, 0.05));
        std::vector<double> xs, ls;
        for (int i = 0; i < g->npoints(); ++i) {
            const double x = g->node(i);
            if (x < 15.0 || x > 22.5 || lin.psi0[i] <= 0.0) continue;
            xs.push_back(x);
            ls.push_back(std::log(lin.psi0[i]));
        }
        CHECK(ls_slope(xs, ls) == doctest::Approx(-1.0).epsilon(0.03));
    }
    SUBCASE("gamma >= E is rejected") {
        BranchPoint pt;
        pt.E = 1.0;
        pt.psi = soliton_at(g, 1.0);
        pt.frame = PFrame::physical;
        CHECK_THROWS_AS((void)decay_check(pt, 2.0), Error);
    }
}

TEST_CASE("decay check passes with a note when the tail underflows") {
    auto g = Grid::line(30.0, 1001);
    Field f(g);
    for (int i = 0; i < f.size(); ++i) {
        const double x = g->node(i);
        f[i] = (std::abs(x) < 5.0) ? std::cos(0.1 * M_PI * x) : 0.0;
    }
    CHECK(decay_check(f, 4.0, 0.1)); // tail exactly zero in the fit window
}

TEST_CASE("limit profile report classifies the single-well tail") {
    ProblemSpec prob = well_problem(2.0);
    auto g = Grid::line(30.0, 3001);
    auto gren = Grid::line(40.0, 4001);
    LinearGroundState lin = linear_ground_state(prob.potential, g);
    LimitingProfile prof = solve_uinfinity(prob, gren);
    auto crits = critical_points(prob.potential, g);
    REQUIRE(crits.size() == 1);

    // renormalized-frame branch from E = 30 to 60
    Branch br;
    br.grid = gren;
    br.frame = PFrame::renormalized;
    ProfileTemplate t;
    t.centers = {0.0};
    t.signs = {1};
    br.points.push_back(seed_from_infinity(prob, t, prof, 30.0, gren));
    ContinuationConfig cfg;
    cfg.E_max = 60.0;
    cfg.ds0 = 0.1;
    cfg.track_eigs = false;
    continue_branch(prob, br, +1, cfg);

    LimitReport rep = limit_profile_report(prob, br, prof, crits, gren, 5, 25.0);
    CHECK(rep.classified);
    REQUIRE(rep.template_centers.size() == 1);
    CHECK(rep.template_centers[0] == 0);
    CHECK(rep.template_signs[0] == 1);
    REQUIRE(!rep.points.empty());
    for (const auto& fp : rep.points) {
        CHECK(fp.remainder_rel < 1e-1);
        CHECK(std::abs(fp.drift_ratios[0]) < 1e-2);
    }
    CHECK(rep.points.back().remainder_rel < 5e-2);
    CHECK(rep.remainder_decreasing);

    SUBCASE("a template set that cannot match reports an unclassified limit") {
        std::vector<CriticalPoint> wrong(1);
        wrong[0].location = 9.0; // nowhere near the actual bump
        wrong[0].kind = CriticalPoint::Kind::minimum;
        LimitReport bad = limit_profile_report(prob, br, prof, wrong, gren, 3, 25.0);
        CHECK(!bad.classified);
    }
}

TEST_CASE("switching requires a simple crossing") {
    BifurcationEvent ev;
    ev.kind = BifurcationEvent::Kind::fold;
    Branch parent;
    ProblemSpec prob = well_problem(2.0);
    ContinuationConfig cfg;
    CHECK_THROWS_AS((void)switch_branch(prob, ev, parent, 0.05, cfg), Error);
}

TEST_CASE("morse_index_check matches template arithmetic") {
    std::vector<CriticalPoint> crits(3);
    crits[0].location = -4.0;
    crits[0].kind = CriticalPoint::Kind::minimum;
    crits[0].n_negative = 0;
    crits[1].location = 0.0;
    crits[1].kind = CriticalPoint::Kind::maximum;
    crits[1].n_negative = 1;
    crits[2].location = 4.0;
    crits[2].kind = CriticalPoint::Kind::minimum;
    crits[2].n_negative = 0;

    BranchPoint pt;
    pt.lplus_inertia.n_neg = 2;
    ProfileTemplate t;
    t.centers = {0.0};
    t.signs = {1};
    CHECK(morse_index_check(pt, t, crits)); // 1 + n_1 = 2

    t.centers = {-4.0, 4.0};
    t.signs = {1, 1};
    CHECK(morse_index_check(pt, t, crits)); // 2 + 0 = 2

    pt.lplus_inertia.n_neg = 4;
    t.centers = {-4.0, 0.0, 4.0};
    t.signs = {1, 1, 1};
    CHECK(morse_index_check(pt, t, crits)); // 3 + 1 = 4

    t.centers = {7.5};
    CHECK_THROWS_WITH_AS((void)morse_index_check(pt, t, crits), "not applicable",
                         Error);
}
