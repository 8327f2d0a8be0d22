#include <doctest.h>

#include <cmath>

#include "nlsbif/continuation.hpp"
#include "nlsbif/operators.hpp"
#include "oracles.hpp"

using namespace nlsbif;
using oracles::sech;

namespace {

ProblemSpec soliton_problem(double p = 1.0, double sigma = -1.0) {
    ProblemSpec prob;
    prob.p = p;
    prob.sigma = sigma;
    prob.n = 1;
    prob.frame = Frame::line;
    prob.potential.wells.clear();
    return prob;
}

Field soliton(const GridPtr& g) {
    Field u(g);
    for (int i = 0; i < g->npoints(); ++i)
        u[i] = std::sqrt(2.0) * sech(g->node(i));
    u[0] = u[g->npoints() - 1] = 0.0;
    return u;
}

} // namespace

TEST_CASE("L+ at psi = 0 equals H0 + E") {
    auto g = Grid::line(20.0, 2001);
    ProblemSpec prob = soliton_problem();
    prob.potential.wells.push_back({2.0, 0.0, 1.0});
    Field zero(g);
    OperatorMatrix Lp = assemble_Lplus(prob, zero, 0.7);
    OperatorMatrix H0 = assemble_H0(prob, g);
    H0.add_scalar(0.7);
    for (int i = 0; i < Lp.matrix().n(); ++i)
        CHECK(Lp.matrix().diag[static_cast<size_t>(i)] ==
              doctest::Approx(H0.matrix().diag[static_cast<size_t>(i)]).epsilon(1e-15));
}

TEST_CASE("Poschl-Teller spectrum of L+ and L- at the soliton") {
    auto g = Grid::line(30.0, 6001);
    ProblemSpec prob = soliton_problem();
    Field u = soliton(g);

    OperatorMatrix Lp = assemble_Lplus(prob, u, 1.0); // -d2 + 1 - 6 sech^2
    auto ep = smallest_eigs(Lp, 2);
    CHECK(ep[0].value == doctest::Approx(-3.0).epsilon(1e-3 / 3.0));
    CHECK(std::abs(ep[1].value) < 1e-3);

    OperatorMatrix Lm = assemble_Lminus(prob, u, 1.0); // -d2 + 1 - 2 sech^2
    auto em = smallest_eigs(Lm, 1);
    CHECK(std::abs(em[0].value) < 1e-3);
    // eigenfunction proportional to sech
    Field ref(g);
    for (int i = 0; i < ref.size(); ++i) ref[i] = sech(g->node(i));
    ref *= 1.0 / lp_norm(ref, 2.0);
    CHECK(std::abs(inner(em[0].vec, ref)) > 1.0 - 1e-6);
}

TEST_CASE("defocusing L+ at the soliton shape is positive definite") {
    auto g = Grid::line(30.0, 6001);
    ProblemSpec prob = soliton_problem(1.0, +1.0);
    Field u = soliton(g);
    OperatorMatrix Lp = assemble_Lplus(prob, u, 1.0); // -d2 + 1 + 6 sech^2
    auto ep = smallest_eigs(Lp, 1);
    CHECK(ep[0].value > 1.0 - 1e-9);
}

TEST_CASE("inertia counts") {
    auto g = Grid::line(30.0, 3001);
    ProblemSpec free = soliton_problem();
    Field zero(g);
    OperatorMatrix lap = laplacian_matrix(g);
    Inertia in0 = inertia(lap, 0.0, 1e-12);
    CHECK(in0.n_neg == 0);

    Field u = soliton(g);
    OperatorMatrix Lp = assemble_Lplus(free, u, 1.0);
    Inertia in1 = inertia(Lp, 0.0, 1e-3); // translation mode within 1e-3 of zero
    CHECK(in1.n_neg == 1);
    CHECK(in1.n_zero == 1);

    ProblemSpec welled = soliton_problem();
    welled.potential.wells.push_back({2.0, 0.0, 1.0});
    OperatorMatrix H = assemble_H0(welled, g);
    H.add_scalar(0.5);
    Inertia in2 = inertia(H, 0.0, 1e-8);
    CHECK(in2.n_neg == 1); // single eigenvalue -1 < -0.5
}

TEST_CASE("inertia and smallest_eigs against the dense Jacobi oracle") {
    // random symmetric tridiagonal matrices, dimension <= 200
    oracles::Lcg rng(12345);
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 50 + trial * 37;
        SymTridiag T(n);
        for (int i = 0; i < n; ++i) T.diag[static_cast<size_t>(i)] = 4.0 * rng.uniform();
        for (int i = 0; i + 1 < n; ++i) T.off[static_cast<size_t>(i)] = 2.0 * rng.uniform();

        std::vector<std::vector<double>> A(static_cast<size_t>(n),
                                           std::vector<double>(static_cast<size_t>(n), 0.0));
        for (int i = 0; i < n; ++i) {
            A[static_cast<size_t>(i)][static_cast<size_t>(i)] = T.diag[static_cast<size_t>(i)];
            if (i + 1 < n) {
                A[static_cast<size_t>(i)][static_cast<size_t>(i + 1)] = T.off[static_cast<size_t>(i)];
                A[static_cast<size_t>(i + 1)][static_cast<size_t>(i)] = T.off[static_cast<size_t>(i)];
            }
        }
        auto ev = oracles::dense_eigenvalues(A);

        // exact counts at several shifts (monotone in shift)
        int prev = -1;
        for (double s : {-3.0, -1.0, -0.1, 0.0, 0.4, 1.7, 3.0}) {
            int dense_count = 0;
            for (double v : ev)
                if (v < s) ++dense_count;
            const int cnt = sturm_count_below(T, s);
            CHECK(cnt == dense_count);
            CHECK(cnt >= prev);
            prev = cnt;
        }

        auto pairs = eig_smallest(T, 5);
        for (int k = 0; k < 5; ++k) {
            CHECK(pairs[static_cast<size_t>(k)].value ==
                  doctest::Approx(ev[static_cast<size_t>(k)])
                      .epsilon(1e-8));
        }
    }
}

TEST_CASE("L+ - L- equals 2 p sigma |psi|^2p as matrices") {
    auto g = Grid::line(20.0, 1001);
    ProblemSpec prob = soliton_problem(0.7, -1.3);
    Field u = soliton(g);
    OperatorMatrix Lp = assemble_Lplus(prob, u, 0.9);
    OperatorMatrix Lm = assemble_Lminus(prob, u, 0.9);
    const int b = g->dof_begin();
    double scale = 0.0;
    for (int i = 0; i < Lp.matrix().n(); ++i)
        scale = std::max(scale, std::abs(Lp.matrix().diag[static_cast<size_t>(i)]));
    for (int i = 0; i < Lp.matrix().n(); ++i) {
        const double expect =
            2.0 * prob.p * prob.sigma * std::pow(std::abs(u[b + i]), 2.0 * prob.p);
        const double got = Lp.matrix().diag[static_cast<size_t>(i)] -
                           Lm.matrix().diag[static_cast<size_t>(i)];
        CHECK(std::abs(got - expect) <= 1e-13 * scale);
    }
    // off-diagonals identical
    for (int i = 0; i + 1 < Lp.matrix().n(); ++i)
        CHECK(Lp.matrix().off[static_cast<size_t>(i)] ==
              Lm.matrix().off[static_cast<size_t>(i)]);

    // Ritz comparison: <w, L+ w> <= <w, L- w> for sigma < 0
    oracles::Lcg rng(99);
    for (int t = 0; t < 4; ++t) {
        Field w(g);
        for (int i = 0; i < w.size(); ++i) w[i] = rng.uniform();
        w[0] = w[w.size() - 1] = 0.0;
        CHECK(inner(w, Lp.apply(w)) <= inner(w, Lm.apply(w)) + 1e-12);
    }
}

TEST_CASE("continuum cluster labeling above the essential-spectrum proxy") {
    auto g = Grid::line(30.0, 3001);
    ProblemSpec prob = soliton_problem();
    prob.potential.wells.push_back({2.0, 0.0, 1.0});
    OperatorMatrix H = assemble_H0(prob, g); // one bound state at -1, edge at 0
    auto eigs = smallest_eigs(H, 3);
    CHECK(!eigs[0].continuum);
    CHECK(eigs[0].value == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(eigs[1].continuum);
    CHECK(eigs[2].continuum);
    CHECK(eigs[1].value >= -10.0 * default_tol_zero(0.0));
}

TEST_CASE("projected_solve on the singular soliton L+") {
    auto g = Grid::line(30.0, 6001);
    ProblemSpec prob = soliton_problem();
    Field u = soliton(g);
    // polish to the discrete solution so the kernel is sharp
    BranchPoint pt = newton_solve(prob, u, 1.0, 1e-12);
    OperatorMatrix Lp = assemble_Lplus(prob, pt.psi, 1.0);
    Field kernel = gradient(pt.psi); // translation mode

    Field rhs(g);
    for (int i = 0; i < rhs.size(); ++i) rhs[i] = sech(g->node(i)) * g->node(i) * 0.1;
    rhs[0] = rhs[rhs.size() - 1] = 0.0;

    SUBCASE("zero rhs gives zero") {
        Field z(g);
        Field v = projected_solve(Lp, z, {kernel});
        CHECK(lp_norm(v, 2.0) < 1e-12);
    }

    SUBCASE("constrained solve succeeds where the plain solve blows up") {
        Field v = projected_solve(Lp, rhs, {kernel});
        CHECK(std::abs(inner(v, kernel)) < 1e-10 * lp_norm(kernel, 2.0));
        // residual check: L+ v + lam * c = rhs for some lam
        Field res = Lp.apply(v);
        axpy(-1.0, rhs, res);
        // subtract the kernel component of the defect
        Field kn = kernel;
        kn *= 1.0 / lp_norm(kernel, 2.0);
        const double lam = inner(res, kn);
        axpy(-lam, kn, res);
        CHECK(lp_norm(res, 2.0) < 1e-7 * lp_norm(rhs, 2.0));

        Field vplain = Lp.solve(rhs);
        CHECK(lp_norm(vplain, 2.0) > 1e3 * lp_norm(v, 2.0)); // kernel blow-up
    }

    SUBCASE("dependent constraints are rejected") {
        Field k2 = kernel;
        CHECK_THROWS_AS((void)projected_solve(Lp, rhs, {kernel, k2}), Error);
    }
}

TEST_CASE("bordered arrow solves match dense elimination") {
    // random tridiagonal band + dense borders, including a near-singular band
    oracles::Lcg rng(4242);
    for (int trial = 0; trial < 4; ++trial) {
        const int n = 30 + 11 * trial;
        const int m = 1 + trial % 2;
        SymTridiag T(n);
        for (int i = 0; i < n; ++i) T.diag[static_cast<size_t>(i)] = 3.0 * rng.uniform();
        for (int i = 0; i + 1 < n; ++i) T.off[static_cast<size_t>(i)] = 2.0 * rng.uniform();
        if (trial == 2) {
            // force a nearly singular band: shift by (almost) an eigenvalue
            auto pairs = eig_smallest(T, 1);
            for (int i = 0; i < n; ++i)
                T.diag[static_cast<size_t>(i)] -= pairs[0].value + 1e-13;
        }
        std::vector<std::vector<double>> B(static_cast<size_t>(m),
                                           std::vector<double>(static_cast<size_t>(n)));
        std::vector<std::vector<double>> C(static_cast<size_t>(m),
                                           std::vector<double>(static_cast<size_t>(n)));
        std::vector<std::vector<double>> D(static_cast<size_t>(m),
                                           std::vector<double>(static_cast<size_t>(m)));
        for (int j = 0; j < m; ++j) {
            for (int i = 0; i < n; ++i) {
                B[static_cast<size_t>(j)][static_cast<size_t>(i)] = rng.uniform();
                C[static_cast<size_t>(j)][static_cast<size_t>(i)] = rng.uniform();
            }
            for (int k = 0; k < m; ++k)
                D[static_cast<size_t>(j)][static_cast<size_t>(k)] = 0.3 * rng.uniform();
        }
        std::vector<double> f(static_cast<size_t>(n)), g(static_cast<size_t>(m));
        for (double& v : f) v = rng.uniform();
        for (double& v : g) v = rng.uniform();

        BorderedTridiag bt(T, B, C, D);
        REQUIRE(!bt.singular());
        std::vector<double> x, y;
        bt.solve(f, g, x, y);
        if (trial == 2) {
            // band-restricted pivoting loses digits when the band itself is
            //near-singular; one refinement pass (as projected_solve does)
            // restores full accuracy
            std::vector<double> rf = T.apply(x), rg(static_cast<size_t>(m), 0.0);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < m; ++j)
                    rf[static_cast<size_t>(i)] += B[static_cast<size_t>(j)][static_cast<size_t>(i)] * y[static_cast<size_t>(j)];
                rf[static_cast<size_t>(i)] = f[static_cast<size_t>(i)] - rf[static_cast<size_t>(i)];
            }
            for (int j = 0; j < m; ++j) {
                double s = 0.0;
                for (int i = 0; i < n; ++i)
                    s += C[static_cast<size_t>(j)][static_cast<size_t>(i)] * x[static_cast<size_t>(i)];
                for (int k = 0; k < m; ++k)
                    s += D[static_cast<size_t>(j)][static_cast<size_t>(k)] * y[static_cast<size_t>(k)];
                rg[static_cast<size_t>(j)] = g[static_cast<size_t>(j)] - s;
            }
            std::vector<double> dx, dy;
            bt.solve(rf, rg, dx, dy);
            for (int i = 0; i < n; ++i) x[static_cast<size_t>(i)] += dx[static_cast<size_t>(i)];
            for (int j = 0; j < m; ++j) y[static_cast<size_t>(j)] += dy[static_cast<size_t>(j)];
        }

        // dense elimination oracle on the full (n+m) system
        const int N = n + m;
        std::vector<std::vector<double>> A(static_cast<size_t>(N),
                                           std::vector<double>(static_cast<size_t>(N), 0.0));
        std::vector<double> rhs(static_cast<size_t>(N));
        for (int i = 0; i < n; ++i) {
            A[static_cast<size_t>(i)][static_cast<size_t>(i)] = T.diag[static_cast<size_t>(i)];
            if (i + 1 < n) {
                A[static_cast<size_t>(i)][static_cast<size_t>(i + 1)] = T.off[static_cast<size_t>(i)];
                A[static_cast<size_t>(i + 1)][static_cast<size_t>(i)] = T.off[static_cast<size_t>(i)];
            }
            for (int j = 0; j < m; ++j) {
                A[static_cast<size_t>(i)][static_cast<size_t>(n + j)] = B[static_cast<size_t>(j)][static_cast<size_t>(i)];
                A[static_cast<size_t>(n + j)][static_cast<size_t>(i)] = C[static_cast<size_t>(j)][static_cast<size_t>(i)];
            }
            rhs[static_cast<size_t>(i)] = f[static_cast<size_t>(i)];
        }
        for (int j = 0; j < m; ++j) {
            for (int k = 0; k < m; ++k)
                A[static_cast<size_t>(n + j)][static_cast<size_t>(n + k)] = D[static_cast<size_t>(j)][static_cast<size_t>(k)];
            rhs[static_cast<size_t>(n + j)] = g[static_cast<size_t>(j)];
        }
        for (int c = 0; c < N; ++c) { // dense LU with partial pivoting
            int piv = c;
            for (int r = c + 1; r < N; ++r)
                if (std::abs(A[static_cast<size_t>(r)][static_cast<size_t>(c)]) >
                    std::abs(A[static_cast<size_t>(piv)][static_cast<size_t>(c)]))
                    piv = r;
            std::swap(A[static_cast<size_t>(c)], A[static_cast<size_t>(piv)]);
            std::swap(rhs[static_cast<size_t>(c)], rhs[static_cast<size_t>(piv)]);
            for (int r = c + 1; r < N; ++r) {
                const double fac = A[static_cast<size_t>(r)][static_cast<size_t>(c)] /
                                   A[static_cast<size_t>(c)][static_cast<size_t>(c)];
                for (int k = c; k < N; ++k)
                    A[static_cast<size_t>(r)][static_cast<size_t>(k)] -=
                        fac * A[static_cast<size_t>(c)][static_cast<size_t>(k)];
                rhs[static_cast<size_t>(r)] -= fac * rhs[static_cast<size_t>(c)];
            }
        }
        std::vector<double> z(static_cast<size_t>(N));
        for (int r = N - 1; r >= 0; --r) {
            double s = rhs[static_cast<size_t>(r)];
            for (int k = r + 1; k < N; ++k)
                s -= A[static_cast<size_t>(r)][static_cast<size_t>(k)] * z[static_cast<size_t>(k)];
            z[static_cast<size_t>(r)] = s / A[static_cast<size_t>(r)][static_cast<size_t>(r)];
        }
        double zmax = 0.0;
        for (double v : z) zmax = std::max(zmax, std::abs(v));
        for (int i = 0; i < n; ++i)
            CHECK(std::abs(x[static_cast<size_t>(i)] - z[static_cast<size_t>(i)]) <
                  1e-8 * (1.0 + zmax));
        for (int j = 0; j < m; ++j)
            CHECK(std::abs(y[static_cast<size_t>(j)] - z[static_cast<size_t>(n + j)]) <
                  1e-8 * (1.0 + zmax));
    }
}

TEST_CASE("projected operator bound is uniform in the well separation") {
    // two translation-kernel wells at +-c: || (P L P)^{-1} || estimated by
    // power iteration on the projected solve must be separation-independent
    // (within 20% across separations 8, 12, 16)
    auto g = Grid::line(60.0, 6001);
    std::vector<double> inv_norms;
    for (double c : {4.0, 6.0, 8.0}) {
        SymTridiag T(g->ndof());
        const double h2 = g->h() * g->h();
        for (int i = 0; i < T.n(); ++i) {
            const double x = g->node(i + 1);
            T.diag[static_cast<size_t>(i)] =
                2.0 / h2 + 1.0 - 6.0 * sech(x - c) * sech(x - c) -
                6.0 * sech(x + c) * sech(x + c);
        }
        for (int i = 0; i + 1 < T.n(); ++i) T.off[static_cast<size_t>(i)] = -1.0 / h2;
        OperatorMatrix op(g, std::move(T), OpLabel::custom, 1.0);

        auto mode = [&](double center) {
            Field m(g);
            for (int i = 0; i < m.size(); ++i) {
                const double x = g->node(i) - center;
                m[i] = -std::sqrt(2.0) * sech(x) * std::tanh(x); // d/dx soliton
            }
            m *= 1.0 / lp_norm(m, 2.0);
            return m;
        };
        std::vector<Field> cons = {mode(c), mode(-c)};
        Field v(g);
        for (int i = 0; i < v.size(); ++i)
            v[i] = std::exp(-0.02 * g->node(i) * g->node(i));
        v[0] = v[v.size() - 1] = 0.0;
        double growth = 0.0;
        for (int it = 0; it < 12; ++it) {
            v *= 1.0 / lp_norm(v, 2.0);
            v = projected_solve(op, v, cons);
            growth = lp_norm(v, 2.0); // -> 1 / |lambda_min| of P L P
        }
        inv_norms.push_back(growth);
    }
    for (double nv : inv_norms) {
        CHECK(nv <= 1.2 * inv_norms[0]);
        CHECK(nv >= 0.8 * inv_norms[0]);
    }
}
