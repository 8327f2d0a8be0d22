#include "nlsbif/tridiag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace nlsbif {

std::vector<double> SymTridiag::apply(const std::vector<double>& x) const {
    const int nn = n();
    std::vector<double> y(static_cast<size_t>(nn), 0.0);
    for (int i = 0; i < nn; ++i) {
        double s = diag[static_cast<size_t>(i)] * x[static_cast<size_t>(i)];
        if (i > 0) s += off[static_cast<size_t>(i - 1)] * x[static_cast<size_t>(i - 1)];
        if (i < nn - 1) s += off[static_cast<size_t>(i)] * x[static_cast<size_t>(i + 1)];
        y[static_cast<size_t>(i)] = s;
    }
    return y;
}

void SymTridiag::gershgorin(double& lo, double& hi) const {
    lo = std::numeric_limits<double>::max();
    hi = std::numeric_limits<double>::lowest();
    const int nn = n();
    for (int i = 0; i < nn; ++i) {
        double r = 0.0;
        if (i > 0) r += std::abs(off[static_cast<size_t>(i - 1)]);
        if (i < nn - 1) r += std::abs(off[static_cast<size_t>(i)]);
        lo = std::min(lo, diag[static_cast<size_t>(i)] - r);
        hi = std::max(hi, diag[static_cast<size_t>(i)] + r);
    }
}

int sturm_count_below(const SymTridiag& T, double s) {
    const int n = T.n();
    int cnt = 0;
    double q = T.diag[0] - s;
    if (q < 0.0) ++cnt;
    for (int i = 1; i < n; ++i) {
        if (q == 0.0) q = 1e-300;
        const double b = T.off[static_cast<size_t>(i - 1)];
        q = (T.diag[static_cast<size_t>(i)] - s) - b * b / q;
        if (q < 0.0) ++cnt;
    }
    return cnt;
}

TriLU::TriLU(const SymTridiag& T, double shift) : n_(T.n()) {
    const size_t n = static_cast<size_t>(n_);
    d_.resize(n);
    u1_.assign(n > 0 ? n - 1 : 0, 0.0);
    u2_.assign(n > 1 ? n - 2 : 0, 0.0);
    l_.assign(n > 0 ? n - 1 : 0, 0.0);
    swapped_.assign(n > 0 ? n - 1 : 0, 0);

    for (size_t i = 0; i < n; ++i) d_[i] = T.diag[i] - shift;
    std::vector<double> dl(T.off);
    for (size_t i = 0; i + 1 < n; ++i) u1_[i] = T.off[i];

    double scale = 1.0;
    for (size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(d_[i]));
    for (double b : T.off) scale = std::max(scale, std::abs(b));
    const double tiny = 1e-280 * scale;
    min_pivot_ratio_ = std::numeric_limits<double>::max();

    for (size_t i = 0; i < n; ++i) {
        if (i + 1 < n && std::abs(dl[i]) > std::abs(d_[i])) {
            std::swap(d_[i], dl[i]);
            const double t1 = u1_[i];
            u1_[i] = d_[i + 1];
            d_[i + 1] = t1;
            if (i + 2 < n) {
                u2_[i] = u1_[i + 1];
                u1_[i + 1] = 0.0;
            }
            swapped_[i] = 1;
        }
        if (d_[i] == 0.0) d_[i] = tiny;
        min_pivot_ratio_ = std::min(min_pivot_ratio_, std::abs(d_[i]) / scale);
        if (i + 1 < n) {
            const double fact = dl[i] / d_[i];
            l_[i] = fact;
            d_[i + 1] -= fact * u1_[i];
            if (i + 2 < n) u1_[i + 1] -= fact * u2_[i];
        }
    }
}

std::vector<double> TriLU::solve(const std::vector<double>& rhs) const {
    require(static_cast<int>(rhs.size()) == n_, ErrorKind::structural,
            "TriLU::solve size mismatch");
    std::vector<double> b(rhs);
    const size_t n = static_cast<size_t>(n_);
    for (size_t i = 0; i + 1 < n; ++i) {
        if (swapped_[i]) std::swap(b[i], b[i + 1]);
        b[i + 1] -= l_[i] * b[i];
    }
    std::vector<double> x(n);
    x[n - 1] = b[n - 1] / d_[n - 1];
    if (n > 1) x[n - 2] = (b[n - 2] - u1_[n - 2] * x[n - 1]) / d_[n - 2];
    for (int i = static_cast<int>(n) - 3; i >= 0; --i) {
        const size_t ii = static_cast<size_t>(i);
        x[ii] = (b[ii] - u1_[ii] * x[ii + 1] - u2_[ii] * x[ii + 2]) / d_[ii];
    }
    return x;
}

void fix_sign(std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    if (m == 0.0) return;
    for (double x : v) {
        if (std::abs(x) > 1e-6 * m) {
            if (x < 0.0)
                for (double& y : v) y = -y;
            return;
        }
    }
}

namespace {

// Fixed linear congruential generator: deterministic start vectors for
// inverse iteration, independent of any global RNG state.
struct Lcg {
    unsigned long long s;
    explicit Lcg(unsigned long long seed) : s(seed) {}
    double next() {
        s = s * 6364136223846793005ULL + 1442695040888963407ULL;
        return static_cast<double>((s >> 11) & ((1ULL << 53) - 1)) /
                   static_cast<double>(1ULL << 53) - 0.5;
    }
};

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace

std::vector<TriEigPair> eig_smallest(const SymTridiag& T, int k,
                                     const EigOptions& opts) {
    const int n = T.n();
    require(k >= 1 && k <= n, ErrorKind::structural, "eig_smallest: bad k");
    require(k <= 10, ErrorKind::structural, "eig_smallest: k capped at 10");

    double lo, hi;
    T.gershgorin(lo, hi);
    const double scale = std::max({1.0, std::abs(lo), std::abs(hi)});
    const double btol = opts.bisect_tol > 0.0 ? opts.bisect_tol : 1e-13 * scale;
    const double cgap = opts.cluster_gap > 0.0 ? opts.cluster_gap : 1e-4 * scale;

    std::vector<TriEigPair> out;
    out.reserve(static_cast<size_t>(k));
    for (int j = 0; j < k; ++j) {
        double a = lo, b = hi + 1e-12 * scale;
        while (b - a > btol) {
            const double mid = 0.5 * (a + b);
            if (sturm_count_below(T, mid) >= j + 1)
                b = mid;
            else
                a = mid;
        }
        double lam = 0.5 * (a + b);

        // inverse iteration with Rayleigh-quotient refactoring: the first
        // passes use the bisection shift, later ones sharpen the shift so the
        // final residual sits near eps * ||T||
        Lcg rng(0x9e3779b97f4a7c15ULL + static_cast<unsigned long long>(j));
        std::vector<double> v(static_cast<size_t>(n));
        for (double& x : v) x = rng.next();
        double nv = norm2(v);
        for (double& x : v) x /= nv;

        double shift = lam;
        TriLU lu(T, shift);
        double best_res = std::numeric_limits<double>::max();
        std::vector<double> best_v = v;
        int refactors = 0;
        for (int it = 0; it < opts.max_inverse_iters; ++it) {
            v = lu.solve(v);
            for (const auto& prev : out) {
                if (std::abs(prev.value - lam) < cgap) {
                    const double c = dot(v, prev.vector);
                    for (size_t i = 0; i < v.size(); ++i)
                        v[i] -= c * prev.vector[i];
                }
            }
            nv = norm2(v);
            require(nv > 0.0 && std::isfinite(nv), ErrorKind::eigen,
                    "inverse iteration produced a null vector");
            for (double& x : v) x /= nv;
            auto Tv = T.apply(v);
            const double rayleigh = dot(v, Tv);
            double res = 0.0;
            for (size_t i = 0; i < v.size(); ++i) {
                const double d = Tv[i] - rayleigh * v[i];
                res += d * d;
            }
            res = std::sqrt(res);
            if (res < best_res) {
                best_res = res;
                best_v = v;
                lam = rayleigh;
            }
            if (res <= 60.0 * std::numeric_limits<double>::epsilon() * scale) break;
            if (it >= 1 && refactors < 4 &&
                std::abs(rayleigh - shift) > 1e-14 * scale) {
                shift = rayleigh;
                lu = TriLU(T, shift);
                ++refactors;
            }
        }
        if (best_res > 1e-10 * scale)
            fail(ErrorKind::eigen,
                 "eig_smallest: inverse iteration stalled, best residual " +
                     std::to_string(best_res));
        fix_sign(best_v);
        out.push_back({lam, std::move(best_v)});
    }
    std::sort(out.begin(), out.end(),
              [](const TriEigPair& x, const TriEigPair& y) { return x.value < y.value; });
    return out;
}

BorderedTridiag::BorderedTridiag(const SymTridiag& T,
                                 const std::vector<std::vector<double>>& border_cols,
                                 const std::vector<std::vector<double>>& border_rows,
                                 const std::vector<std::vector<double>>& corner,
                                 double shift)
    : n_(T.n()), m_(static_cast<int>(border_cols.size())) {
    require(static_cast<int>(border_rows.size()) == m_, ErrorKind::structural,
            "bordered system needs as many border rows as columns");
    const size_t n = static_cast<size_t>(n_);
    const size_t m = static_cast<size_t>(m_);
    for (size_t j = 0; j < m; ++j) {
        require(static_cast<int>(border_cols[j].size()) == n_ &&
                    static_cast<int>(border_rows[j].size()) == n_,
                ErrorKind::structural, "bordered system border size mismatch");
    }

    d_.resize(n);
    u1_.assign(n > 0 ? n - 1 : 0, 0.0);
    u2_.assign(n > 1 ? n - 2 : 0, 0.0);
    l_.assign(n > 0 ? n - 1 : 0, 0.0);
    swapped_.assign(n > 0 ? n - 1 : 0, 0);
    bc_ = border_cols;                // copies, transformed in place
    std::vector<std::vector<double>> cr = border_rows;
    br_.assign(m, std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> D(m, std::vector<double>(m, 0.0));
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < m; ++j)
            D[i][j] = corner.empty() ? 0.0 : corner[i][j];

    for (size_t i = 0; i < n; ++i) d_[i] = T.diag[i] - shift;
    std::vector<double> dl(T.off);
    for (size_t i = 0; i + 1 < n; ++i) u1_[i] = T.off[i];

    double scale = 1.0;
    for (size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(d_[i]));
    const double tiny_piv = 1e-280;

    for (size_t i = 0; i < n; ++i) {
        // band pivoting between rows i and i+1
        if (i + 1 < n && std::abs(dl[i]) > std::abs(d_[i])) {
            std::swap(d_[i], dl[i]);
            const double t1 = u1_[i];
            u1_[i] = d_[i + 1];
            d_[i + 1] = t1;
            if (i + 2 < n) {
                u2_[i] = u1_[i + 1];
                u1_[i + 1] = 0.0;
            }
            for (size_t j = 0; j < m; ++j) std::swap(bc_[j][i], bc_[j][i + 1]);
            swapped_[i] = 1;
        }
        if (d_[i] == 0.0) d_[i] = tiny_piv * scale;
        // eliminate the band subdiagonal
        if (i + 1 < n) {
            const double fact = dl[i] / d_[i];
            l_[i] = fact;
            d_[i + 1] -= fact * u1_[i];
            if (i + 2 < n) u1_[i + 1] -= fact * u2_[i];
            for (size_t j = 0; j < m; ++j)
                bc_[j][i + 1] -= fact * bc_[j][i];
        }
        // eliminate the border-row entries in column i
        for (size_t kR = 0; kR < m; ++kR) {
            const double mult = cr[kR][i] / d_[i];
            br_[kR][i] = mult;
            if (mult == 0.0) continue;
            if (i + 1 < n) cr[kR][i + 1] -= mult * u1_[i];
            if (i + 2 < n) cr[kR][i + 2] -= mult * u2_[i];
            for (size_t j = 0; j < m; ++j)
                D[kR][j] -= mult * bc_[j][i];
        }
    }

    // dense LU with partial pivoting on the m x m corner
    corner_lu_ = D;
    corner_piv_.resize(m);
    double cscale = 0.0;
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < m; ++j) cscale = std::max(cscale, std::abs(D[i][j]));
    if (cscale == 0.0) cscale = 1.0;
    for (size_t c = 0; c < m; ++c) {
        size_t piv = c;
        for (size_t r = c + 1; r < m; ++r)
            if (std::abs(corner_lu_[r][c]) > std::abs(corner_lu_[piv][c])) piv = r;
        corner_piv_[c] = static_cast<int>(piv);
        std::swap(corner_lu_[c], corner_lu_[piv]);
        if (std::abs(corner_lu_[c][c]) < 1e-12 * cscale) {
            singular_ = true;
            continue;
        }
        for (size_t r = c + 1; r < m; ++r) {
            const double f = corner_lu_[r][c] / corner_lu_[c][c];
            corner_lu_[r][c] = f;
            for (size_t j = c + 1; j < m; ++j)
                corner_lu_[r][j] -= f * corner_lu_[c][j];
        }
    }
}

void BorderedTridiag::solve(const std::vector<double>& f,
                            const std::vector<double>& g,
                            std::vector<double>& x,
                            std::vector<double>& y) const {
    require(!singular_, ErrorKind::solver, "bordered system singular");
    require(static_cast<int>(f.size()) == n_ && static_cast<int>(g.size()) == m_,
            ErrorKind::structural, "bordered solve size mismatch");
    const size_t n = static_cast<size_t>(n_);
    const size_t m = static_cast<size_t>(m_);
    std::vector<double> b(f), c(g);
    for (size_t i = 0; i < n; ++i) {
        if (i + 1 < n) {
            if (swapped_[i]) std::swap(b[i], b[i + 1]);
            b[i + 1] -= l_[i] * b[i];
        }
        for (size_t kR = 0; kR < m; ++kR) c[kR] -= br_[kR][i] * b[i];
    }
    // corner solve
    y.assign(m, 0.0);
    for (size_t i = 0; i < m; ++i)
        std::swap(c[i], c[static_cast<size_t>(corner_piv_[i])]);
    for (size_t i = 0; i < m; ++i) {
        double s = c[i];
        for (size_t j = 0; j < i; ++j) s -= corner_lu_[i][j] * y[j];
        y[i] = s;
    }
    for (int i = static_cast<int>(m) - 1; i >= 0; --i) {
        const size_t ii = static_cast<size_t>(i);
        double s = y[ii];
        for (size_t j = ii + 1; j < m; ++j) s -= corner_lu_[ii][j] * y[j];
        y[ii] = s / corner_lu_[ii][ii];
    }
    // band back substitution with border contribution
    x.assign(n, 0.0);
    for (int i = static_cast<int>(n) - 1; i >= 0; --i) {
        const size_t ii = static_cast<size_t>(i);
        double s = b[ii];
        if (ii + 1 < n) s -= u1_[ii] * x[ii + 1];
        if (ii + 2 < n) s -= u2_[ii] * x[ii + 2];
        for (size_t j = 0; j < m; ++j) s -= bc_[j][ii] * y[j];
        x[ii] = s / d_[ii];
    }
}

} // namespace nlsbif
