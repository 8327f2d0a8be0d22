#pragma once

#include <vector>

#include "nlsbif/errors.hpp"

namespace nlsbif {

// Symmetric tridiagonal matrix: diag[0..n), off[0..n-1).
struct SymTridiag {
    std::vector<double> diag;
    std::vector<double> off;

    int n() const { return static_cast<int>(diag.size()); }
    SymTridiag() = default;
    explicit SymTridiag(int n)
        : diag(static_cast<size_t>(n), 0.0),
          off(n > 0 ? static_cast<size_t>(n - 1) : 0, 0.0) {}

    std::vector<double> apply(const std::vector<double>& x) const;
    // Gershgorin bounds on the spectrum.
    void gershgorin(double& lo, double& hi) const;
};

// Number of eigenvalues of T strictly below s (Sturm sequence / LDL^T
// inertia; exact for the discrete matrix, zero pivots nudged).
int sturm_count_below(const SymTridiag& T, double s);

// LU factorization of (T - shift I) with partial pivoting between adjacent
// rows; fill is one extra superdiagonal. Safe near-singular solves.
class TriLU {
  public:
    TriLU(const SymTridiag& T, double shift = 0.0);

    // Smallest |pivot| relative to the matrix scale; ~0 signals singularity.
    double min_pivot_ratio() const { return min_pivot_ratio_; }
    std::vector<double> solve(const std::vector<double>& rhs) const;

  private:
    int n_;
    std::vector<double> d_, u1_, u2_, l_;
    std::vector<char> swapped_;
    double min_pivot_ratio_;
};

// Bordered "arrow" system
//   [ T  B ] [x]   [f]
//   [ C  D ] [y] = [g]
// with T tridiagonal (n x n), B (n x m), C (m x n), D (m x m). Elimination
// pivots within the band; the m border rows are carried through the sweep
// and finished with a dense m x m solve. Remains solvable when T alone is
// singular but the bordered matrix is not.
class BorderedTridiag {
  public:
    BorderedTridiag(const SymTridiag& T,
                    const std::vector<std::vector<double>>& border_cols,
                    const std::vector<std::vector<double>>& border_rows,
                    const std::vector<std::vector<double>>& corner,
                    double shift = 0.0);

    bool singular() const { return singular_; }
    // Solves for [x; y]; throws Error(solver) if the corner system is singular.
    void solve(const std::vector<double>& f, const std::vector<double>& g,
               std::vector<double>& x, std::vector<double>& y) const;

  private:
    int n_, m_;
    std::vector<double> d_, u1_, u2_, l_;
    std::vector<char> swapped_;
    std::vector<std::vector<double>> bc_;   // transformed border columns
    std::vector<std::vector<double>> br_;   // border row elimination multipliers
    std::vector<std::vector<double>> corner_lu_;
    std::vector<int> corner_piv_;
    bool singular_ = false;
};

struct EigOptions {
    double bisect_tol = 0.0;   // 0 -> automatic (1e-13 * spectral scale)
    int max_inverse_iters = 50;
    double cluster_gap = 0.0;  // 0 -> automatic
};

// k algebraically smallest eigenpairs via Sturm-bisection brackets plus
// shift-invert inverse iteration; eigenvectors have unit Euclidean norm and
// deterministic sign (first appreciably nonzero component positive).
// Clustered eigenvalues are re-orthogonalized against earlier vectors.
struct TriEigPair {
    double value;
    std::vector<double> vector;
};
std::vector<TriEigPair> eig_smallest(const SymTridiag& T, int k,
                                     const EigOptions& opts = {});

// Deterministic sign convention used for all eigenvectors.
void fix_sign(std::vector<double>& v);

} // namespace nlsbif
