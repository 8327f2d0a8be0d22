#pragma once

#include <optional>
#include <vector>

#include "nlsbif/field.hpp"
#include "nlsbif/problem.hpp"
#include "nlsbif/tridiag.hpp"

namespace nlsbif {

enum class OpLabel { H0, Lplus, Lminus, custom };

// Symmetric banded (bandwidth 1) discretization of a Schroedinger-type
// operator acting on the grid's DOFs. On radial grids the matrix is stored
// in the similarity-symmetrized variable; apply/solve map back and forth,
// the spectrum is unchanged.
class OperatorMatrix {
  public:
    OperatorMatrix(GridPtr grid, SymTridiag m, OpLabel label,
                   std::optional<double> ess_edge = std::nullopt,
                   std::vector<double> sqrtm = {});

    const GridPtr& grid() const { return grid_; }
    const SymTridiag& matrix() const { return m_; }
    SymTridiag& matrix() { return m_; }
    OpLabel label() const { return label_; }
    // Proxy location of the essential spectrum edge ([E, inf) for L+-).
    std::optional<double> ess_edge() const { return ess_edge_; }

    Field apply(const Field& f) const;
    Field solve(const Field& rhs) const; // Dirichlet solve, pivoted LU
    // Add a to the matrix diagonal at every DOF whose node value is v[i]
    // (i.e. the operator plus the multiplication operator by a*w).
    void add_diagonal(const Field& w, double a);
    void add_scalar(double a);

    // maps between the physical field and DOF vectors (symmetrized variable)
    std::vector<double> to_dof(const Field& f) const;
    Field from_dof(const std::vector<double>& x) const;
    // similarity weights sqrt(m_i) per DOF; empty on line grids
    const std::vector<double>& sqrtm() const { return sqrtm_; }

  private:
    GridPtr grid_;
    SymTridiag m_;
    OpLabel label_;
    std::optional<double> ess_edge_;
    std::vector<double> sqrtm_; // empty on line grids
};

// -Lap with Dirichlet boundary; radial frame uses the self-adjoint
// symmetrized form of -v'' - (n-1)/r v' with the regularity stencil at r=0.
OperatorMatrix laplacian_matrix(const GridPtr& grid);

OperatorMatrix assemble_H0(const ProblemSpec& prob, const GridPtr& grid);
// L+ = -Lap + V + E + (2p+1) sigma |psi|^2p
OperatorMatrix assemble_Lplus(const ProblemSpec& prob, const Field& psi, double E);
// L- = -Lap + V + E + sigma |psi|^2p
OperatorMatrix assemble_Lminus(const ProblemSpec& prob, const Field& psi, double E);

struct Inertia {
    int n_neg = 0;
    int n_zero = 0;
    int n_pos = 0;
    double tol_zero = 0.0;
};

double default_tol_zero(double E);

// Exact eigenvalue counts of (op - shift I) split at +-tol_zero.
Inertia inertia(const OperatorMatrix& op, double shift, double tol_zero);
Inertia inertia(const OperatorMatrix& op, double shift = 0.0);

struct EigPair {
    double value = 0.0;
    Field vec;              // physical-frame eigenvector, L2-normalized
    bool continuum = false; // in the discretized essential-spectrum cluster
};

// k algebraically smallest eigenpairs (k <= 10), deterministic signs.
std::vector<EigPair> smallest_eigs(const OperatorMatrix& op, int k);

// Solves the bordered system [op, C; C^T, 0][v; lam] = [rhs; 0], returning v
// with <v, c_i> = 0 for all constraints. Works when op is singular on the
// constrained directions; throws "projected operator singular" otherwise.
Field projected_solve(const OperatorMatrix& op, const Field& rhs,
                      const std::vector<Field>& constraints);

} // namespace nlsbif
