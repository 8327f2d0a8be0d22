#pragma once

#include <string>
#include <vector>

#include "nlsbif/continuation.hpp"
#include "nlsbif/limiting.hpp"

namespace nlsbif {

struct IdentityReport {
    std::string name;
    std::vector<double> E;
    std::vector<double> residuals;
    double max_residual = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// Relative residual of the Pohozaev identity
//   (n-2)||grad psi||^2 + int (nV + x.grad V) psi^2
//     + n sigma/(p+1) ||psi||_{2p+2}^{2p+2} + E n ||psi||^2 = 0
// evaluated in the point's own frame (fourth-order gradient). psi == 0
// returns 0 by convention; tabulated potentials have no derivative.
double pohozaev_residual(const ProblemSpec& prob, const BranchPoint& pt);

IdentityReport stationarity_report(const Branch& branch, double tol);
IdentityReport pohozaev_report(const ProblemSpec& prob, const Branch& branch,
                               double tol);
// dE/dE_param law: dEnergy/dE = -E dN/dE (centered differences on monotone
// segments, split at folds).
IdentityReport energy_mass_relation(const Branch& branch, double tol);
// dQ/dE = (p+1)/(-sigma p) N.
IdentityReport dq_law(const ProblemSpec& prob, const Branch& branch, double tol);

struct ScalingReport {
    double window_lo = 0.0, window_hi = 0.0;
    double slope_N = 0.0, slope_Q = 0.0, slope_grad = 0.0;
    double target_N = 0.0, target_Q = 0.0, target_grad = 0.0;
    double fitted_b = 0.0;    // LS intercept of log Q at the target slope
    double b_prefactor_N = 0.0;    // (-sigma/2)(2p+2-np)/(p+1) * fitted_b
    double b_prefactor_grad = 0.0; // (-sigma/2) np/(p+1) * fitted_b
    double measured_prefactor_N = 0.0;    // N / E^target at window top
    double measured_prefactor_grad = 0.0; // grad2 / E^target at window top
    double r2_logQ = 0.0;
};

ScalingReport scaling_exponents(const ProblemSpec& prob, const Branch& branch,
                                double E_lo, double E_hi);

// u_E(x) = E^{-1/2p} psi_E(E^{-1/2} x) resampled on the target grid.
Field renormalize(const ProblemSpec& prob, const BranchPoint& pt,
                  const GridPtr& target);

struct LimitFitPoint {
    double E = 0.0;
    double remainder_rel = 0.0; // ||v|| / ||template||
    std::vector<double> centers;      // fitted renormalized centers
    std::vector<double> drift_ratios; // centers / sqrt(E)
};

struct LimitReport {
    std::vector<int> template_centers; // indices into the critical point list
    std::vector<int> template_signs;
    std::vector<LimitFitPoint> points;
    bool classified = false;
    bool remainder_decreasing = false;
};

// Fits the tail of the branch (last K points with E >= E_switch) against
// candidate multi-profile templates over subsets of critical points.
LimitReport limit_profile_report(const ProblemSpec& prob, const Branch& branch,
                                 const LimitingProfile& profile,
                                 const std::vector<CriticalPoint>& crits,
                                 const GridPtr& renorm_grid, int K = 5,
                                 double E_switch = 25.0);

// #neg(L+) == m + sum_i n_i for a template-matched large-E point.
bool morse_index_check(const BranchPoint& pt, const ProfileTemplate& t,
                       const std::vector<CriticalPoint>& crits);

enum class Stability { stable, unstable, undetermined };
enum class StabilityBasis { slope_criterion, multi_negative, lminus_indefinite };

struct StabilityLabel {
    Stability stability = Stability::undetermined;
    StabilityBasis basis = StabilityBasis::slope_criterion;
    double dN_dE = 0.0;
};

StabilityLabel stability_label(const Branch& branch, size_t index);

// Tail decay test: fitted slope of log|psi| on [L/2, 3L/4] must be at most
// -sqrt(E - gamma) * (1 - 0.05).
bool decay_check(const Field& psi, double E, double gamma);
bool decay_check(const BranchPoint& pt, double gamma);

// helper: least-squares slope of y against x
double ls_slope(const std::vector<double>& x, const std::vector<double>& y);

} // namespace nlsbif
