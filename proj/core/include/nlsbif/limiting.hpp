#pragma once

#include <vector>

#include "nlsbif/field.hpp"
#include "nlsbif/potential.hpp"
#include "nlsbif/problem.hpp"

namespace nlsbif {

// The limiting profile u_inf: unique positive radially symmetric solution of
//   -Lap u + u + sigma |u|^2p u = 0   (sigma < 0).
struct LimitingProfile {
    ProblemSpec problem; // potential stripped
    Field u_inf;
    double mass = 0.0;   // ||u_inf||_L2^2
    double q_norm = 0.0; // ||u_inf||_{L^{2p+2}}^{2p+2}
    double residual = 0.0;
};

LimitingProfile solve_uinfinity(const ProblemSpec& prob, const GridPtr& grid);

// U_E(x) = E^{1/2p} u_inf(sqrt(E) x) resampled on the target grid; refuses
// when h_target * sqrt(E) > 0.25 (width 1/sqrt(E) unresolved).
Field scale_profile(const LimitingProfile& profile, double E,
                    const GridPtr& target);

// Multi-profile ansatz sum_i mu_i u_inf(. - x_i sqrt(E)).
struct ProfileTemplate {
    std::vector<double> centers; // physical-frame critical point locations
    std::vector<int> signs;      // mu_i in {+1, -1}
    double E = 1.0;
    bool renormalized_frame = true;
};

struct TemplateField {
    Field field;
    bool separation_warning = false; // min sqrt(E)|x_i - x_j| <= 6
};

TemplateField build_template(const ProfileTemplate& t,
                             const LimitingProfile& profile,
                             const GridPtr& grid);

// Cubic (Catmull-Rom) interpolation of a field at an off-grid coordinate;
// zero outside the grid. Exact at the nodes.
double interp_field(const Field& f, double x);
Field shift_field(const Field& f, double s); // T_s f = f(. - s)

// Lyapunov-Schmidt shift decomposition
//   u = psi + sum_j T_{y_j + s_j} u_j + sum_i a_i phi_i + v,
//   <v, T_{y_j+s_j} du_j> = 0,  <v, phi_i> = 0.
struct ProfileFit {
    std::vector<double> shifts;     // s_j
    std::vector<double> amplitudes; // a_i (empty when no kernel modes)
    Field remainder;                // v
    double remainder_norm = 0.0;    // ||v||_L2
    double orth_residual = 0.0;     // max orthogonality defect
    int iterations = 0;
};

struct FitOptions {
    double tol = 1e-12;
    int max_iter = 40;
    double closeness_factor = 0.3; // epsilon = factor * min_j ||u_j||
    double min_separation = 6.0;
    bool check_preconditions = true;
};

ProfileFit profile_fit(const Field& u, const std::vector<Field>& profiles,
                       const std::vector<double>& center_guesses,
                       const std::vector<Field>& kernel_modes,
                       const Field& base_psi, const FitOptions& opts = {});

// sup over interior nodes of |u_inf' / u_inf| (bounded; ~1 for the 1D soliton).
double log_derivative_ratio(const LimitingProfile& profile);

} // namespace nlsbif
