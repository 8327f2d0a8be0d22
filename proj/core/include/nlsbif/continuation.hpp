#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "nlsbif/limiting.hpp"
#include "nlsbif/operators.hpp"
#include "nlsbif/potential.hpp"
#include "nlsbif/problem.hpp"

namespace nlsbif {

// Working frame of a branch. The renormalized frame solves
//   -Lap u + E^{-1} V(E^{-1/2} y) u + u + sigma |u|^2p u = 0,
// which keeps large-E solutions O(1)-wide on the grid.
enum class PFrame { physical, renormalized };

struct BranchPoint {
    double E = 0.0;
    Field psi; // native-frame field; may be empty when fields are not recorded
    PFrame frame = PFrame::physical;

    // physical-frame functionals regardless of frame
    double N = 0.0;      // ||psi||_L2^2
    double Q = 0.0;      // ||psi||_{L^{2p+2}}^{2p+2}
    double energy = 0.0; // grad2 + int V psi^2 + sigma/(p+1) Q
    double grad2 = 0.0;  // <(-Lap) psi, psi>
    double intV = 0.0;   // int V psi^2

    Inertia lplus_inertia;
    std::vector<double> lplus_min_eigs; // physical scale
    double lminus_min_eig = 0.0;        // physical scale
    double newton_residual = 0.0;
    double stationarity_res = 0.0; // |grad2 + intV + sigma Q + E N| / (E N + 1)
};

struct BifurcationEvent {
    enum class Kind { fold, simple_crossing, degenerate };
    enum class KernelSym { even, odd, none, na };

    Kind kind = Kind::simple_crossing;
    double E_star = 0.0;
    Field kernel_vector;
    Field psi_star; // solution at the bracket edge, used for branch switching
    Inertia inertia_before, inertia_after;
    KernelSym kernel_symmetry = KernelSym::na;
    double bracket_width = 0.0;
};

enum class SeedKind { from_zero, from_infinity, switched };

struct Branch {
    int id = 0;
    SeedKind seed_kind = SeedKind::from_zero;
    int parent_id = -1;    // switched branches: producing branch and event
    int parent_event = -1;
    PFrame frame = PFrame::physical;
    GridPtr grid;
    std::vector<BranchPoint> points;
    std::vector<BifurcationEvent> events;
    bool stalled = false;
    bool closed_loop = false;
};

struct ContinuationConfig {
    double E_min = 0.05;
    double E_max = 100.0;
    double ds0 = 1e-3;
    double ds_min = 1e-5;
    double ds_max = 1.0;
    double grow = 1.3;
    double tol_newton = 1e-10;
    int max_newton_iter = 50;
    bool enforce_reflection = false; // project Newton iterates on evens
    bool detect_events = true;
    bool record_fields = true;
    bool track_eigs = true;
    int n_eigs = 3;
    double event_bracket_rel = 1e-3;
    size_t max_points = 200000;
    double fold_tangent_threshold = 0.05; // |tau_E| below -> arclength mode
    // called on every accepted point (with psi populated)
    std::function<void(const BranchPoint&)> observer;
};

// F(psi, E) in the requested frame.
Field residual(const ProblemSpec& prob, const Field& psi, double E,
               PFrame frame = PFrame::physical);

// N(U, v) = sigma|U+v|^2p (U+v) - sigma|U|^2p U - sigma(2p+1)|U|^2p v.
Field nonlinear_remainder(const ProblemSpec& prob, const Field& U, const Field& v);

// Frame-aware linearizations (physical frame matches assemble_Lplus/minus).
OperatorMatrix frame_Lplus(const ProblemSpec& prob, const Field& psi, double E,
                           PFrame frame);
OperatorMatrix frame_Lminus(const ProblemSpec& prob, const Field& psi, double E,
                            PFrame frame);
// dF/dE at fixed psi (psi in the physical frame; potential-derivative terms
// in the renormalized frame, requiring a closed-form potential).
Field residual_dE(const ProblemSpec& prob, const Field& psi, double E, PFrame frame);

// Mirror projection psi -> (psi(x) + psi(-x))/2 (line grids, reflection at 0).
Field enforce_symmetry(const Field& psi);

// Damped Newton at fixed E; fills all diagnostics fields.
BranchPoint newton_solve(const ProblemSpec& prob, const Field& guess, double E,
                         double tol, PFrame frame = PFrame::physical,
                         const ContinuationConfig& cfg = {});

struct SeedOptions {
    double a_max = 0.2;
    double tol = 1e-12;
    double E_switch = 25.0;
};

// Bifurcation-from-zero seed: predictor a*psi0 with
// E = E0 - sigma a^2p ||psi0||_{2p+2}^{2p+2}, then a bordered Newton solve
// holding <psi0, psi> = a with E free.
BranchPoint seed_from_zero(const ProblemSpec& prob, const LinearGroundState& lin,
                           double a, const SeedOptions& opts = {},
                           const ContinuationConfig& cfg = {});

// Large-E seed from a multi-profile template, solved in the renormalized frame.
BranchPoint seed_from_infinity(const ProblemSpec& prob, const ProfileTemplate& t,
                               const LimitingProfile& profile, double E,
                               const GridPtr& renorm_grid,
                               const SeedOptions& opts = {},
                               const ContinuationConfig& cfg = {});

// Predictor-corrector continuation from the branch tail in the given
// direction (+1 toward larger E). Appends points and events in place.
void continue_branch(const ProblemSpec& prob, Branch& branch, int direction,
                     const ContinuationConfig& cfg);

// Bisection localization of an inertia change between two accepted points.
BifurcationEvent detect_event(const ProblemSpec& prob, const BranchPoint& a,
                              const BranchPoint& b, const ContinuationConfig& cfg);

// Two pinned seeds psi* +- delta*kernel corrected with E free; returns the
// switched branch continued in both directions.
Branch switch_branch(const ProblemSpec& prob, const BifurcationEvent& event,
                     const Branch& parent, double delta,
                     const ContinuationConfig& cfg);

// Natural-parameter tangent dpsi/dE = -Lplus^{-1} F_E.
Field branch_tangent(const ProblemSpec& prob, const BranchPoint& pt);

// Renormalized <-> physical conversion of a solution field.
Field to_physical(const ProblemSpec& prob, const BranchPoint& pt,
                  const GridPtr& physical_grid);
Field to_renormalized(const ProblemSpec& prob, const BranchPoint& pt,
                      const GridPtr& renorm_grid);

} // namespace nlsbif
