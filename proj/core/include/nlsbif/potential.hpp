#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nlsbif/field.hpp"
#include "nlsbif/grid.hpp"

namespace nlsbif {

// External potential V satisfying (H1)-(H2): bounded, vanishing at infinity.
// Closed-form families carry exact first derivatives.
struct PotentialSpec {
    enum class Family { poschl_teller, gaussian, tabulated };

    struct Well {
        double depth = 1.0;  // > 0, the well attracts with -depth at center
        double center = 0.0;
        double width = 1.0;  // gaussian only
    };

    Family family = Family::poschl_teller;
    std::vector<Well> wells;
    // reflection symmetry hint (line frame, x -> 2c - x); c must be 0 for
    // the mirror projection to act on the symmetric grid
    std::optional<double> reflection_center;
    // tabulated samples
    std::vector<double> tab_x, tab_v;

    bool has_closed_form() const { return family != Family::tabulated; }
    double value(double x) const;
    double deriv(double x) const;         // throws for tabulated
    double second_deriv(double x) const;  // centered difference of deriv()
};

Field evaluate(const PotentialSpec& spec, const GridPtr& grid);

struct CriticalPoint {
    enum class Kind { minimum, maximum, saddle, degenerate };
    double location = 0.0;
    Kind kind = Kind::minimum;
    std::vector<double> hessian_eigs;
    int n_negative = 0; // negative Hessian eigenvalues (the n_i count)
};

// Interior sign changes of V' refined by bisection; closed-form families only.
std::vector<CriticalPoint> critical_points(const PotentialSpec& spec,
                                           const GridPtr& grid);

struct LinearGroundState {
    double E0 = 0.0; // -E0 is the lowest eigenvalue of -Lap + V, E0 > 0
    Field psi0;      // positive, L2-normalized
};

// Smallest eigenpair of -Lap + V; throws Error(solver, "H3 violated") when
// the lowest eigenvalue is nonnegative.
LinearGroundState linear_ground_state(const PotentialSpec& spec,
                                      const GridPtr& grid);

} // namespace nlsbif
