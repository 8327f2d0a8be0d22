#pragma once

#include "nlsbif/potential.hpp"

namespace nlsbif {

// Stationary problem data: (-Lap + V + E) psi + sigma |psi|^2p psi = 0.
struct ProblemSpec {
    double sigma = -1.0; // < 0 focusing, > 0 defocusing
    double p = 1.0;      // nonlinearity power
    int n = 1;           // spatial dimension
    Frame frame = Frame::line;
    PotentialSpec potential;

    void validate() const {
        require(sigma != 0.0, ErrorKind::structural, "sigma must be nonzero");
        require(p > 0.0, ErrorKind::structural, "p must be positive");
        require(n >= 1, ErrorKind::structural, "dimension must be >= 1");
        if (n >= 3)
            require(p < 2.0 / (n - 2), ErrorKind::structural,
                    "need p < 2/(n-2) for n >= 3");
    }

    // A copy with the potential removed (the translation-invariant limit).
    ProblemSpec without_potential() const {
        ProblemSpec q = *this;
        q.potential = PotentialSpec{};
        q.potential.wells.clear();
        return q;
    }
};

} // namespace nlsbif
