#pragma once

#include <memory>
#include <vector>

#include "nlsbif/errors.hpp"

namespace nlsbif {

enum class Frame {
    line,   // 1D interval [-L, L], Dirichlet at both ends
    radial, // radially symmetric reduction on [0, L], Dirichlet at r = L
};

// Uniform grid with homogeneous Dirichlet boundary. Interior nodes are the
// degrees of freedom; on radial grids the r = 0 value is not a DOF, it is
// reconstructed from even regularity (v'(0) = 0) by quadratic extrapolation.
class Grid {
  public:
    static std::shared_ptr<const Grid> line(double L, int npoints);
    static std::shared_ptr<const Grid> radial(int dim, double L, int npoints);

    Frame frame() const { return frame_; }
    double L() const { return L_; }
    int npoints() const { return npoints_; }
    int dim() const { return dim_; }
    double h() const { return h_; }

    const std::vector<double>& nodes() const { return nodes_; }
    double node(int i) const { return nodes_[static_cast<size_t>(i)]; }

    // Trapezoidal quadrature weights including the surface measure
    // c_n r^{n-1} on radial grids.
    const std::vector<double>& qweights() const { return qweights_; }

    // Degrees of freedom: node indices [dof_begin, dof_begin + ndof).
    int ndof() const { return ndof_; }
    int dof_begin() const { return dof_begin_; }

    bool same_as(const Grid& other) const {
        return frame_ == other.frame_ && L_ == other.L_ &&
               npoints_ == other.npoints_ && dim_ == other.dim_;
    }

    Grid(Frame frame, int dim, double L, int npoints);

  private:
    Frame frame_;
    int dim_;
    double L_;
    int npoints_;
    double h_;
    int ndof_;
    int dof_begin_;
    std::vector<double> nodes_;
    std::vector<double> qweights_;
};

using GridPtr = std::shared_ptr<const Grid>;

// Surface area of the unit sphere in R^n (c_1 = 2, c_2 = 2*pi, c_3 = 4*pi).
double unit_sphere_area(int n);

} // namespace nlsbif
