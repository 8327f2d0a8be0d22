#include "nlsbif/grid.hpp"

#include <cmath>

namespace nlsbif {

double unit_sphere_area(int n) {
    // 2 pi^(n/2) / Gamma(n/2)
    return 2.0 * std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n);
}

Grid::Grid(Frame frame, int dim, double L, int npoints)
    : frame_(frame), dim_(dim), L_(L), npoints_(npoints) {
    require(npoints >= 8, ErrorKind::structural, "grid needs npoints >= 8");
    require(L > 0.0, ErrorKind::structural, "grid needs L > 0");
    require(dim >= 1, ErrorKind::structural, "grid needs dim >= 1");

    nodes_.resize(static_cast<size_t>(npoints));
    qweights_.resize(static_cast<size_t>(npoints));
    if (frame == Frame::line) {
        h_ = 2.0 * L / (npoints - 1);
        for (int i = 0; i < npoints; ++i)
            nodes_[static_cast<size_t>(i)] = -L + h_ * i;
        dof_begin_ = 1;
        ndof_ = npoints - 2;
        for (int i = 0; i < npoints; ++i) {
            double w = (i == 0 || i == npoints - 1) ? 0.5 * h_ : h_;
            qweights_[static_cast<size_t>(i)] = w;
        }
    } else {
        require(dim <= 4, ErrorKind::structural,
                "radial grids support dimension <= 4");
        h_ = L / (npoints - 1);
        for (int i = 0; i < npoints; ++i)
            nodes_[static_cast<size_t>(i)] = h_ * i;
        // r = 0 is not a DOF; its value follows from even regularity
        dof_begin_ = 1;
        ndof_ = npoints - 2;
        const double cn = unit_sphere_area(dim);
        for (int i = 0; i < npoints; ++i) {
            double w = (i == 0 || i == npoints - 1) ? 0.5 * h_ : h_;
            double r = nodes_[static_cast<size_t>(i)];
            qweights_[static_cast<size_t>(i)] =
                w * cn * ((dim == 1) ? 1.0 : std::pow(r, dim - 1));
        }
    }
}

std::shared_ptr<const Grid> Grid::line(double L, int npoints) {
    return std::make_shared<const Grid>(Frame::line, 1, L, npoints);
}

std::shared_ptr<const Grid> Grid::radial(int dim, double L, int npoints) {
    return std::make_shared<const Grid>(Frame::radial, dim, L, npoints);
}

} // namespace nlsbif
