#include "nlsbif/field.hpp"

#include <algorithm>
#include <limits>

namespace nlsbif {

Field::Field(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), v_(std::move(values)) {
    require(grid_ && static_cast<int>(v_.size()) == grid_->npoints(),
            ErrorKind::structural, "field length must equal grid npoints");
}

void Field::check_same_grid(const Field& g) const {
    require(grid_ && g.grid_ && grid_->same_as(*g.grid_),
            ErrorKind::structural, "fields live on different grids");
}

Field& Field::operator+=(const Field& g) {
    check_same_grid(g);
    for (size_t i = 0; i < v_.size(); ++i) v_[i] += g.v_[i];
    return *this;
}

Field& Field::operator-=(const Field& g) {
    check_same_grid(g);
    for (size_t i = 0; i < v_.size(); ++i) v_[i] -= g.v_[i];
    return *this;
}

Field& Field::operator*=(double a) {
    for (double& x : v_) x *= a;
    return *this;
}

void axpy(double a, const Field& x, Field& y) {
    y.check_same_grid(x);
    for (int i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

double lp_norm(const Field& f, double q) {
    require(!f.empty(), ErrorKind::structural, "lp_norm of empty field");
    if (std::isinf(q)) {
        double m = 0.0;
        for (double x : f.values()) m = std::max(m, std::abs(x));
        return m;
    }
    require(q >= 1.0, ErrorKind::structural, "lp_norm needs q >= 1");
    const auto& w = f.grid()->qweights();
    double s = 0.0;
    for (size_t i = 0; i < w.size(); ++i)
        s += w[i] * std::pow(std::abs(f[static_cast<int>(i)]), q);
    return std::pow(s, 1.0 / q);
}

double inner(const Field& f, const Field& g) {
    f.check_same_grid(g);
    const auto& w = f.grid()->qweights();
    double s = 0.0;
    for (size_t i = 0; i < w.size(); ++i)
        s += w[i] * f[static_cast<int>(i)] * g[static_cast<int>(i)];
    return s;
}

Field gradient(const Field& f) {
    require(!f.empty(), ErrorKind::structural, "gradient of empty field");
    const auto& g = *f.grid();
    const int n = g.npoints();
    const double h = g.h();
    Field d(f.grid());
    for (int i = 1; i < n - 1; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    if (g.frame() == Frame::radial) {
        d[0] = 0.0; // even reflection at r = 0
    } else {
        d[0] = (f[1] - f[0]) / h;
    }
    d[n - 1] = (f[n - 1] - f[n - 2]) / h;
    return d;
}

double h1_seminorm(const Field& f) {
    return lp_norm(gradient(f), 2.0);
}

} // namespace nlsbif
