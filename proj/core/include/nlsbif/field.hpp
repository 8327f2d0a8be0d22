#pragma once

#include <cmath>
#include <vector>

#include "nlsbif/grid.hpp"

namespace nlsbif {

// Real-valued grid function. Boundary entries stay zero through solves;
// two fields combine arithmetically only on identical grids.
class Field {
  public:
    Field() = default;
    explicit Field(GridPtr grid)
        : grid_(std::move(grid)),
          v_(grid_ ? static_cast<size_t>(grid_->npoints()) : 0, 0.0) {}
    Field(GridPtr grid, std::vector<double> values);

    bool empty() const { return !grid_; }
    const GridPtr& grid() const { return grid_; }
    int size() const { return static_cast<int>(v_.size()); }

    double& operator[](int i) { return v_[static_cast<size_t>(i)]; }
    double operator[](int i) const { return v_[static_cast<size_t>(i)]; }
    const std::vector<double>& values() const { return v_; }
    std::vector<double>& values() { return v_; }

    Field& operator+=(const Field& g);
    Field& operator-=(const Field& g);
    Field& operator*=(double a);

    friend Field operator+(Field f, const Field& g) { return f += g; }
    friend Field operator-(Field f, const Field& g) { return f -= g; }
    friend Field operator*(double a, Field f) { return f *= a; }

    void check_same_grid(const Field& g) const;

  private:
    GridPtr grid_;
    std::vector<double> v_;
};

// L^q norm by trapezoidal quadrature with the grid's measure; q = inf
// (use std::numeric_limits<double>::infinity()) returns max |f|.
double lp_norm(const Field& f, double q);

// L^2 inner product <f, g> with the grid's measure.
double inner(const Field& f, const Field& g);

// Centered first difference (one-sided at the ends, even reflection at r=0).
Field gradient(const Field& f);

// L^2 norm of the centered first difference.
double h1_seminorm(const Field& f);

// axpy: y += a*x on matching grids.
void axpy(double a, const Field& x, Field& y);

} // namespace nlsbif
