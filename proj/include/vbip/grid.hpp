#ifndef VBIP_GRID_HPP
#define VBIP_GRID_HPP

#include <Eigen/Core>

namespace vbip {

/// Uniform 1D grid on [a, b] with n_nodes nodes (endpoints included).
struct Grid1D {
    int n_nodes = 0;
    double a = 0.0;
    double b = 1.0;

    static Grid1D make(int n_nodes, double a = 0.0, double b = 1.0);

    double spacing() const { return (b - a) / (n_nodes - 1); }
    double node(int i) const { return a + spacing() * i; }
    Eigen::VectorXd nodes() const;

    bool same_interval(const Grid1D& other, double tol = 1e-12) const;
};

/// Grid inner product <u,v> = h * sum_i u_i v_i.
double grid_dot(const Grid1D& grid, const Eigen::VectorXd& u, const Eigen::VectorXd& v);

/// Grid norm induced by grid_dot.
double grid_norm(const Grid1D& grid, const Eigen::VectorXd& u);

/// Nodal values of `u` (defined on `from`) linearly interpolated onto `to`.
/// Both grids must cover the same interval.
Eigen::VectorXd project_between_grids(const Eigen::VectorXd& u, const Grid1D& from,
                                      const Grid1D& to);

} // namespace vbip

#endif
