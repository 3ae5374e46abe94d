#include "vbip/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace vbip {

Grid1D Grid1D::make(int n_nodes, double a, double b) {
    if (n_nodes < 3) throw std::invalid_argument("Grid1D: n_nodes must be >= 3");
    if (!(b > a)) throw std::invalid_argument("Grid1D: requires b > a");
    return Grid1D{n_nodes, a, b};
}

Eigen::VectorXd Grid1D::nodes() const {
    return Eigen::VectorXd::LinSpaced(n_nodes, a, b);
}

bool Grid1D::same_interval(const Grid1D& other, double tol) const {
    return std::abs(a - other.a) <= tol && std::abs(b - other.b) <= tol;
}

double grid_dot(const Grid1D& grid, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    if (u.size() != grid.n_nodes || v.size() != grid.n_nodes)
        throw std::invalid_argument("grid_dot: vector length does not match grid");
    return grid.spacing() * u.dot(v);
}

double grid_norm(const Grid1D& grid, const Eigen::VectorXd& u) {
    return std::sqrt(grid_dot(grid, u, u));
}

Eigen::VectorXd project_between_grids(const Eigen::VectorXd& u, const Grid1D& from,
                                      const Grid1D& to) {
    if (u.size() != from.n_nodes)
        throw std::invalid_argument("project_between_grids: vector length does not match grid");
    if (!from.same_interval(to, 1e-10 * (from.b - from.a)))
        throw std::invalid_argument("project_between_grids: grids cover different intervals");

    const double h_from = from.spacing();
    Eigen::VectorXd out(to.n_nodes);
    for (int i = 0; i < to.n_nodes; ++i) {
        const double x = to.node(i);
        double s = (x - from.a) / h_from;
        int j = static_cast<int>(std::floor(s));
        if (j < 0) j = 0;
        if (j > from.n_nodes - 2) j = from.n_nodes - 2;
        const double t = s - j;
        out[i] = (1.0 - t) * u[j] + t * u[j + 1];
    }
    return out;
}

} // namespace vbip
