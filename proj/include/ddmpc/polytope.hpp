#pragma once

#include <Eigen/Dense>

#include <vector>

namespace ddmpc {

/// Vertices of the box-subspace polytope {w = basis * theta : |w|_inf <= bound}.
struct PolytopeVertexSet {
    Eigen::Index ambient_dim = 0;
    Eigen::MatrixXd basis;
    double bound = 0.0;
    std::vector<Eigen::VectorXd> vertices;
};

/**
 * Enumerates all vertices by solving every r-subset of active facet equations
 * (row i of w at +bound or -bound) in theta-coordinates, keeping the feasible
 * solutions and removing duplicates.
 *
 * Requires r <= d and r <= 12; throws DimensionError if the guard is exceeded and
 * EstimationError if the basis is rank deficient.
 */
PolytopeVertexSet enumerate_box_subspace_vertices(const Eigen::MatrixXd& basis, double bound);

} // namespace ddmpc
