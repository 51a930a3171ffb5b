#include "ddmpc/polytope.hpp"

#include "ddmpc/error.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <string>

namespace ddmpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

PolytopeVertexSet enumerate_box_subspace_vertices(const MatrixXd& basis, double bound)
{
    const Index d = basis.rows(), r = basis.cols();
    if (r < 1 || r > d || r > 12)
        throw DimensionError("vertex enumeration needs 1 <= r <= min(d, 12), got r = " +
                             std::to_string(r) + ", d = " + std::to_string(d));
    if (!(bound > 0.0))
        throw DimensionError("vertex enumeration needs a positive bound");
    Eigen::JacobiSVD<MatrixXd> svd(basis);
    const auto& sv = svd.singularValues();
    if (sv(r - 1) <= 1e-10 * sv(0))
        throw EstimationError("vertex enumeration: basis is rank deficient");

    PolytopeVertexSet out;
    out.ambient_dim = d;
    out.basis = basis;
    out.bound = bound;

    const double box_tol = 1e-9 * std::max(1.0, bound);
    const double dup_tol = 1e-7 * std::max(1.0, bound);

    std::vector<Index> rows(r);
    for (Index i = 0; i < r; ++i)
        rows[i] = i;
    MatrixXd sub(r, r);
    while (true) {
        for (Index i = 0; i < r; ++i)
            sub.row(i) = basis.row(rows[i]);
        Eigen::FullPivLU<MatrixXd> lu(sub);
        lu.setThreshold(1e-10);
        if (lu.isInvertible()) {
            for (Index mask = 0; mask < (Index{1} << r); ++mask) {
                VectorXd rhs(r);
                for (Index i = 0; i < r; ++i)
                    rhs(i) = (mask >> i) & 1 ? -bound : bound;
                const VectorXd w = basis * lu.solve(rhs);
                if (w.lpNorm<Eigen::Infinity>() > bound + box_tol)
                    continue;
                bool duplicate = false;
                for (const VectorXd& v : out.vertices)
                    if ((v - w).lpNorm<Eigen::Infinity>() <= dup_tol) {
                        duplicate = true;
                        break;
                    }
                if (!duplicate)
                    out.vertices.push_back(w);
            }
        }
        // next combination of r rows out of d
        Index i = r - 1;
        while (i >= 0 && rows[i] == d - r + i)
            --i;
        if (i < 0)
            break;
        ++rows[i];
        for (Index j = i + 1; j < r; ++j)
            rows[j] = rows[j - 1] + 1;
    }
    return out;
}

} // namespace ddmpc
