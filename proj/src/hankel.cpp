#include "ddmpc/hankel.hpp"

#include "ddmpc/error.hpp"
#include "ddmpc/solver.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ddmpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

/// Left singular vectors with singular value above rel_tol * sigma_max.
MatrixXd range_basis(const MatrixXd& M, double rel_tol)
{
    if (M.size() == 0)
        return MatrixXd(M.rows(), 0);
    Eigen::BDCSVD<MatrixXd> svd(M, Eigen::ComputeThinU);
    const auto& s = svd.singularValues();
    Index r = 0;
    while (r < s.size() && s(r) > rel_tol * s(0))
        ++r;
    return svd.matrixU().leftCols(r);
}

} // namespace

HankelMatrix hankel(const MatrixXd& signal, Index depth)
{
    const Index q = signal.rows(), N = signal.cols();
    if (depth < 1 || N < depth)
        throw DimensionError("hankel: depth " + std::to_string(depth) + " invalid for " +
                             std::to_string(N) + " samples");
    HankelMatrix h{depth, q, N, MatrixXd(q * depth, N - depth + 1)};
    for (Index j = 0; j < N - depth + 1; ++j)
        for (Index i = 0; i < depth; ++i)
            h.entries.block(i * q, j, q, 1) = signal.col(i + j);
    return h;
}

PeReport is_persistently_exciting(const MatrixXd& u, Index order)
{
    PeReport rep;
    rep.required = u.rows() * order;
    if (order < 1 || u.cols() < order)
        return rep;
    const MatrixXd H = hankel(u, order).entries;
    Eigen::BDCSVD<MatrixXd> svd(H);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0)
        return rep;
    const double thr = static_cast<double>(std::max(H.rows(), H.cols())) *
                       std::numeric_limits<double>::epsilon() * s(0);
    for (Index i = 0; i < s.size(); ++i)
        if (s(i) > thr) {
            ++rep.rank;
            rep.smallest_retained_singular_value = s(i);
        }
    rep.persistently_exciting = rep.rank == rep.required;
    return rep;
}

DataRecord::DataRecord(MatrixXd u, MatrixXd y, MatrixXd y_noisy, Index prefix, double noise_bound,
                       std::uint64_t seed)
    : u_(std::move(u)), y_(std::move(y)), y_noisy_(std::move(y_noisy)), prefix_(prefix),
      noise_bound_(noise_bound), seed_(seed)
{
    if (y_.cols() != u_.cols() || y_noisy_.cols() != u_.cols() || y_noisy_.rows() != y_.rows())
        throw DimensionError("data record: input, clean and noisy outputs must have equal length");
    if (u_.rows() < 1 || y_.rows() < 1)
        throw DimensionError("data record: empty signal dimension");
    if (prefix_ < 0 || prefix_ >= u_.cols())
        throw DimensionError("data record: prefix out of range");
    if (!(noise_bound_ >= 0.0))
        throw ConfigError("data record: negative noise bound");
}

MatrixXd DataRecord::outputs(DataView view) const { return all_outputs(view).rightCols(length()); }

Trajectory trajectory_from_alpha(const DataRecord& data, DataView view, Index depth,
                                 const VectorXd& alpha)
{
    const MatrixXd Hu = hankel(data.inputs(), depth).entries;
    const MatrixXd Hy = hankel(data.outputs(view), depth).entries;
    if (alpha.size() != Hu.cols())
        throw DimensionError("trajectory_from_alpha: alpha has " + std::to_string(alpha.size()) +
                             " entries, expected " + std::to_string(Hu.cols()));
    return Trajectory(unstack_samples(Hu * alpha, data.input_dim()),
                      unstack_samples(Hy * alpha, data.output_dim()));
}

MembershipResult membership_residual(const MatrixXd& u_data, const MatrixXd& y_data,
                                     const Trajectory& candidate)
{
    if (candidate.input_dim() != u_data.rows() || candidate.output_dim() != y_data.rows())
        throw DimensionError("membership_residual: candidate dimensions do not match the data");
    const Index L = candidate.length();
    MatrixXd H(L * (u_data.rows() + y_data.rows()), u_data.cols() - L + 1);
    H << hankel(u_data, L).entries, hankel(y_data, L).entries;
    VectorXd w(H.rows());
    w << candidate.stacked_u(), candidate.stacked_y();
    MembershipResult r;
    r.alpha = H.completeOrthogonalDecomposition().solve(w);
    r.residual = (H * r.alpha - w).lpNorm<Eigen::Infinity>();
    return r;
}

MembershipResult membership_residual(const DataRecord& data, const Trajectory& candidate)
{
    return membership_residual(data.inputs(), data.outputs(DataView::clean), candidate);
}

MatrixXd trajectory_space_basis(const MatrixXd& u_data, const MatrixXd& y_data, Index window,
                                double relative_tol)
{
    if (u_data.cols() != y_data.cols())
        throw DimensionError("trajectory_space_basis: input and output lengths differ");
    const Index W = window;
    MatrixXd H(W * (u_data.rows() + y_data.rows()), u_data.cols() - W + 1);
    H << hankel(u_data, W).entries, hankel(y_data, W).entries;
    return range_basis(H, relative_tol);
}

MatrixXd zero_input_output_basis(const MatrixXd& u_data, const MatrixXd& y_data, Index window,
                                 double relative_tol)
{
    const MatrixXd Q = trajectory_space_basis(u_data, y_data, window, relative_tol);
    const Index mu = u_data.rows() * window;
    const MatrixXd Qu = Q.topRows(mu);
    const MatrixXd Qy = Q.bottomRows(Q.rows() - mu);

    // kernel of Qu (Q has orthonormal columns, so the singular values of Qu lie in [0, 1])
    Eigen::JacobiSVD<MatrixXd> svd(Qu, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    Index rank = 0;
    while (rank < s.size() && s(rank) > relative_tol)
        ++rank;
    const MatrixXd kernel = svd.matrixV().rightCols(Q.cols() - rank);
    if (kernel.cols() == 0)
        return MatrixXd(Qy.rows(), 0);
    return range_basis(Qy * kernel, relative_tol);
}

MatrixXd zero_input_output_basis(const DataRecord& data, Index window, double relative_tol)
{
    return zero_input_output_basis(data.inputs(), data.outputs(DataView::clean), window,
                                   relative_tol);
}

VectorXd extended_state(const MatrixXd& past_inputs, const MatrixXd& past_outputs)
{
    if (past_inputs.cols() != past_outputs.cols())
        throw DimensionError("extended_state: input and output windows differ in length");
    VectorXd xi(past_inputs.size() + past_outputs.size());
    xi << stack_samples(past_inputs), stack_samples(past_outputs);
    return xi;
}

MatrixXd extended_state_sequence(const DataRecord& data, DataView view, Index horizon)
{
    const Index n = data.prefix();
    const Index cols = data.length() - horizon - n + 1;
    if (cols < 1)
        throw DimensionError("extended_state_sequence: not enough data for horizon " +
                             std::to_string(horizon));
    const MatrixXd& u = data.all_inputs();
    const MatrixXd& y = data.all_outputs(view);
    MatrixXd xi(n * (data.input_dim() + data.output_dim()), cols);
    for (Index k = 0; k < cols; ++k)
        xi.col(k) = extended_state(u.middleCols(k, n), y.middleCols(k, n));
    return xi;
}

MatrixXd build_h_uxi(const DataRecord& data, DataView view, Index horizon)
{
    const MatrixXd Hu = hankel(data.inputs(), horizon + data.prefix()).entries;
    const MatrixXd xi = extended_state_sequence(data, view, horizon);
    MatrixXd H(Hu.rows() + xi.rows(), Hu.cols());
    H << Hu, xi;
    return H;
}

} // namespace ddmpc
