#pragma once

#include "ddmpc/trajectory.hpp"

#include <Eigen/Dense>

#include <cstdint>

namespace ddmpc {

/// Block Hankel matrix of depth L built from a q x N signal; entries are (qL) x (N-L+1)
/// and block (i, j) is sample i + j.
struct HankelMatrix {
    Eigen::Index depth = 0;
    Eigen::Index signal_dim = 0;
    Eigen::Index source_length = 0;
    Eigen::MatrixXd entries;
};

/// Throws DimensionError if N < L or L < 1.
HankelMatrix hankel(const Eigen::MatrixXd& signal, Eigen::Index depth);

struct PeReport {
    Eigen::Index rank = 0;
    Eigen::Index required = 0;
    bool persistently_exciting = false;
    /// Smallest singular value counted in the rank (0 when the rank is 0).
    double smallest_retained_singular_value = 0.0;
};

/// Numerical rank of H_L(u) with threshold max(mL, N-L+1) * eps * sigma_max.
PeReport is_persistently_exciting(const Eigen::MatrixXd& u, Eigen::Index order);

enum class DataView { clean, noisy };

/**
 * @brief Offline excitation experiment
 *
 * Holds N + n samples. The first n samples are the prefix used only to build
 * extended states for the first n data points; sample index 0 of the accessors
 * below is the first sample after the prefix.
 */
class DataRecord {
public:
    DataRecord(Eigen::MatrixXd u, Eigen::MatrixXd y, Eigen::MatrixXd y_noisy, Eigen::Index prefix,
               double noise_bound, std::uint64_t seed);

    Eigen::Index length() const { return u_.cols() - prefix_; }
    Eigen::Index prefix() const { return prefix_; }
    Eigen::Index input_dim() const { return u_.rows(); }
    Eigen::Index output_dim() const { return y_.rows(); }
    double noise_bound() const { return noise_bound_; }
    std::uint64_t seed() const { return seed_; }

    /// Samples 0..N-1 (prefix excluded).
    Eigen::MatrixXd inputs() const { return u_.rightCols(length()); }
    Eigen::MatrixXd outputs(DataView view) const;

    /// All N + n samples, prefix first.
    const Eigen::MatrixXd& all_inputs() const { return u_; }
    const Eigen::MatrixXd& all_outputs(DataView view) const
    {
        return view == DataView::clean ? y_ : y_noisy_;
    }

    Eigen::VectorXd input(Eigen::Index k) const { return u_.col(k + prefix_); }
    Eigen::VectorXd output(Eigen::Index k, DataView view) const
    {
        return all_outputs(view).col(k + prefix_);
    }

private:
    Eigen::MatrixXd u_;
    Eigen::MatrixXd y_;
    Eigen::MatrixXd y_noisy_;
    Eigen::Index prefix_;
    double noise_bound_;
    std::uint64_t seed_;
};

/// (H_L(u^d) alpha, H_L(y^d) alpha) for the selected view.
Trajectory trajectory_from_alpha(const DataRecord& data, DataView view, Eigen::Index depth,
                                 const Eigen::VectorXd& alpha);

struct MembershipResult {
    double residual = 0.0;
    Eigen::VectorXd alpha;
};

/// Minimum-norm least-squares alpha for [H_L(u); H_L(y)] alpha = [u; y] and the
/// infinity-norm of the remaining residual. L is the candidate length.
MembershipResult membership_residual(const Eigen::MatrixXd& u_data, const Eigen::MatrixXd& y_data,
                                     const Trajectory& candidate);
MembershipResult membership_residual(const DataRecord& data, const Trajectory& candidate);

/**
 * Orthonormal basis (pW x r) of {y : (0, y) is a length-W trajectory}, i.e. the image of
 * H_W(y) restricted to the kernel of H_W(u). For an observable system with W >= n and
 * data persistently exciting of order W + n, r = n.
 *
 * Singular values below relative_tol * sigma_max are discarded.
 */
Eigen::MatrixXd zero_input_output_basis(const Eigen::MatrixXd& u_data,
                                        const Eigen::MatrixXd& y_data, Eigen::Index window,
                                        double relative_tol = 1e-8);
Eigen::MatrixXd zero_input_output_basis(const DataRecord& data, Eigen::Index window,
                                        double relative_tol = 1e-8);

/// Orthonormal basis of the column space of [H_W(u); H_W(y)]: all length-W trajectories.
Eigen::MatrixXd trajectory_space_basis(const Eigen::MatrixXd& u_data,
                                       const Eigen::MatrixXd& y_data, Eigen::Index window,
                                       double relative_tol = 1e-8);

/// Extended state [u_{[t-n,t-1]}; y_{[t-n,t-1]}] from m x n and p x n windows.
Eigen::VectorXd extended_state(const Eigen::MatrixXd& past_inputs,
                               const Eigen::MatrixXd& past_outputs);

/// Columns xi_k for k = 0..N-L-n, using prefix samples for k < n.
Eigen::MatrixXd extended_state_sequence(const DataRecord& data, DataView view,
                                        Eigen::Index horizon);

/// [H_{L+n}(u^d); H_1(xi^d_{[0,N-L-n]})]
Eigen::MatrixXd build_h_uxi(const DataRecord& data, DataView view, Eigen::Index horizon);

} // namespace ddmpc
