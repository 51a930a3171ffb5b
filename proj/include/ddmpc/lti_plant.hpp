#pragma once

#include "ddmpc/solver.hpp"
#include "ddmpc/trajectory.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

namespace ddmpc {

/**
 * @brief Minimal discrete-time LTI realization
 *
 *   x_{k+1} = A x_k + B u_k
 *   y_k     = C x_k + D u_k
 *
 * Construction checks dimensions and minimality (controllability and observability
 * matrices of rank n) and throws ConfigError otherwise.
 */
class StateSpaceModel {
public:
    StateSpaceModel(Eigen::MatrixXd A, Eigen::MatrixXd B, Eigen::MatrixXd C, Eigen::MatrixXd D);

    const Eigen::MatrixXd& A() const { return A_; }
    const Eigen::MatrixXd& B() const { return B_; }
    const Eigen::MatrixXd& C() const { return C_; }
    const Eigen::MatrixXd& D() const { return D_; }

    Eigen::Index order() const { return A_.rows(); }
    Eigen::Index inputs() const { return B_.cols(); }
    Eigen::Index outputs() const { return C_.rows(); }

    /// [C; CA; ...; CA^{blocks-1}], blocks defaults to n.
    Eigen::MatrixXd observability_matrix(Eigen::Index blocks = -1) const;
    /// [B, AB, ..., A^{n-1}B]
    Eigen::MatrixXd controllability_matrix() const;
    /// C (zI - A)^{-1} B + D
    Eigen::MatrixXcd transfer_function(std::complex<double> z) const;
    /// Markov parameter h_0 = D, h_k = C A^{k-1} B.
    Eigen::MatrixXd markov_parameter(Eigen::Index k) const;

private:
    Eigen::MatrixXd A_, B_, C_, D_;
};

enum class NoiseDistribution { uniform, extreme_points };

/// Bounded output noise: every sample satisfies |eps|_inf <= bound.
struct NoiseSpec {
    double bound = 0.0;
    NoiseDistribution distribution = NoiseDistribution::uniform;
    std::uint64_t seed = 0;
};

/// Draws a dim x count matrix of noise samples from a generator seeded with spec.seed.
Eigen::MatrixXd draw_noise(const NoiseSpec& spec, Eigen::Index dim, Eigen::Index count);

/**
 * Controllable canonical realization of a SISO transfer function given by
 * descending-power coefficient lists. Leading denominator coefficient is normalized to 1.
 * Throws ConfigError for a zero leading coefficient, an improper function or common factors.
 */
StateSpaceModel realize_transfer_function(const std::vector<double>& numerator,
                                          const std::vector<double>& denominator);

struct SimulationResult {
    Trajectory trajectory;
    /// Noise-corrupted copy of the outputs, present when noise was requested.
    std::optional<Eigen::MatrixXd> noisy_y;
    /// States x_0 .. x_T (n x (T+1)).
    Eigen::MatrixXd states;
};

/// Exact state-space recursion from x0 under the inputs (m x T).
SimulationResult simulate(const StateSpaceModel& model, const Eigen::VectorXd& x0,
                          const Eigen::MatrixXd& u, const std::optional<NoiseSpec>& noise = {});

/// |C A^k Phi^+|_inf with Phi the n-block observability matrix.
double rho_oracle(const StateSpaceModel& model, Eigen::Index k);

/// Model-based controllability constant: the worst case, over vertices w of
/// {Phi x} cap [-1,1]^{np}, of the least l1-norm n-step input steering x_0 = Phi^+ w to zero.
double gamma_oracle(const StateSpaceModel& model,
                    const solver::Backend& backend = solver::default_backend());

struct EquilibriumCheck {
    bool is_equilibrium = false;
    double residual = 0.0;
};

/// Checks that the constant sequence (u_s, y_s) of length n+1 is a trajectory of the model.
EquilibriumCheck equilibrium_check(const StateSpaceModel& model, const Eigen::VectorXd& u_s,
                                   const Eigen::VectorXd& y_s, double tol = 1e-8);

} // namespace ddmpc
