#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <iosfwd>
#include <memory>
#include <string>

namespace ddmpc::solver {

using SparseMatrix = Eigen::SparseMatrix<double>;

/**
 * @brief Linear program
 *
 *   min  c'z
 *   s.t. A_eq z = b_eq,  A_in z <= b_in,  lower <= z <= upper
 *
 * Empty bound vectors mean "unbounded"; individual entries may be +-infinity.
 */
struct LinearProgram {
    Eigen::VectorXd cost;
    SparseMatrix eq_matrix;
    Eigen::VectorXd eq_rhs;
    SparseMatrix ineq_matrix;
    Eigen::VectorXd ineq_rhs;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    explicit LinearProgram(Eigen::Index num_vars = 0);
    Eigen::Index num_vars() const { return cost.size(); }
};

/**
 * @brief Convex quadratic program
 *
 *   min  0.5 z'Hz + f'z
 *   s.t. A_eq z = b_eq,  A_in z <= b_in,  lower <= z <= upper
 *
 * H must be symmetric positive semidefinite.
 */
struct QuadraticProgram {
    SparseMatrix hessian;
    Eigen::VectorXd linear;
    SparseMatrix eq_matrix;
    Eigen::VectorXd eq_rhs;
    SparseMatrix ineq_matrix;
    Eigen::VectorXd ineq_rhs;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    explicit QuadraticProgram(Eigen::Index num_vars = 0);
    explicit QuadraticProgram(const LinearProgram& lp);
    Eigen::Index num_vars() const { return linear.size(); }
};

enum class SolveStatus { optimal, infeasible, unbounded, numerical_failure };

std::string to_string(SolveStatus status);

struct Tolerances {
    double feasibility = 1e-8;
    double optimality = 1e-8;
    int max_iterations = 100;
};

struct SolveReport {
    SolveStatus status = SolveStatus::numerical_failure;
    Eigen::VectorXd primal;
    Eigen::VectorXd eq_dual;
    /// Duals of the inequality rows followed by the finite lower and upper bounds.
    Eigen::VectorXd ineq_dual;
    double objective = 0.0;
    /// max(|A_eq z - b_eq|_inf, max(A_in z - b_in)_+, bound violation)
    double primal_residual = 0.0;
    /// |H z + f + A_eq' y + A_in' w|_inf over the original problem data
    double dual_residual = 0.0;
    /// Complementarity s'w at termination.
    double gap = 0.0;
    int iterations = 0;
    double wall_time = 0.0;
    Tolerances tolerances;
    std::string message;

    bool optimal() const { return status == SolveStatus::optimal; }
};

/// Swappable convex-solver backend.
class Backend {
public:
    virtual ~Backend() = default;
    virtual SolveReport solve_qp(const QuadraticProgram& problem, const Tolerances& tol) const = 0;
    virtual SolveReport solve_lp(const LinearProgram& problem, const Tolerances& tol) const;
    virtual std::string name() const = 0;
};

/**
 * @brief Sparse primal-dual interior point method (Mehrotra predictor-corrector).
 *
 * The reduced KKT system is regularized into a quasi-definite matrix, factorized with a
 * sparse LDL' and polished by iterative refinement against the unregularized system.
 * Infeasibility is detected by Farkas certificates on the iterates and confirmed by a
 * phase-1 problem when the main iteration does not converge.
 */
class InteriorPointBackend final : public Backend {
public:
    SolveReport solve_qp(const QuadraticProgram& problem, const Tolerances& tol) const override;
    std::string name() const override { return "interior-point"; }
};

/// Process-wide default backend (an InteriorPointBackend).
const Backend& default_backend();

SolveReport solve_lp(const LinearProgram& problem, const Tolerances& tol = {},
                     const Backend& backend = default_backend());
SolveReport solve_qp(const QuadraticProgram& problem, const Tolerances& tol = {},
                     const Backend& backend = default_backend());

/// Throws DimensionError when block sizes disagree or H is not symmetric.
void validate(const QuadraticProgram& problem);
void validate(const LinearProgram& problem);

/// Plain-text dump of a problem, for debugging failed solves.
void dump(const QuadraticProgram& problem, std::ostream& os);

/// Moore-Penrose pseudoinverse. Singular values below max(rows, cols) * eps * sigma_max
/// are treated as zero unless an explicit relative threshold is given.
Eigen::MatrixXd pseudoinverse(const Eigen::MatrixXd& matrix, double relative_threshold = -1.0);

/// Induced 1-norm: maximum absolute column sum.
double induced_one_norm(const Eigen::MatrixXd& matrix);

/// Induced infinity-norm: maximum absolute row sum.
double induced_inf_norm(const Eigen::MatrixXd& matrix);

} // namespace ddmpc::solver
