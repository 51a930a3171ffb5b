#pragma once

#include "ddmpc/hankel.hpp"
#include "ddmpc/lti_plant.hpp"
#include "ddmpc/polytope.hpp"
#include "ddmpc/solver.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace ddmpc {

enum class Provenance { data_driven, model_oracle, closed_form, from_file };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

/**
 * @brief Constants consumed by the constraint tightening
 *
 * rho holds rho_k for k in [n, L+n-1], so rho[0] is rho_n.
 */
struct SystemConstants {
    Eigen::Index order = 0;
    Eigen::Index horizon = 0;
    double gamma = 0.0;
    std::vector<double> rho;
    double rho_n_max = 0.0;
    double rho_L_max = 0.0;
    double c_pe = 0.0;
    double xi_max = 0.0;

    Provenance gamma_source = Provenance::data_driven;
    Provenance rho_source = Provenance::data_driven;
    Provenance c_pe_source = Provenance::data_driven;
    Provenance xi_max_source = Provenance::closed_form;

    /// rho_k for k in [n, L+n-1]; throws DimensionError otherwise.
    double rho_at(Eigen::Index k) const;

    /// Builds the record and the two maxima; throws on negative/non-finite input
    /// or a rho array that does not cover [n, L+n-1].
    static SystemConstants make(Eigen::Index order, Eigen::Index horizon, double gamma,
                                std::vector<double> rho, double c_pe, double xi_max);
};

struct GammaEstimate {
    double value = 0.0;
    PolytopeVertexSet vertices;
    std::vector<double> vertex_costs;
    /// Initial windows (u_{[-n,-1]}, y_{[-n,-1]}) reconstructed for each vertex.
    std::vector<Trajectory> initial_windows;
};

/**
 * Controllability constant from noise-free data. The outer maximization runs over the
 * vertices of {y_{[0,n-1]} free response} cap [-1,1]^{np}; for each vertex an initial
 * window is reconstructed from depth-2n data and the inner l1 steering LP is solved over
 * depth-3n trajectories. Throws EstimationError if an inner LP fails.
 */
GammaEstimate estimate_gamma(const Eigen::MatrixXd& u_data, const Eigen::MatrixXd& y_data,
                             Eigen::Index n,
                             const solver::Backend& backend = solver::default_backend());
GammaEstimate estimate_gamma(const DataRecord& data, Eigen::Index n,
                             const solver::Backend& backend = solver::default_backend());

/// Minimum-l1 input over [0,n-1] that, appended to the given initial window, brings
/// the trajectory to (0, 0) on [n, 2n-1]. Uses depth-3n data. Returns the optimal input.
Eigen::MatrixXd steering_input(const Eigen::MatrixXd& u_data, const Eigen::MatrixXd& y_data,
                               Eigen::Index n, const Trajectory& initial_window,
                               const solver::Backend& backend = solver::default_backend());

/**
 * Observability constant rho_k from noise-free data: 2p LPs, one per output component
 * and sign, maximizing s * y_{k,i} over zero-input trajectories of length k+1 with
 * |y_{[0,n-1]}|_inf <= 1. Throws EstimationError when an LP is not solved to optimality.
 */
double estimate_rho(const Eigen::MatrixXd& u_data, const Eigen::MatrixXd& y_data, Eigen::Index n,
                    Eigen::Index k, const solver::Backend& backend = solver::default_backend());
double estimate_rho(const DataRecord& data, Eigen::Index n, Eigen::Index k,
                    const solver::Backend& backend = solver::default_backend());

/// rho_k for k in [n, L+n-1].
std::vector<double> estimate_rho_range(const DataRecord& data, Eigen::Index n, Eigen::Index horizon,
                                       const solver::Backend& backend = solver::default_backend());

/// |H_{u xi}^+|_1 for the chosen view.
double compute_cpe(const DataRecord& data, DataView view, Eigen::Index horizon);

/// max over U^n x Y^n of |xi|_1 for a box U and Y = {|y|_inf <= y_max}.
double compute_xi_max(const Eigen::VectorXd& u_lower, const Eigen::VectorXd& u_upper,
                      double y_max, Eigen::Index output_dim, Eigen::Index n);

/// All constants from data: Gamma and rho from the clean view, c_pe from `cpe_view`.
SystemConstants estimate_constants(const DataRecord& data, Eigen::Index n, Eigen::Index horizon,
                                   const Eigen::VectorXd& u_lower, const Eigen::VectorXd& u_upper,
                                   double y_max, DataView cpe_view,
                                   const solver::Backend& backend = solver::default_backend());

/// Gamma and rho from the model oracles; c_pe from data and xi_max in closed form.
SystemConstants oracle_constants(const StateSpaceModel& model, const DataRecord& data,
                                 Eigen::Index horizon, const Eigen::VectorXd& u_lower,
                                 const Eigen::VectorXd& u_upper, double y_max, DataView cpe_view,
                                 const solver::Backend& backend = solver::default_backend());

} // namespace ddmpc
