#pragma once

#include "ddmpc/constants.hpp"
#include "ddmpc/experiment.hpp"
#include "ddmpc/hankel.hpp"
#include "ddmpc/mpc.hpp"
#include "ddmpc/tightening.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace ddmpc::io {

using json = nlohmann::json;

json to_json(const SystemConstants& c);
SystemConstants constants_from_json(const json& j);

json to_json(const TighteningCoefficients& c);

/// {"num": [...], "den": [...]} or {"A": [[...]], "B": ..., "C": ..., "D": ...}
PlantSpec plant_from_json(const json& j);
json to_json(const PlantSpec& p);

json to_json(const ExperimentConfig& c);
/// Missing keys keep the example defaults.
ExperimentConfig experiment_from_json(const json& j);

/// {t, J, norms: {u1, alpha1, sigma_inf}, eq4e_ok, active_tightened_rows}
json solve_log_entry(const SolveRecord& r);

json read_json(const std::filesystem::path& path);
void write_json(const json& j, const std::filesystem::path& path);

/// Header k,u_1..u_m,y_1..y_p,ytilde_1..ytilde_p (k starts at -n) plus a JSON sidecar
/// next to it (same stem, .json extension) with {eps_bar, seed, N, n}.
void write_data_csv(const DataRecord& data, const std::filesystem::path& path);
DataRecord read_data_csv(const std::filesystem::path& path);

/// Columns k,rho_k.
void write_constants_csv(const SystemConstants& c, const std::filesystem::path& path);
/// Columns k,a1,a2,a3,a4.
void write_coefficients_csv(const TighteningCoefficients& c, const std::filesystem::path& path);
/// Columns t,u,y,ytilde,feasible (SISO) or t,u_1..,y_1..,ytilde_1..,feasible.
void write_closed_loop_csv(const ClosedLoopLog& log, const std::filesystem::path& path);
/// One row per solve.
void write_solves_csv(const ClosedLoopLog& log, const std::filesystem::path& path);

/// Closed-loop input with the input bounds drawn as horizontal lines.
void write_input_svg(const ClosedLoopLog& log, double u_min, double u_max,
                     const std::filesystem::path& path);
/// Closed-loop output, open-loop predictions at selected solves and lines at +-y_max.
void write_output_svg(const ClosedLoopLog& log, double y_max, Eigen::Index order,
                      const std::filesystem::path& path, int prediction_stride = 4);

/// Fixed-format number for bit-stable CSV output (17 significant digits).
std::string format_number(double v);

} // namespace ddmpc::io
