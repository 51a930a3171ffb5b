#include "ddmpc/io.hpp"

#include "ddmpc/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ddmpc::io {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

json vector_json(const VectorXd& v)
{
    json j = json::array();
    for (Index i = 0; i < v.size(); ++i)
        j.push_back(v(i));
    return j;
}

json matrix_json(const MatrixXd& M)
{
    json j = json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Index k = 0; k < M.cols(); ++k)
            row.push_back(M(i, k));
        j.push_back(row);
    }
    return j;
}

VectorXd vector_from(const json& j, const std::string& what)
{
    if (j.is_number())
        return VectorXd::Constant(1, j.get<double>());
    if (!j.is_array())
        throw ConfigError(what + " must be a number or an array");
    VectorXd v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v(static_cast<Index>(i)) = j[i].get<double>();
    return v;
}

MatrixXd matrix_from(const json& j, const std::string& what)
{
    if (j.is_number())
        return MatrixXd::Constant(1, 1, j.get<double>());
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw ConfigError(what + " must be a nested array of rows");
    const Index rows = static_cast<Index>(j.size()), cols = static_cast<Index>(j[0].size());
    MatrixXd M(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        if (static_cast<Index>(j[i].size()) != cols)
            throw ConfigError(what + " has rows of different length");
        for (Index k = 0; k < cols; ++k)
            M(i, k) = j[i][k].get<double>();
    }
    return M;
}

std::vector<double> doubles_from(const json& j, const std::string& what)
{
    if (!j.is_array())
        throw ConfigError(what + " must be an array");
    return j.get<std::vector<double>>();
}

std::ofstream open_out(const fs::path& path)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os)
        throw Error("cannot write " + path.string());
    return os;
}

fs::path sidecar_path(const fs::path& csv)
{
    fs::path p = csv;
    return p.replace_extension(".json");
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    return out;
}

std::string indexed_header(const std::string& name, Index count, bool force_index)
{
    if (count == 1 && !force_index)
        return name;
    std::string h;
    for (Index i = 0; i < count; ++i)
        h += (i ? "," : "") + name + "_" + std::to_string(i + 1);
    return h;
}

void append_vector(std::ostream& os, const VectorXd& v)
{
    for (Index i = 0; i < v.size(); ++i)
        os << ',' << format_number(v(i));
}

std::string view_name(DataView v) { return v == DataView::clean ? "clean" : "noisy"; }

DataView view_from(const std::string& s)
{
    if (s == "clean")
        return DataView::clean;
    if (s == "noisy")
        return DataView::noisy;
    throw ConfigError("unknown data view '" + s + "'");
}

// ---------------------------------------------------------------- SVG helpers

struct Frame {
    double x0, x1, y0, y1;
    double width = 760, height = 380, left = 60, right = 20, top = 20, bottom = 40;

    double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
    double py(double y) const { return top + (y1 - y) / (y1 - y0) * (height - top - bottom); }
};

void svg_begin(std::ostream& os, const Frame& f, const std::string& title)
{
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\""
       << f.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << f.left << "\" y=\"14\">" << title << "</text>\n";
    os << "<rect x=\"" << f.left << "\" y=\"" << f.top << "\" width=\""
       << f.width - f.left - f.right << "\" height=\"" << f.height - f.top - f.bottom
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double y : {f.y0, 0.5 * (f.y0 + f.y1), f.y1})
        os << "<text x=\"" << f.left - 6 << "\" y=\"" << f.py(y) + 4
           << "\" text-anchor=\"end\">" << y << "</text>\n";
    for (double x : {f.x0, 0.5 * (f.x0 + f.x1), f.x1})
        os << "<text x=\"" << f.px(x) << "\" y=\"" << f.height - f.bottom + 16
           << "\" text-anchor=\"middle\">" << x << "</text>\n";
    os << "<text x=\"" << 0.5 * f.width << "\" y=\"" << f.height - 6
       << "\" text-anchor=\"middle\">t</text>\n";
}

void svg_hline(std::ostream& os, const Frame& f, double y, const std::string& color)
{
    os << "<line x1=\"" << f.px(f.x0) << "\" y1=\"" << f.py(y) << "\" x2=\"" << f.px(f.x1)
       << "\" y2=\"" << f.py(y) << "\" stroke=\"" << color << "\" stroke-dasharray=\"6,4\"/>\n";
}

void svg_polyline(std::ostream& os, const Frame& f, const std::vector<std::pair<double, double>>& pts,
                  const std::string& color, double width)
{
    if (pts.empty())
        return;
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width
       << "\" points=\"";
    for (const auto& [x, y] : pts)
        os << f.px(x) << ',' << f.py(y) << ' ';
    os << "\"/>\n";
}

} // namespace

std::string format_number(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json to_json(const SystemConstants& c)
{
    return json{{"n", c.order},
                {"L", c.horizon},
                {"gamma", c.gamma},
                {"rho", c.rho},
                {"rho_n_max", c.rho_n_max},
                {"rho_L_max", c.rho_L_max},
                {"c_pe", c.c_pe},
                {"xi_max", c.xi_max},
                {"provenance",
                 {{"gamma", to_string(c.gamma_source)},
                  {"rho", to_string(c.rho_source)},
                  {"c_pe", to_string(c.c_pe_source)},
                  {"xi_max", to_string(c.xi_max_source)}}}};
}

SystemConstants constants_from_json(const json& j)
{
    try {
        SystemConstants c = SystemConstants::make(
            j.at("n").get<Index>(), j.at("L").get<Index>(), j.at("gamma").get<double>(),
            j.at("rho").get<std::vector<double>>(), j.at("c_pe").get<double>(),
            j.at("xi_max").get<double>());
        if (j.contains("provenance")) {
            const json& p = j.at("provenance");
            c.gamma_source = provenance_from_string(p.at("gamma").get<std::string>());
            c.rho_source = provenance_from_string(p.at("rho").get<std::string>());
            c.c_pe_source = provenance_from_string(p.at("c_pe").get<std::string>());
            c.xi_max_source = provenance_from_string(p.at("xi_max").get<std::string>());
        } else {
            c.gamma_source = c.rho_source = c.c_pe_source = c.xi_max_source = Provenance::from_file;
        }
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed constants: ") + e.what());
    }
}

json to_json(const TighteningCoefficients& c)
{
    return json{{"a1", c.a1},
                {"a2", c.a2},
                {"a3", c.a3},
                {"a4", c.a4},
                {"inputs",
                 {{"eps_bar", c.noise_bound},
                  {"L", c.horizon},
                  {"n", c.order},
                  {"constants", to_json(c.constants)}}}};
}

PlantSpec plant_from_json(const json& j)
{
    PlantSpec p;
    try {
        if (j.contains("num") || j.contains("den")) {
            p.numerator = doubles_from(j.at("num"), "num");
            p.denominator = doubles_from(j.at("den"), "den");
        } else if (j.contains("A")) {
            p.A = matrix_from(j.at("A"), "A");
            p.B = matrix_from(j.at("B"), "B");
            p.C = matrix_from(j.at("C"), "C");
            if (j.contains("D"))
                p.D = matrix_from(j.at("D"), "D");
        } else {
            throw ConfigError("plant needs {num, den} or {A, B, C, D}");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed plant: ") + e.what());
    }
    return p;
}

json to_json(const PlantSpec& p)
{
    if (p.A) {
        json j{{"A", matrix_json(*p.A)}, {"B", matrix_json(*p.B)}, {"C", matrix_json(*p.C)}};
        if (p.D)
            j["D"] = matrix_json(*p.D);
        return j;
    }
    return json{{"num", p.numerator}, {"den", p.denominator}};
}

json to_json(const ExperimentConfig& c)
{
    json cost;
    if (c.mpc.stage_cost.kind == StageCost::Kind::linear)
        cost = {{"type", "linear"},
                {"c_u", vector_json(c.mpc.stage_cost.input_weights)},
                {"c_y", vector_json(c.mpc.stage_cost.output_weights)}};
    else
        cost = {{"type", "quadratic"},
                {"Q", matrix_json(c.mpc.stage_cost.Q)},
                {"R", matrix_json(c.mpc.stage_cost.R)}};
    json j{{"plant", to_json(c.plant)},
           {"N", c.data_length},
           {"n", c.order},
           {"eps_bar", c.noise_bound},
           {"noise_distribution",
            c.noise_distribution == NoiseDistribution::uniform ? "uniform" : "extreme_points"},
           {"data_seed", c.data_seed},
           {"noise_seed", c.noise_seed},
           {"L", c.mpc.horizon},
           {"lambda_sigma", c.mpc.lambda_sigma},
           {"lambda_alpha", c.mpc.lambda_alpha},
           {"u_min", vector_json(c.mpc.u_lower)},
           {"u_max", vector_json(c.mpc.u_upper)},
           {"y_max", c.mpc.y_max},
           {"u_s", vector_json(c.mpc.u_setpoint)},
           {"y_s", vector_json(c.mpc.y_setpoint)},
           {"stage_cost", cost},
           {"input_norm_window",
            c.mpc.input_norm_window == InputNormWindow::predicted ? "predicted" : "full"},
           {"T", c.closed_loop_length},
           {"constants_source", to_string(c.constants_source)},
           {"constants_file", c.constants_file},
           {"cpe_view", view_name(c.cpe_view)},
           {"on_infeasible",
            c.infeasibility_policy == InfeasibilityPolicy::halt ? "halt" : "hold"}};
    j["lambda_alpha_eps"] = c.alpha_weight_product ? json(*c.alpha_weight_product) : json(nullptr);
    return j;
}

ExperimentConfig experiment_from_json(const json& j)
{
    ExperimentConfig c = example_config();
    try {
        if (j.contains("plant"))
            c.plant = plant_from_json(j.at("plant"));
        if (j.contains("N"))
            c.data_length = j.at("N").get<Index>();
        if (j.contains("n")) {
            c.order = j.at("n").get<Index>();
            c.mpc.order = c.order;
        }
        if (j.contains("eps_bar"))
            c.noise_bound = j.at("eps_bar").get<double>();
        if (j.contains("noise_distribution")) {
            const auto d = j.at("noise_distribution").get<std::string>();
            if (d == "uniform")
                c.noise_distribution = NoiseDistribution::uniform;
            else if (d == "extreme_points")
                c.noise_distribution = NoiseDistribution::extreme_points;
            else
                throw ConfigError("unknown noise distribution '" + d + "'");
        }
        if (j.contains("data_seed"))
            c.data_seed = j.at("data_seed").get<std::uint64_t>();
        if (j.contains("noise_seed"))
            c.noise_seed = j.at("noise_seed").get<std::uint64_t>();
        if (j.contains("L"))
            c.mpc.horizon = j.at("L").get<Index>();
        if (j.contains("lambda_sigma"))
            c.mpc.lambda_sigma = j.at("lambda_sigma").get<double>();
        if (j.contains("lambda_alpha")) {
            c.mpc.lambda_alpha = j.at("lambda_alpha").get<double>();
            c.alpha_weight_product.reset();
        }
        if (j.contains("lambda_alpha_eps")) {
            if (j.at("lambda_alpha_eps").is_null())
                c.alpha_weight_product.reset();
            else
                c.alpha_weight_product = j.at("lambda_alpha_eps").get<double>();
        }
        if (j.contains("u_min"))
            c.mpc.u_lower = vector_from(j.at("u_min"), "u_min");
        if (j.contains("u_max"))
            c.mpc.u_upper = vector_from(j.at("u_max"), "u_max");
        if (j.contains("y_max"))
            c.mpc.y_max = j.at("y_max").get<double>();
        if (j.contains("u_s"))
            c.mpc.u_setpoint = vector_from(j.at("u_s"), "u_s");
        if (j.contains("y_s"))
            c.mpc.y_setpoint = vector_from(j.at("y_s"), "y_s");
        if (j.contains("stage_cost")) {
            const json& s = j.at("stage_cost");
            const auto type = s.at("type").get<std::string>();
            if (type == "linear")
                c.mpc.stage_cost = StageCost::linear(vector_from(s.at("c_u"), "c_u"),
                                                     vector_from(s.at("c_y"), "c_y"));
            else if (type == "quadratic")
                c.mpc.stage_cost =
                    StageCost::quadratic(matrix_from(s.at("Q"), "Q"), matrix_from(s.at("R"), "R"));
            else
                throw ConfigError("unknown stage cost type '" + type + "'");
        }
        if (j.contains("input_norm_window")) {
            const auto w = j.at("input_norm_window").get<std::string>();
            if (w == "predicted")
                c.mpc.input_norm_window = InputNormWindow::predicted;
            else if (w == "full")
                c.mpc.input_norm_window = InputNormWindow::full;
            else
                throw ConfigError("unknown input norm window '" + w + "'");
        }
        if (j.contains("T"))
            c.closed_loop_length = j.at("T").get<Index>();
        if (j.contains("constants_source"))
            c.constants_source =
                constants_source_from_string(j.at("constants_source").get<std::string>());
        if (j.contains("constants_file"))
            c.constants_file = j.at("constants_file").get<std::string>();
        if (j.contains("cpe_view"))
            c.cpe_view = view_from(j.at("cpe_view").get<std::string>());
        if (j.contains("on_infeasible")) {
            const auto p = j.at("on_infeasible").get<std::string>();
            if (p == "halt")
                c.infeasibility_policy = InfeasibilityPolicy::halt;
            else if (p == "hold")
                c.infeasibility_policy = InfeasibilityPolicy::hold_last_input;
            else
                throw ConfigError("unknown infeasibility policy '" + p + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed experiment config: ") + e.what());
    }
    return c;
}

json solve_log_entry(const SolveRecord& r)
{
    return json{{"t", r.t},
                {"status", solver::to_string(r.status)},
                {"J", r.cost},
                {"norms", {{"u1", r.u_one}, {"alpha1", r.alpha_one}, {"sigma_inf", r.sigma_inf}}},
                {"eq4e_ok", r.sigma_bound_ok},
                {"active_tightened_rows", r.active_tightened_rows},
                {"prediction_bound_ratio", r.bound_max_ratio}};
}

json read_json(const fs::path& path)
{
    std::ifstream is(path);
    if (!is)
        throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError("cannot parse " + path.string() + ": " + e.what());
    }
}

void write_json(const json& j, const fs::path& path)
{
    std::ofstream os = open_out(path);
    os << j.dump(2) << '\n';
}

void write_data_csv(const DataRecord& data, const fs::path& path)
{
    const Index m = data.input_dim(), p = data.output_dim(), n = data.prefix();
    std::ofstream os = open_out(path);
    os << "k," << indexed_header("u", m, true) << ',' << indexed_header("y", p, true) << ','
       << indexed_header("ytilde", p, true) << '\n';
    const MatrixXd& u = data.all_inputs();
    const MatrixXd& y = data.all_outputs(DataView::clean);
    const MatrixXd& yt = data.all_outputs(DataView::noisy);
    for (Index k = 0; k < u.cols(); ++k) {
        os << k - n;
        append_vector(os, u.col(k));
        append_vector(os, y.col(k));
        append_vector(os, yt.col(k));
        os << '\n';
    }
    write_json(json{{"eps_bar", data.noise_bound()},
                    {"seed", data.seed()},
                    {"N", data.length()},
                    {"n", n},
                    {"m", m},
                    {"p", p}},
               sidecar_path(path));
}

DataRecord read_data_csv(const fs::path& path)
{
    const json meta = read_json(sidecar_path(path));
    std::ifstream is(path);
    if (!is)
        throw ConfigError("cannot open " + path.string());
    std::string line;
    std::getline(is, line);
    const std::vector<std::string> header = split(line);
    Index m = 0, p = 0;
    for (const std::string& h : header) {
        if (h.rfind("u_", 0) == 0)
            ++m;
        else if (h.rfind("y_", 0) == 0)
            ++p;
    }
    if (m < 1 || p < 1 || static_cast<Index>(header.size()) != 1 + m + 2 * p)
        throw ConfigError("unexpected data header in " + path.string());
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        const std::vector<std::string> cells = split(line);
        if (cells.size() != header.size())
            throw ConfigError("ragged row in " + path.string());
        std::vector<double> r;
        for (std::size_t i = 1; i < cells.size(); ++i)
            r.push_back(std::stod(cells[i]));
        rows.push_back(std::move(r));
    }
    const Index T = static_cast<Index>(rows.size());
    MatrixXd u(m, T), y(p, T), yt(p, T);
    for (Index k = 0; k < T; ++k) {
        for (Index i = 0; i < m; ++i)
            u(i, k) = rows[k][i];
        for (Index i = 0; i < p; ++i) {
            y(i, k) = rows[k][m + i];
            yt(i, k) = rows[k][m + p + i];
        }
    }
    try {
        const Index n = meta.at("n").get<Index>();
        if (T != meta.at("N").get<Index>() + n)
            throw ConfigError("data sidecar length does not match " + path.string());
        return DataRecord(u, y, yt, n, meta.at("eps_bar").get<double>(),
                          meta.at("seed").get<std::uint64_t>());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed data sidecar: ") + e.what());
    }
}

void write_constants_csv(const SystemConstants& c, const fs::path& path)
{
    std::ofstream os = open_out(path);
    os << "k,rho_k\n";
    for (std::size_t i = 0; i < c.rho.size(); ++i)
        os << c.order + static_cast<Index>(i) << ',' << format_number(c.rho[i]) << '\n';
}

void write_coefficients_csv(const TighteningCoefficients& c, const fs::path& path)
{
    std::ofstream os = open_out(path);
    os << "k,a1,a2,a3,a4\n";
    for (Index k = 0; k < c.size(); ++k)
        os << k << ',' << format_number(c.a1[k]) << ',' << format_number(c.a2[k]) << ','
           << format_number(c.a3[k]) << ',' << format_number(c.a4[k]) << '\n';
}

void write_closed_loop_csv(const ClosedLoopLog& log, const fs::path& path)
{
    std::ofstream os = open_out(path);
    const Index m = log.steps.empty() ? 1 : log.steps.front().u.size();
    const Index p = log.steps.empty() ? 1 : log.steps.front().y.size();
    const bool force = m > 1 || p > 1;
    os << "t," << indexed_header("u", m, force) << ',' << indexed_header("y", p, force) << ','
       << indexed_header("ytilde", p, force) << ",feasible\n";
    for (const StepRecord& s : log.steps) {
        os << s.t;
        append_vector(os, s.u);
        append_vector(os, s.y);
        append_vector(os, s.y_measured);
        os << ',' << (s.feasible ? 1 : 0) << '\n';
    }
}

void write_solves_csv(const ClosedLoopLog& log, const fs::path& path)
{
    std::ofstream os = open_out(path);
    os << "t,status,J,u1,alpha1,sigma_inf,eq4e_ok,active_tightened_rows,prediction_bound_ratio,"
          "prediction_bound_violations,iterations,solve_time\n";
    for (const SolveRecord& r : log.solves)
        os << r.t << ',' << solver::to_string(r.status) << ',' << format_number(r.cost) << ','
           << format_number(r.u_one) << ',' << format_number(r.alpha_one) << ','
           << format_number(r.sigma_inf) << ',' << (r.sigma_bound_ok ? 1 : 0) << ','
           << r.active_tightened_rows << ',' << format_number(r.bound_max_ratio) << ','
           << r.bound_violations << ',' << r.iterations << ',' << format_number(r.solve_time)
           << '\n';
}

void write_input_svg(const ClosedLoopLog& log, double u_min, double u_max, const fs::path& path)
{
    const double T = std::max<double>(1.0, static_cast<double>(log.steps.size()));
    const double pad = 0.1 * (u_max - u_min);
    Frame f{0.0, T, u_min - pad, u_max + pad};
    std::ofstream os = open_out(path);
    svg_begin(os, f, "closed-loop input");
    svg_hline(os, f, u_min, "red");
    svg_hline(os, f, u_max, "red");
    std::vector<std::pair<double, double>> pts;
    for (const StepRecord& s : log.steps) {
        pts.emplace_back(static_cast<double>(s.t), s.u(0));
        pts.emplace_back(static_cast<double>(s.t + 1), s.u(0));
    }
    svg_polyline(os, f, pts, "black", 1.5);
    os << "</svg>\n";
}

void write_output_svg(const ClosedLoopLog& log, double y_max, Index order, const fs::path& path,
                      int prediction_stride)
{
    const double T = std::max<double>(1.0, static_cast<double>(log.steps.size()));
    Frame f{0.0, T, -1.2 * y_max, 1.2 * y_max};
    std::ofstream os = open_out(path);
    svg_begin(os, f, "closed-loop output and open-loop predictions");
    svg_hline(os, f, y_max, "red");
    svg_hline(os, f, -y_max, "red");
    for (std::size_t i = 0; i < log.solves.size(); i += static_cast<std::size_t>(std::max(1, prediction_stride))) {
        const SolveRecord& r = log.solves[i];
        if (r.y_predicted.size() == 0)
            continue;
        std::vector<std::pair<double, double>> pts;
        for (Index k = order; k < r.y_predicted.cols(); ++k)
            pts.emplace_back(static_cast<double>(r.t + k - order),
                             std::clamp(r.y_predicted(0, k), f.y0, f.y1));
        svg_polyline(os, f, pts, "#7aa6d6", 1.0);
    }
    std::vector<std::pair<double, double>> pts;
    for (const StepRecord& s : log.steps)
        pts.emplace_back(static_cast<double>(s.t), s.y(0));
    svg_polyline(os, f, pts, "black", 1.5);
    os << "</svg>\n";
}

} // namespace ddmpc::io
