#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "lowpopart/algos.hpp"
#include "lowpopart/design.hpp"
#include "lowpopart/envs.hpp"
#include "lowpopart/errors.hpp"
#include "lowpopart/estimators.hpp"

namespace lowpopart::io {

using mat::Index;
using mat::Matrix;
using mat::Vector;

inline std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        // trim surrounding whitespace
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    return out;
}

inline double parse_double(const std::string& s, const char* what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw contract_error(std::string(what) + ": cannot parse number '" + s + "'");
    }
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw contract_error("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

inline void write_file(const std::string& path, const std::string& content) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    // Write to a temp file first so concurrent cells never observe partial output.
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw contract_error("cannot write file: " + path);
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

// ---- arm sets: header line "d1,d2", a line with the two values, then one
// ---- line per arm holding d1*d2 reals in vec (column-stacked) order.

inline void save_arm_set(const design::ArmSet& set, const std::string& path) {
    std::ostringstream out;
    out << "d1,d2\n" << set.d1 << "," << set.d2 << "\n";
    for (const Matrix& a : set.arms) {
        const Vector v = mat::vec(a);
        for (Index i = 0; i < v.size(); ++i) out << (i ? "," : "") << fmt(v[i]);
        out << "\n";
    }
    write_file(path, out.str());
}

inline design::ArmSet load_arm_set(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.size() < 3) throw contract_error("arm set file too short: " + path);
    if (split_csv_line(lines[0]) != std::vector<std::string>{"d1", "d2"})
        throw contract_error("arm set file must start with header 'd1,d2': " + path);
    const auto dims = split_csv_line(lines[1]);
    if (dims.size() != 2) throw contract_error("arm set file: bad dimension line");
    const Index d1 = static_cast<Index>(parse_double(dims[0], "arm set d1"));
    const Index d2 = static_cast<Index>(parse_double(dims[1], "arm set d2"));
    std::vector<Matrix> arms;
    for (std::size_t i = 2; i < lines.size(); ++i) {
        const auto cells = split_csv_line(lines[i]);
        if (static_cast<Index>(cells.size()) != d1 * d2)
            throw contract_error("arm set file: arm row has wrong length");
        Vector v(d1 * d2);
        for (Index k = 0; k < v.size(); ++k) v[k] = parse_double(cells[k], "arm entry");
        arms.push_back(mat::reshape(v, d1, d2));
    }
    return design::make_arm_set(d1, d2, std::move(arms));
}

// ---- designs: "arm_index,weight" rows.

inline void save_design(const design::Design& d, const std::string& path) {
    std::ostringstream out;
    out << "arm_index,weight\n";
    for (Index j = 0; j < d.weights.size(); ++j) out << j << "," << fmt(d.weights[j]) << "\n";
    write_file(path, out.str());
}

inline Vector load_design_weights(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty() || split_csv_line(lines[0]) != std::vector<std::string>{"arm_index", "weight"})
        throw contract_error("design file must start with header 'arm_index,weight': " + path);
    Vector w(static_cast<Index>(lines.size()) - 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split_csv_line(lines[i]);
        if (cells.size() != 2) throw contract_error("design file: bad row");
        w[static_cast<Index>(i) - 1] = parse_double(cells[1], "design weight");
    }
    return w;
}

// ---- datasets: header "y,x_1,...,x_{d1*d2}" with x in vec order.

inline void save_dataset(const est::TraceDataset& data, const std::string& path) {
    std::ostringstream out;
    out << "y";
    for (Index k = 1; k <= data.d1 * data.d2; ++k) out << ",x_" << k;
    out << "\n";
    for (const auto& [x, y] : data.samples) {
        out << fmt(y);
        const Vector v = mat::vec(x);
        for (Index k = 0; k < v.size(); ++k) out << "," << fmt(v[k]);
        out << "\n";
    }
    write_file(path, out.str());
}

inline est::TraceDataset load_dataset(const std::string& path, Index d1, Index d2) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw contract_error("dataset file empty: " + path);
    est::TraceDataset data{d1, d2, {}};
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split_csv_line(lines[i]);
        if (static_cast<Index>(cells.size()) != d1 * d2 + 1)
            throw contract_error("dataset file: row has wrong length");
        Vector v(d1 * d2);
        for (Index k = 0; k < v.size(); ++k) v[k] = parse_double(cells[k + 1], "dataset x");
        data.add(mat::reshape(v, d1, d2), parse_double(cells[0], "dataset y"));
    }
    return data;
}

// ---- plain matrices: one CSV row per matrix row.

inline void save_matrix(const Matrix& m, const std::string& path) {
    std::ostringstream out;
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << fmt(m(i, j));
        out << "\n";
    }
    write_file(path, out.str());
}

inline Matrix load_matrix(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw contract_error("matrix file empty: " + path);
    const Index rows = static_cast<Index>(lines.size());
    const Index cols = static_cast<Index>(split_csv_line(lines[0]).size());
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const auto cells = split_csv_line(lines[i]);
        if (static_cast<Index>(cells.size()) != cols)
            throw contract_error("matrix file: ragged rows");
        for (Index j = 0; j < cols; ++j) m(i, j) = parse_double(cells[j], "matrix entry");
    }
    return m;
}

// ---- estimates: theta CSV plus a JSON sidecar of diagnostics.

inline void save_estimate(const est::Estimate& e, const std::string& theta_path,
                          const std::string& sidecar_path) {
    save_matrix(e.theta_hat, theta_path);
    nlohmann::json j;
    j["rank"] = e.rank;
    j["nu"] = e.nu_used;
    j["tau"] = e.tau_used;
    j["B"] = e.b_used;
    j["estimator_name"] = e.estimator_name;
    j["converged"] = e.converged;
    if (!e.warning.empty()) j["warning"] = e.warning;
    write_file(sidecar_path, j.dump(2) + "\n");
}

// ---- run traces: t,arm_index,reward,instant_regret,cumulative_regret,phase.

inline void save_trace(const algo::RunTrace& trace, const std::string& path, int stride = 1) {
    std::ostringstream out;
    out << "t,arm_index,reward,instant_regret,cumulative_regret,phase\n";
    const std::size_t n = trace.steps.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (stride > 1 && (i + 1) % static_cast<std::size_t>(stride) != 0 && i + 1 != n) continue;
        const algo::RunStep& s = trace.steps[i];
        out << s.t << "," << s.arm_index << "," << fmt(s.reward) << "," << fmt(s.instant_regret)
            << "," << fmt(s.cumulative_regret) << "," << s.phase << "\n";
    }
    write_file(path, out.str());
}

// ---- environments: directory with theta.csv, arms.csv and env.json.

inline void save_environment(const env::Environment& e, const std::string& dir,
                             const std::string& generator_name, const nlohmann::json& params) {
    std::filesystem::create_directories(dir);
    save_matrix(e.theta_star, dir + "/theta.csv");
    save_arm_set(e.arm_set, dir + "/arms.csv");
    nlohmann::json j;
    j["sigma"] = e.sigma;
    j["rank"] = e.rank;
    j["seed"] = e.seed;
    j["noise"] = "gaussian";
    j["generator"] = generator_name;
    j["params"] = params;
    write_file(dir + "/env.json", j.dump(2) + "\n");
}

inline env::Environment load_environment(const std::string& dir) {
    env::Environment e;
    e.theta_star = load_matrix(dir + "/theta.csv");
    e.arm_set = load_arm_set(dir + "/arms.csv");
    std::ifstream in(dir + "/env.json");
    if (!in) throw contract_error("cannot open env.json in " + dir);
    nlohmann::json j;
    in >> j;
    e.sigma = j.at("sigma").get<double>();
    e.rank = j.at("rank").get<int>();
    e.seed = j.at("seed").get<std::uint64_t>();
    return e;
}

}  // namespace lowpopart::io
