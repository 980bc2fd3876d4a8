#pragma once

#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lowpopart/algos.hpp"
#include "lowpopart/envs.hpp"
#include "lowpopart/errors.hpp"
#include "lowpopart/estimators.hpp"
#include "lowpopart/io.hpp"

namespace lowpopart::harness {

using mat::Index;
using mat::Matrix;
using mat::Vector;

/// One (design criterion, estimator) pair of a recovery experiment.
struct MethodPair {
    design::Criterion criterion;
    std::string estimator;  // "lpa" | "nuc"

    std::string label() const { return std::string(design::criterion_name(criterion)) + "-" + estimator; }
};

/// Flat description of a batch experiment, parsed 1:1 from a key = value file.
struct ExperimentSpec {
    std::string name = "experiment";
    std::string kind;  // "recover" | "bandit"

    std::string generator = "frobenius_ball";  // frobenius_ball | bilinear | canonical | a_hard
    Index d1 = 3, d2 = 3;
    int arm_count = 150;
    int x_count = 24, z_count = 24;
    double sigma = 1.0;
    double delta = 0.05;
    int rank = 1;

    std::vector<MethodPair> methods;       // recover
    std::vector<int> grid;                 // recover: n0 grid
    std::vector<std::string> algorithms;   // bandit
    int horizon = 20000;

    int reps = 12;
    std::uint64_t base_seed = 1;
    int stride = 100;
    int design_iters = 20000;
    int threads = 0;  // 0 = hardware concurrency
    std::string out_dir = "out";

    // Paper-scale profile, enabled by --full.
    int full_reps = 60;
    int full_horizon = 100000;
    std::vector<int> full_grid;

    void validate() const {
        if (kind != "recover" && kind != "bandit")
            throw contract_error("spec: kind must be 'recover' or 'bandit'");
        if (reps < 1) throw contract_error("spec: reps must be >= 1");
        if (kind == "recover" && (grid.empty() || methods.empty()))
            throw contract_error("spec: recover needs a nonempty grid and methods");
        if (kind == "bandit" && algorithms.empty())
            throw contract_error("spec: bandit needs algorithms");
    }

    void apply_full_profile() {
        reps = full_reps;
        horizon = full_horizon;
        if (!full_grid.empty()) grid = full_grid;
    }
};

namespace detail {

inline std::vector<int> parse_int_list(const std::string& value) {
    // Either "a, b, c" or an inclusive range "start:stop:step".
    std::vector<int> out;
    if (value.find(':') != std::string::npos) {
        std::vector<long> nums;
        std::stringstream ss(value);
        std::string cell;
        while (std::getline(ss, cell, ':')) nums.push_back(std::stol(cell));
        if (nums.size() != 3 || nums[2] <= 0) throw contract_error("spec: bad range '" + value + "'");
        for (long v = nums[0]; v <= nums[1]; v += nums[2]) out.push_back(static_cast<int>(v));
        return out;
    }
    for (const std::string& cell : io::split_csv_line(value))
        if (!cell.empty()) out.push_back(std::stoi(cell));
    return out;
}

inline MethodPair parse_method(const std::string& token) {
    const auto colon = token.find(':');
    if (colon == std::string::npos) throw contract_error("spec: method must be 'design:estimator'");
    const std::string crit = token.substr(0, colon), est = token.substr(colon + 1);
    MethodPair m;
    if (crit == "bmin") m.criterion = design::Criterion::BOpt;
    else if (crit == "emin") m.criterion = design::Criterion::EOpt;
    else throw contract_error("spec: unknown design criterion '" + crit + "'");
    if (est != "lpa" && est != "nuc") throw contract_error("spec: unknown estimator '" + est + "'");
    m.estimator = est;
    return m;
}

}  // namespace detail

inline ExperimentSpec parse_spec(const std::string& path) {
    ExperimentSpec s;
    for (const std::string& raw : io::read_lines(path)) {
        std::string line = raw;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string v) {
            const auto b = v.find_first_not_of(" \t");
            const auto e = v.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) continue;

        if (key == "name") s.name = value;
        else if (key == "kind") s.kind = value;
        else if (key == "generator") s.generator = value;
        else if (key == "d1") s.d1 = std::stol(value);
        else if (key == "d2") s.d2 = std::stol(value);
        else if (key == "arm_count") s.arm_count = std::stoi(value);
        else if (key == "x_count") s.x_count = std::stoi(value);
        else if (key == "z_count") s.z_count = std::stoi(value);
        else if (key == "sigma") s.sigma = std::stod(value);
        else if (key == "delta") s.delta = std::stod(value);
        else if (key == "rank") s.rank = std::stoi(value);
        else if (key == "grid") s.grid = detail::parse_int_list(value);
        else if (key == "full_grid") s.full_grid = detail::parse_int_list(value);
        else if (key == "T") s.horizon = std::stoi(value);
        else if (key == "full_T") s.full_horizon = std::stoi(value);
        else if (key == "reps") s.reps = std::stoi(value);
        else if (key == "full_reps") s.full_reps = std::stoi(value);
        else if (key == "base_seed") s.base_seed = std::stoull(value);
        else if (key == "stride") s.stride = std::stoi(value);
        else if (key == "design_iters") s.design_iters = std::stoi(value);
        else if (key == "threads") s.threads = std::stoi(value);
        else if (key == "out") s.out_dir = value;
        else if (key == "methods") {
            for (const std::string& tok : io::split_csv_line(value))
                if (!tok.empty()) s.methods.push_back(detail::parse_method(tok));
        } else if (key == "algos") {
            for (const std::string& tok : io::split_csv_line(value))
                if (!tok.empty()) s.algorithms.push_back(tok);
        } else {
            throw contract_error("spec: unknown key '" + key + "'");
        }
    }
    return s;
}

/// Per-grid-point mean and n-1 standard deviation, raw values retained.
struct AggregateCell {
    double x = 0.0;          // n0 or t
    std::string series;      // method or algorithm label
    std::vector<double> raw;

    double mean() const {
        double s = 0.0;
        for (double v : raw) s += v;
        return raw.empty() ? 0.0 : s / static_cast<double>(raw.size());
    }
    double stddev() const {
        if (raw.size() < 2) return 0.0;
        const double m = mean();
        double s = 0.0;
        for (double v : raw) s += (v - m) * (v - m);
        return std::sqrt(s / static_cast<double>(raw.size() - 1));
    }
};

struct AggregateResult {
    std::vector<AggregateCell> cells;  // ordered by (series, x)
};

namespace detail {

template <class F>
inline void parallel_for(int n, int threads, F&& body) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

inline design::ArmSet make_arms(const ExperimentSpec& s, std::uint64_t seed) {
    if (s.generator == "frobenius_ball") return env::gen_arms_frobenius_ball(s.arm_count, s.d1, s.d2, seed);
    if (s.generator == "bilinear") return env::gen_arms_bilinear(s.x_count, s.z_count, s.d1, s.d2, seed);
    if (s.generator == "canonical") return env::gen_arms_canonical(s.d1, s.d2);
    if (s.generator == "a_hard") {
        if (s.d1 != s.d2) throw contract_error("a_hard needs d1 == d2");
        return env::gen_a_hard(static_cast<int>(s.d1));
    }
    throw contract_error("spec: unknown generator '" + s.generator + "'");
}

struct Instance {
    env::Environment environment;
    double s_star = 1.0;
    double s_r = 1.0;
};

inline Instance make_instance(const ExperimentSpec& s, int rep) {
    Instance inst;
    inst.environment.arm_set = make_arms(s, rng::derive_seed({s.base_seed, static_cast<std::uint64_t>(rep), 0x61726d73ULL}));
    inst.environment.theta_star =
        env::gen_theta_rank_one(s.d1, s.d2, rng::derive_seed({s.base_seed, static_cast<std::uint64_t>(rep), 0x746874ULL}));
    inst.environment.sigma = s.sigma;
    inst.environment.rank = s.rank;
    inst.environment.seed = rng::derive_seed({s.base_seed, static_cast<std::uint64_t>(rep), 0x656e76ULL});
    const mat::MatrixNorms n = mat::norms(inst.environment.theta_star);
    inst.s_star = n.nuclear;
    // The smallest nonzero singular value is granted to ESTR-style algorithms.
    Eigen::JacobiSVD<Matrix> svd(inst.environment.theta_star);
    inst.s_r = svd.singularValues()[std::min<Index>(s.rank, svd.singularValues().size()) - 1];
    return inst;
}

inline std::string sanitize(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
    return out;
}

}  // namespace detail

/// Recovery experiment: for every (n0 grid point, method, repetition) draw a
/// fresh instance, sample n0 measurements from the method's design, estimate,
/// and record the nuclear-norm recovery error. Cells run on a thread pool;
/// every cell's randomness is derived from
/// derive_seed({base_seed, grid_index, method_index, repetition_index}).
inline AggregateResult run_recover(const ExperimentSpec& spec) {
    spec.validate();
    const int n_grid = static_cast<int>(spec.grid.size());
    const int n_methods = static_cast<int>(spec.methods.size());
    const int cells = n_grid * n_methods * spec.reps;

    // Shared per-rep instances and per-(rep, criterion) designs.
    std::vector<detail::Instance> instances(spec.reps);
    detail::parallel_for(spec.reps, spec.threads,
                         [&](int rep) { instances[rep] = detail::make_instance(spec, rep); });

    bool need_b = false, need_e = false;
    for (const MethodPair& m : spec.methods)
        (m.criterion == design::Criterion::BOpt ? need_b : need_e) = true;
    std::vector<design::Design> b_designs(spec.reps), e_designs(spec.reps);
    detail::parallel_for(spec.reps, spec.threads, [&](int rep) {
        design::DesignOptOptions opts;
        opts.max_iters = spec.design_iters;
        opts.seed = rng::derive_seed({spec.base_seed, static_cast<std::uint64_t>(rep), 0x64736eULL});
        if (need_b)
            b_designs[rep] = design::optimize_design(instances[rep].environment.arm_set,
                                                     design::Criterion::BOpt, opts);
        if (need_e)
            e_designs[rep] = design::optimize_design(instances[rep].environment.arm_set,
                                                     design::Criterion::EOpt, opts);
    });

    std::vector<double> errors(cells, 0.0);
    detail::parallel_for(cells, spec.threads, [&](int cell) {
        const int gi = cell / (n_methods * spec.reps);
        const int mi = (cell / spec.reps) % n_methods;
        const int rep = cell % spec.reps;
        const MethodPair& method = spec.methods[mi];
        const detail::Instance& inst = instances[rep];
        const design::Design& dsn =
            method.criterion == design::Criterion::BOpt ? b_designs[rep] : e_designs[rep];

        rng::Stream stream(rng::derive_seed({spec.base_seed, static_cast<std::uint64_t>(gi),
                                             static_cast<std::uint64_t>(mi),
                                             static_cast<std::uint64_t>(rep)}));
        const int n0 = spec.grid[gi];
        est::TraceDataset data{spec.d1, spec.d2, {}};
        for (int t = 0; t < n0; ++t) {
            const int j = algo::detail::sample_index(dsn.weights, stream);
            const double y = env::pull(inst.environment, j, stream);
            data.add(inst.environment.arm_set.arms[j], y);
        }

        Matrix theta_hat;
        if (method.estimator == "lpa") {
            theta_hat = est::warm_lowpopart(data, dsn.q, spec.sigma, inst.s_star, spec.delta)
                            .theta_hat;
        } else {
            const double log_dim = std::log(2.0 * static_cast<double>(spec.d1 + spec.d2) / spec.delta);
            const double lam = 2.0 * spec.sigma * std::sqrt(static_cast<double>(n0) * log_dim);
            theta_hat = est::nuclear_norm_pls(data, lam).theta_hat;
        }
        errors[cell] = mat::norms(theta_hat - inst.environment.theta_star).nuclear;
    });

    AggregateResult agg;
    std::ostringstream raw;
    raw << "n0,method,rep,nuclear_error\n";
    for (int mi = 0; mi < n_methods; ++mi) {
        for (int gi = 0; gi < n_grid; ++gi) {
            AggregateCell cell;
            cell.x = spec.grid[gi];
            cell.series = spec.methods[mi].label();
            for (int rep = 0; rep < spec.reps; ++rep) {
                const double v = errors[(gi * n_methods + mi) * spec.reps + rep];
                cell.raw.push_back(v);
                raw << spec.grid[gi] << "," << cell.series << "," << rep << "," << io::fmt(v) << "\n";
            }
            agg.cells.push_back(std::move(cell));
        }
    }

    std::ostringstream out;
    out << "n0,method,mean_err,std_err\n";
    for (const AggregateCell& c : agg.cells)
        out << static_cast<long>(c.x) << "," << c.series << "," << io::fmt(c.mean()) << ","
            << io::fmt(c.stddev()) << "\n";
    io::write_file(spec.out_dir + "/" + spec.name + "_aggregate.csv", out.str());
    io::write_file(spec.out_dir + "/" + spec.name + "_raw.csv", raw.str());
    return agg;
}

namespace detail {

inline algo::RunTrace run_algorithm(const std::string& name, const Instance& inst,
                                    const ExperimentSpec& spec, std::uint64_t algo_seed) {
    design::DesignOptOptions opts;
    opts.max_iters = spec.design_iters;

    if (name == "lpa_etc" || name == "nuc_etc") {
        algo::EtcConfig cfg;
        cfg.T = spec.horizon;
        cfg.sigma = spec.sigma;
        cfg.delta = spec.delta;
        cfg.s_star = inst.s_star;
        cfg.r = spec.rank;
        cfg.algo_seed = algo_seed;
        cfg.design_opts = opts;
        return name == "lpa_etc" ? algo::run_lpa_etc(inst.environment, cfg)
                                 : algo::run_nuc_etc(inst.environment, cfg);
    }
    if (name == "lpa_estr") {
        algo::EstrConfig cfg;
        cfg.T = spec.horizon;
        cfg.sigma = spec.sigma;
        cfg.delta = spec.delta;
        cfg.s_star = inst.s_star;
        cfg.s_r = inst.s_r;
        cfg.r = spec.rank;
        cfg.algo_seed = algo_seed;
        cfg.design_opts = opts;
        return algo::run_lpa_estr(inst.environment, cfg);
    }
    if (name == "oful") {
        algo::OfulConfig cfg;
        cfg.T = spec.horizon;
        cfg.sigma = spec.sigma;
        cfg.delta = spec.delta;
        cfg.s_star = inst.s_star;
        cfg.algo_seed = algo_seed;
        return algo::run_oful(inst.environment, cfg);
    }
    throw contract_error("spec: unknown algorithm '" + name + "'");
}

}  // namespace detail

/// Bandit experiment: each (algorithm, repetition) cell runs one full trace;
/// per-run traces are written thinned at the configured stride and the
/// aggregate holds mean/std cumulative regret at the thinned time points.
inline AggregateResult run_bandit(const ExperimentSpec& spec) {
    spec.validate();
    const int n_algos = static_cast<int>(spec.algorithms.size());
    const int cells = n_algos * spec.reps;

    std::vector<detail::Instance> instances(spec.reps);
    detail::parallel_for(spec.reps, spec.threads,
                         [&](int rep) { instances[rep] = detail::make_instance(spec, rep); });

    // Thinned time grid: stride, 2*stride, ..., plus the final step.
    std::vector<int> tgrid;
    for (int t = spec.stride; t < spec.horizon; t += spec.stride) tgrid.push_back(t);
    tgrid.push_back(spec.horizon);

    std::vector<std::vector<double>> curves(cells);
    detail::parallel_for(cells, spec.threads, [&](int cell) {
        const int ai = cell / spec.reps;
        const int rep = cell % spec.reps;
        const std::uint64_t algo_seed = rng::derive_seed(
            {spec.base_seed, 0ULL, static_cast<std::uint64_t>(ai), static_cast<std::uint64_t>(rep)});
        const algo::RunTrace trace =
            detail::run_algorithm(spec.algorithms[ai], instances[rep], spec, algo_seed);
        std::vector<double> curve(tgrid.size());
        for (std::size_t k = 0; k < tgrid.size(); ++k)
            curve[k] = trace.steps[tgrid[k] - 1].cumulative_regret;
        curves[cell] = std::move(curve);
        io::save_trace(trace,
                       spec.out_dir + "/traces/" + spec.name + "_" +
                           detail::sanitize(spec.algorithms[ai]) + "_rep" + std::to_string(rep) +
                           ".csv",
                       spec.stride);
    });

    AggregateResult agg;
    for (int ai = 0; ai < n_algos; ++ai) {
        for (std::size_t k = 0; k < tgrid.size(); ++k) {
            AggregateCell cell;
            cell.x = tgrid[k];
            cell.series = spec.algorithms[ai];
            for (int rep = 0; rep < spec.reps; ++rep) cell.raw.push_back(curves[ai * spec.reps + rep][k]);
            agg.cells.push_back(std::move(cell));
        }
    }

    std::ostringstream out;
    out << "t,algo,mean_cumreg,std_cumreg\n";
    for (const AggregateCell& c : agg.cells)
        out << static_cast<long>(c.x) << "," << c.series << "," << io::fmt(c.mean()) << ","
            << io::fmt(c.stddev()) << "\n";
    io::write_file(spec.out_dir + "/" + spec.name + "_aggregate.csv", out.str());
    return agg;
}

}  // namespace lowpopart::harness
