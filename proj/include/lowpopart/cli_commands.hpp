#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lowpopart/design.hpp"
#include "lowpopart/envs.hpp"
#include "lowpopart/errors.hpp"
#include "lowpopart/experiments.hpp"
#include "lowpopart/io.hpp"
#include "lowpopart/svg.hpp"

namespace lowpopart::cli {

struct DesignArgs {
    std::string arms_path;
    std::string criterion = "bmin";  // bmin | emin
    std::string out_path;            // optional design CSV
    int max_iters = 20000;
    std::uint64_t seed = 0;
};

inline int cmd_design(const DesignArgs& args, std::ostream& out = std::cout,
                      std::ostream& err = std::cerr) {
    try {
        const design::ArmSet arms = io::load_arm_set(args.arms_path);
        const design::Criterion kind =
            args.criterion == "emin" ? design::Criterion::EOpt : design::Criterion::BOpt;
        design::DesignOptOptions opts;
        opts.max_iters = args.max_iters;
        opts.seed = args.seed;
        const design::Design d = design::optimize_design(arms, kind, opts);
        if (!args.out_path.empty()) io::save_design(d, args.out_path);
        out << "criterion: " << design::criterion_name(kind) << "\n"
            << "value: " << io::fmt(d.criterion_value) << "\n"
            << "iterations: " << d.iterations << "\n"
            << "converged: " << (d.converged ? "true" : "false") << "\n"
            << "arms: " << arms.size() << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "design: " << e.what() << "\n";
        return 1;
    }
}

struct LbCheckArgs {
    int d = 8;
    int r = 2;
    double c = -1.0;      // default 1/(10 d)
    double r_max = 6.0;
    double eps = -1.0;    // default 0.9 * R_max / (24 r)
    int h_count = 2000;
    int s_count = 50;
    std::uint64_t seed = 1;
    bool corrupt_theta = false;  // negative control: flips the sign of eps in Theta
};

/// Builds the hard instance and verifies its structural identities by
/// enumerating the finite arm set. Prints one pass/fail line per claim and
/// returns nonzero naming the first failed claim.
inline int cmd_lbcheck(const LbCheckArgs& args, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
    try {
        const double c = args.c > 0.0 ? args.c : 1.0 / (10.0 * args.d);
        const double eps = args.eps > 0.0 ? args.eps : 0.9 * args.r_max / (24.0 * args.r);
        env::LowerBoundInstance inst = env::gen_lower_bound_instance(
            args.d, args.r, eps, args.r_max, c, args.h_count, args.s_count, args.seed);

        mat::Matrix theta = inst.theta;
        if (args.corrupt_theta) {
            for (int i = 0; i < args.r - 1; ++i) theta(i, i) = -eps;
        }

        const double re = (args.r - 1) * eps;
        const double tol = 1e-9 * std::max(1.0, args.r_max);
        bool all_ok = true;
        std::string first_fail;
        const auto claim = [&](const std::string& name, bool ok, const std::string& detail) {
            out << (ok ? "[PASS] " : "[FAIL] ") << name << ": " << detail << "\n";
            if (!ok && all_ok) {
                all_ok = false;
                first_fail = name;
            }
        };

        const double nuc_theta = mat::norms(inst.theta).nuclear;
        claim("nuclear budget of Theta",
              std::abs(nuc_theta - (args.r_max / 2.0 + re)) <= tol && nuc_theta <= args.r_max + tol,
              "||Theta||_* = " + io::fmt(nuc_theta) + " (expected " +
                  io::fmt(args.r_max / 2.0 + re) + ", budget " + io::fmt(args.r_max) + ")");

        const double nuc_tilde = mat::norms(inst.theta_tilde).nuclear;
        claim("nuclear budget of Theta~",
              std::abs(nuc_tilde - (args.r_max / 2.0 + 3.0 * re)) <= tol &&
                  nuc_tilde <= args.r_max + tol,
              "||Theta~||_* = " + io::fmt(nuc_tilde) + " (expected " +
                  io::fmt(args.r_max / 2.0 + 3.0 * re) + ", budget " + io::fmt(args.r_max) + ")");

        double max_reward = -std::numeric_limits<double>::infinity();
        double max_reward_tilde = max_reward;
        double max_h_reward = max_reward;
        double max_op = 0.0;
        int argmax = -1, argmax_tilde = -1;
        for (std::size_t j = 0; j < inst.arm_set.size(); ++j) {
            const mat::Matrix& a = inst.arm_set.arms[j];
            const double v = theta.cwiseProduct(a).sum();
            const double vt = inst.theta_tilde.cwiseProduct(a).sum();
            if (v > max_reward) {
                max_reward = v;
                argmax = static_cast<int>(j);
            }
            if (vt > max_reward_tilde) {
                max_reward_tilde = vt;
                argmax_tilde = static_cast<int>(j);
            }
            if (static_cast<int>(j) < inst.h_count) max_h_reward = std::max(max_h_reward, v);
            max_op = std::max(max_op, mat::operator_norm(a));
        }

        const double z_reward = theta.cwiseProduct(inst.z).sum();
        claim("optimal reward under Theta",
              std::abs(max_reward - re) <= tol && std::abs(z_reward - max_reward) <= tol,
              "max reward " + io::fmt(max_reward) + " (expected " + io::fmt(re) + "), argmax index " +
                  std::to_string(argmax) + " (Z at " + std::to_string(inst.z_index) + ")");

        const double zt_reward = inst.theta_tilde.cwiseProduct(inst.z_tilde).sum();
        claim("optimal reward under Theta~",
              std::abs(max_reward_tilde - 2.0 * re) <= tol &&
                  std::abs(zt_reward - max_reward_tilde) <= tol,
              "max reward " + io::fmt(max_reward_tilde) + " (expected " + io::fmt(2.0 * re) +
                  "), argmax index " + std::to_string(argmax_tilde) + " (Z~ at " +
                  std::to_string(inst.z_tilde_index) + ")");

        claim("H arms are high regret", max_h_reward <= -args.r_max / 8.0 + tol,
              "max H reward " + io::fmt(max_h_reward) + " <= " + io::fmt(-args.r_max / 8.0));

        claim("operator norms", max_op <= 1.0 + 1e-12,
              "max arm operator norm " + io::fmt(max_op));

        if (!all_ok) {
            err << "lbcheck: claim failed: " << first_fail << "\n";
            return 1;
        }
        return 0;
    } catch (const std::exception& e) {
        err << "lbcheck: " << e.what() << "\n";
        return 1;
    }
}

struct ExperimentArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> reps;
    std::optional<std::string> out;
    std::optional<int> threads;
    bool full = false;
};

inline int cmd_recover(const ExperimentArgs& args, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
    try {
        harness::ExperimentSpec spec = harness::parse_spec(args.config_path);
        if (args.full) spec.apply_full_profile();
        if (args.seed) spec.base_seed = *args.seed;
        if (args.reps) spec.reps = *args.reps;
        if (args.out) spec.out_dir = *args.out;
        if (args.threads) spec.threads = *args.threads;
        if (spec.kind != "recover") throw contract_error("config is not a recover spec");
        const harness::AggregateResult agg = harness::run_recover(spec);
        out << "wrote " << spec.out_dir << "/" << spec.name << "_aggregate.csv ("
            << agg.cells.size() << " cells)\n";
        return 0;
    } catch (const std::exception& e) {
        err << "recover: " << e.what() << "\n";
        return 1;
    }
}

inline int cmd_bandit(const ExperimentArgs& args, std::ostream& out = std::cout,
                      std::ostream& err = std::cerr) {
    try {
        harness::ExperimentSpec spec = harness::parse_spec(args.config_path);
        if (args.full) spec.apply_full_profile();
        if (args.seed) spec.base_seed = *args.seed;
        if (args.reps) spec.reps = *args.reps;
        if (args.out) spec.out_dir = *args.out;
        if (args.threads) spec.threads = *args.threads;
        if (spec.kind != "bandit") throw contract_error("config is not a bandit spec");
        const harness::AggregateResult agg = harness::run_bandit(spec);
        // Final-horizon summary per algorithm.
        for (const harness::AggregateCell& c : agg.cells)
            if (static_cast<int>(c.x) == spec.horizon)
                out << c.series << ": final mean cumulative regret " << io::fmt(c.mean()) << " (std "
                    << io::fmt(c.stddev()) << ")\n";
        out << "wrote " << spec.out_dir << "/" << spec.name << "_aggregate.csv\n";
        return 0;
    } catch (const std::exception& e) {
        err << "bandit: " << e.what() << "\n";
        return 1;
    }
}

struct PlotArgs {
    std::string in_path;
    std::string out_path;
    std::string style = "recover";  // recover | bandit
};

inline int cmd_plot(const PlotArgs& args, std::ostream& err = std::cerr) {
    try {
        harness::emit_plot(args.in_path, args.out_path, args.style);
        return 0;
    } catch (const std::exception& e) {
        err << "plot: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace lowpopart::cli
