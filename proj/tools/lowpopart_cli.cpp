// Batch CLI for low-rank trace regression and bandit experiments:
//   design   optimize an experimental design over an arm-set CSV
//   recover  matrix-recovery error curves over a sample-size grid
//   bandit   cumulative-regret curves for the bandit algorithms
//   lbcheck  verify the hard lower-bound instance's structural identities
//   plot     render an aggregate CSV as an SVG line chart
//
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <CLI11.hpp>

#include "lowpopart/cli_commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"low-rank trace regression estimators, B(Q) designs and bandit benchmarks"};
    app.require_subcommand(1);

    lowpopart::cli::DesignArgs design_args;
    CLI::App* design = app.add_subcommand("design", "optimize a design over an arm-set CSV");
    design->add_option("--arms", design_args.arms_path, "arm set CSV")->required();
    design->add_option("--criterion", design_args.criterion, "bmin or emin")
        ->check(CLI::IsMember({"bmin", "emin"}));
    design->add_option("--out", design_args.out_path, "output design CSV");
    design->add_option("--iters", design_args.max_iters, "iteration budget");
    design->add_option("--seed", design_args.seed, "initialization seed");

    lowpopart::cli::ExperimentArgs recover_args, bandit_args;
    CLI::App* recover = app.add_subcommand("recover", "run a matrix-recovery experiment");
    recover->add_option("--config", recover_args.config_path, "experiment config file")->required();
    recover->add_option("--seed", [&](const CLI::results_t& r) {
        recover_args.seed = std::stoull(r[0]);
        return true;
    }, "override base seed");
    recover->add_option("--reps", [&](const CLI::results_t& r) {
        recover_args.reps = std::stoi(r[0]);
        return true;
    }, "override repetitions");
    recover->add_option("--out", [&](const CLI::results_t& r) {
        recover_args.out = r[0];
        return true;
    }, "override output directory");
    recover->add_option("--threads", [&](const CLI::results_t& r) {
        recover_args.threads = std::stoi(r[0]);
        return true;
    }, "worker threads (0 = auto)");
    recover->add_flag("--full", recover_args.full, "full-scale profile");

    CLI::App* bandit = app.add_subcommand("bandit", "run a bandit regret experiment");
    bandit->add_option("--config", bandit_args.config_path, "experiment config file")->required();
    bandit->add_option("--seed", [&](const CLI::results_t& r) {
        bandit_args.seed = std::stoull(r[0]);
        return true;
    }, "override base seed");
    bandit->add_option("--reps", [&](const CLI::results_t& r) {
        bandit_args.reps = std::stoi(r[0]);
        return true;
    }, "override repetitions");
    bandit->add_option("--out", [&](const CLI::results_t& r) {
        bandit_args.out = r[0];
        return true;
    }, "override output directory");
    bandit->add_option("--threads", [&](const CLI::results_t& r) {
        bandit_args.threads = std::stoi(r[0]);
        return true;
    }, "worker threads (0 = auto)");
    bandit->add_flag("--full", bandit_args.full, "full-scale profile");

    lowpopart::cli::LbCheckArgs lb_args;
    CLI::App* lbcheck = app.add_subcommand("lbcheck", "verify the lower-bound instance claims");
    lbcheck->add_option("--d", lb_args.d, "ambient dimension");
    lbcheck->add_option("--r", lb_args.r, "instance rank parameter");
    lbcheck->add_option("--C", lb_args.c, "well-conditioning level (default 1/(10 d))");
    lbcheck->add_option("--rmax", lb_args.r_max, "reward bound R_max");
    lbcheck->add_option("--eps", lb_args.eps, "gap parameter (default 0.9 R_max / (24 r))");
    lbcheck->add_option("--h-count", lb_args.h_count, "number of sampled H arms");
    lbcheck->add_option("--s-count", lb_args.s_count, "number of sampled S arms");
    lbcheck->add_option("--seed", lb_args.seed, "sampling seed");
    lbcheck->add_flag("--corrupt-theta", lb_args.corrupt_theta,
                      "negative control: flip the sign of eps inside Theta");

    lowpopart::cli::PlotArgs plot_args;
    CLI::App* plot = app.add_subcommand("plot", "render an aggregate CSV as SVG");
    plot->add_option("--in", plot_args.in_path, "aggregate CSV")->required();
    plot->add_option("--out", plot_args.out_path, "output SVG path")->required();
    plot->add_option("--style", plot_args.style, "recover or bandit")
        ->check(CLI::IsMember({"recover", "bandit"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    if (design->parsed()) return lowpopart::cli::cmd_design(design_args);
    if (recover->parsed()) return lowpopart::cli::cmd_recover(recover_args);
    if (bandit->parsed()) return lowpopart::cli::cmd_bandit(bandit_args);
    if (lbcheck->parsed()) return lowpopart::cli::cmd_lbcheck(lb_args);
    if (plot->parsed()) return lowpopart::cli::cmd_plot(plot_args);
    return 2;
}
