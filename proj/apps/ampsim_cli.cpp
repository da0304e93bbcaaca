// Command-line front end. Subcommands:
//   run <config>      channel experiment from a config file, or rerun a manifest
//   compare <config>  laser channel vs ideal amplifier at the measured gain
//   fig2              built-in diffusion-vs-jump stationary cross-validation
//   fig3              built-in saturated laser vs matched amplifier comparison
//   validate <config> print the semiclassical validity margins and exit
// Global flags: --seed-override, --out-dir, --threads.

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include <ampsim/experiment.hpp>
#include <ampsim/version.hpp>

namespace {

constexpr std::uint64_t default_builtin_seed = 42;

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void print_channel_summary(const ampsim::ChannelReport& r) {
    std::cout << "amplifier           " << r.amplifier << "\n"
              << "gain                " << r.gain_db << " dB (" << r.gain_linear << "x)\n"
              << "noise figure        " << r.noise_figure_db << " dB\n"
              << "bit error rate      " << r.ber << " (threshold " << r.threshold << ")\n"
              << "mutual information  " << r.mutual_information_bits << " bits\n"
              << "wall time           " << r.wall_seconds << " s\n";
}

void print_comparison_summary(const ampsim::ComparisonRecord& rec) {
    std::cout << "matched gain        " << rec.matched_gain_db << " dB\n"
              << "small-signal gain   " << rec.small_signal_gain_db << " dB\n"
              << "laser:  R = " << rec.laser.noise_figure_db << " dB, B = " << rec.laser.ber
              << ", I = " << rec.laser.mutual_information_bits << " bits\n"
              << "ideal:  R = " << rec.pia.noise_figure_db << " dB, B = " << rec.pia.ber
              << ", I = " << rec.pia.mutual_information_bits << " bits\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string("quantum amplifier binary-channel simulator (version ") +
                 ampsim::version_string + ")"};
    app.require_subcommand(1);

    std::uint64_t seed_override = 0;
    std::string out_dir;
    unsigned threads = 1;
    CLI::Option* seed_opt =
        app.add_option("--seed-override", seed_override, "replace the config or built-in seed");
    CLI::Option* dir_opt =
        app.add_option("--out-dir", out_dir, "output directory (overrides the config)");
    app.add_option("--threads", threads, "worker thread count (default 1)");

    std::string run_path, compare_path, validate_path;
    CLI::App* run_cmd =
        app.add_subcommand("run", "run a channel experiment from a config file or a manifest");
    run_cmd->add_option("config", run_path, "config or manifest file")->required();
    CLI::App* compare_cmd = app.add_subcommand(
        "compare", "run a laser config, then an ideal amplifier at the measured gain");
    compare_cmd->add_option("config", compare_path, "laser_fpe config file")->required();
    CLI::App* fig2_cmd = app.add_subcommand(
        "fig2", "built-in stationary-distribution cross-validation of the two laser solvers");
    CLI::App* fig3_cmd = app.add_subcommand(
        "fig3", "built-in saturated laser vs matched ideal amplifier comparison");
    CLI::App* validate_cmd =
        app.add_subcommand("validate", "print the semiclassical validity margins of a config");
    validate_cmd->add_option("config", validate_path, "config file")->required();
    for (CLI::App* sub : {run_cmd, compare_cmd, fig2_cmd, fig3_cmd, validate_cmd})
        sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            const std::string text = read_text_file(run_path);
            if (ampsim::is_manifest_text(text)) {
                if (seed_opt->count() > 0)
                    throw std::runtime_error(
                        "--seed-override cannot apply to a manifest rerun; the manifest "
                        "pins the seed");
                const std::string dir = dir_opt->count() > 0 ? out_dir : "out";
                ampsim::rerun_from_manifest_text(text, run_path, dir, threads);
                std::cout << "manifest rerun complete: " << dir << "\n";
            } else {
                ampsim::ExperimentConfig cfg = ampsim::parse_experiment_config(text, run_path);
                if (seed_opt->count() > 0) cfg.seed = seed_override;
                if (dir_opt->count() > 0) cfg.out_dir = out_dir;
                const ampsim::RunResult res = ampsim::run_experiment(cfg, threads);
                print_channel_summary(res.report);
                std::cout << "wrote " << cfg.out_dir << "\n";
            }
        } else if (*compare_cmd) {
            ampsim::ExperimentConfig cfg =
                ampsim::load_experiment_config(compare_path);
            if (seed_opt->count() > 0) cfg.seed = seed_override;
            if (dir_opt->count() > 0) cfg.out_dir = out_dir;
            const ampsim::ComparisonRecord rec = ampsim::run_compare(cfg, threads);
            print_comparison_summary(rec);
            std::cout << "wrote " << cfg.out_dir << "\n";
        } else if (*fig2_cmd) {
            const std::uint64_t seed =
                seed_opt->count() > 0 ? seed_override : default_builtin_seed;
            const std::string dir = dir_opt->count() > 0 ? out_dir : "out";
            const ampsim::Fig2Record rec = ampsim::run_fig2(dir, seed, threads);
            std::cout << "total variation     " << rec.tv << "\n"
                      << "acceptance bound    " << rec.bound << "\n"
                      << "effective samples   " << rec.diffusion_effective_samples
                      << " (diffusion), " << rec.jump_effective_samples << " (jump)\n"
                      << "agreement           " << (rec.pass ? "yes" : "NO") << "\n"
                      << "wall time           " << rec.wall_seconds << " s\n"
                      << "wrote " << dir << "\n";
        } else if (*fig3_cmd) {
            const std::uint64_t seed =
                seed_opt->count() > 0 ? seed_override : default_builtin_seed;
            const std::string dir = dir_opt->count() > 0 ? out_dir : "out";
            const ampsim::ComparisonRecord rec = ampsim::run_fig3(dir, seed, threads);
            print_comparison_summary(rec);
            std::cout << "wrote " << dir << "\n";
        } else if (*validate_cmd) {
            const ampsim::ExperimentConfig cfg = ampsim::load_experiment_config(validate_path);
            if (cfg.kind == ampsim::AmplifierKind::pia ||
                cfg.kind == ampsim::AmplifierKind::pna) {
                std::cout << "analytic channel: no validity conditions apply\n";
                return 0;
            }
            const ampsim::ValidityReport v =
                ampsim::validity_check(cfg.laser, cfg.channel_time, cfg.strictness);
            std::cout << "adiabatic margin    " << v.adiabatic_margin
                      << (v.adiabatic_ok ? "  ok" : "  FAIL") << "\n"
                      << "trace-time margin   " << v.trace_time_margin
                      << (v.trace_time_ok ? "  ok" : "  FAIL") << "\n"
                      << "saturation margin   " << v.saturation_margin
                      << (v.saturation_ok ? "  ok" : "  FAIL") << "\n"
                      << "strictness          " << v.strictness << "\n";
            if (cfg.kind == ampsim::AmplifierKind::qjump)
                std::cout << "(margins describe the diffusion description; the jump solver "
                             "is exact)\n";
            if (!v.all_ok() && !cfg.override_validity) return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
