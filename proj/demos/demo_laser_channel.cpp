// Runs a small saturated-laser binary channel end to end from an inline
// config and prints the resulting channel quantities next to the ideal
// amplifier at the same measured gain.

#include <iostream>

#include <ampsim/experiment.hpp>

int main() {
    using namespace ampsim;

    const std::string config_text =
        "[amplifier]\n"
        "kind = laser_fpe\n"
        "C = 4.5\n"
        "sigma0 = 1\n"
        "N = 55\n"
        "gamma = 1\n"
        "f = 0.001\n"
        "n_s = 55\n"
        "t = 0.2\n"
        "override_validity = true\n"
        "[input]\n"
        "kind = coherent\n"
        "alpha = 3.95\n"
        "[ensemble]\n"
        "samples = 4000\n"
        "dt = 0.001\n"
        "seed = 7\n";

    try {
        const ExperimentConfig cfg = parse_experiment_config(config_text, "<demo>");
        const ComparisonRecord rec = compare_at_matched_gain(cfg, 1);
        std::cout << "laser channel (" << rec.laser.n_steps << " steps of dt = "
                  << rec.laser.dt_used << ")\n"
                  << "  measured gain   " << rec.matched_gain_db << " dB\n"
                  << "  unsaturated     " << rec.small_signal_gain_db << " dB\n"
                  << "  noise figure    " << rec.laser.noise_figure_db << " dB\n"
                  << "  bit error rate  " << rec.laser.ber << "\n"
                  << "  information     " << rec.laser.mutual_information_bits << " bits\n"
                  << "ideal amplifier at the same gain\n"
                  << "  noise figure    " << rec.pia.noise_figure_db << " dB\n"
                  << "  bit error rate  " << rec.pia.ber << "\n"
                  << "  information     " << rec.pia.mutual_information_bits << " bits\n"
                  << "bit-0 output variance: laser " << rec.laser.var_bit0 << " vs ideal "
                  << rec.pia.var_bit0 << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
