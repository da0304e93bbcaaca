// Prints two classic direct-detection facts about ideal amplifiers: the noise
// figure of a linear amplifier on a bright coherent input climbing to its
// 3 dB high-gain limit, and the number-rescaling amplifier leaving the bit
// error rate untouched at any gain.

#include <iostream>

#include <ampsim/infotheory.hpp>
#include <ampsim/photon_dist.hpp>
#include <ampsim/pia.hpp>

int main() {
    using namespace ampsim;

    const double alpha_sq = 100.0;
    MomentSet coherent_in;
    coherent_in.mean_amplitude = {std::sqrt(alpha_sq), 0.0};
    coherent_in.mean_photons = alpha_sq;
    coherent_in.photon_variance = alpha_sq;
    coherent_in.fano = 1.0;

    std::cout << "linear amplifier, coherent input with " << alpha_sq << " photons\n";
    std::cout << "  gain      noise figure\n";
    for (double g : {1.5, 2.0, 5.0, 10.0, 100.0, 1000.0}) {
        PiaParams p;
        p.gain_n = g;
        const NoiseFigure nf = pia_noise_figure(coherent_in, {alpha_sq, 0.0}, p);
        std::cout << "  " << g << "\t    " << nf.db << " dB\n";
    }
    std::cout << "  (high-gain limit: 3.01 dB)\n\n";

    const double weak = 9.0;
    const PhotonDistribution in1 = coherent_number_dist(weak, 60);
    std::cout << "number-rescaling amplifier, coherent input with " << weak << " photons\n";
    std::cout << "  gain      bit error rate\n";
    for (long g : {1L, 2L, 5L, 10L}) {
        const PhotonDistribution out1 = pna_output(in1, static_cast<double>(g));
        PhotonDistribution out0;
        out0.probs.assign(out1.probs.size(), 0.0);
        out0.probs[0] = 1.0;
        const ThresholdDecision dec = optimal_threshold(out0, out1);
        std::cout << "  " << g << "\t    " << dec.ber << "\n";
    }
    std::cout << "  (error rate is gain-independent)\n";
    return 0;
}
