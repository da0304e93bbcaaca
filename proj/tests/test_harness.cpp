#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <ampsim/config.hpp>
#include <ampsim/experiment.hpp>
#include <ampsim/report.hpp>

using namespace ampsim;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("ampsim_harness_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        out[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return out;
}

PhotonDistribution parse_hist(const std::string& text) {
    PhotonDistribution d;
    std::istringstream is(text);
    long n;
    double p, err;
    while (is >> n >> p >> err) {
        REQUIRE(n == long(d.probs.size()));
        d.probs.push_back(p);
    }
    return d;
}

const char* laser_cfg_text =
    "[amplifier]\n"
    "kind = laser_fpe\n"
    "C = 30\n"
    "sigma0 = 0.05\n"
    "N = 1\n"
    "gamma = 1\n"
    "f = 1\n"
    "n_s = 15\n"
    "t = 0.1\n"
    "[input]\n"
    "kind = coherent\n"
    "alpha = 1.5\n"
    "[ensemble]\n"
    "samples = 1500\n"
    "dt = 0.001\n"
    "seed = 777\n";

}  // namespace

TEST_CASE("a complete configuration parses into typed fields") {
    auto cfg = parse_experiment_config(laser_cfg_text);
    REQUIRE(cfg.kind == AmplifierKind::laser_fpe);
    REQUIRE(cfg.laser.C == 30.0);
    REQUIRE(cfg.laser.sigma0 == 0.05);
    REQUIRE(cfg.laser.N == 1);
    REQUIRE(cfg.laser.n_s == 15.0);
    REQUIRE(cfg.channel_time == 0.1);
    REQUIRE_FALSE(cfg.override_validity);
    REQUIRE(cfg.input.kind == InputKind::coherent);
    REQUIRE(cfg.input.alpha == 1.5);
    REQUIRE(cfg.input.mean_photons() == Catch::Approx(2.25));
    REQUIRE(cfg.samples == 1500);
    REQUIRE(cfg.dt == 0.001);
    REQUIRE(cfg.seed == 777);
    REQUIRE(cfg.out_dir == "out");
    REQUIRE(cfg.config_text == laser_cfg_text);
}

TEST_CASE("configuration errors carry the file position") {
    auto fails_with = [](const std::string& text, const std::string& needle) {
        try {
            parse_experiment_config(text, "case.cfg");
            FAIL("expected a configuration error");
        } catch (const ConfigError& e) {
            INFO(e.what());
            REQUIRE(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    fails_with("[amplifier]\nkind = pia\ngain = 2\nbogus = 1\n[input]\nkind = coherent\n"
               "alpha = 1\n[ensemble]\nseed = 1\n",
               "bogus");
    fails_with("[amplifier]\nkind = pia\ngain = 2\ngain = 3\n", "duplicate");
    fails_with("kind = pia\n", "case.cfg:1");
    fails_with("[amplifier\nkind = pia\n", "case.cfg:1");
    fails_with("[amplifier]\nkind = warp\n", "kind");
    fails_with("[amplifier]\nkind = pia\ngain = fast\n", "expected a number");
    fails_with("[amplifier]\nkind = pia\ngain = 2\n[input]\nkind = coherent\nalpha = 1\n"
               "[ensemble]\n",
               "seed");
    // Ensemble sizing applies only to stochastic channels.
    fails_with("[amplifier]\nkind = pia\ngain = 2\n[input]\nkind = coherent\nalpha = 1\n"
               "[ensemble]\nseed = 1\nsamples = 100\n",
               "samples");
    fails_with("[amplifier]\nkind = pna\ngain = 2.5\n[input]\nkind = coherent\nalpha = 1\n"
               "[ensemble]\nseed = 1\n",
               "integer");
    fails_with("[amplifier]\nkind = qjump\nC = 1\nsigma0 = 0.2\nN = 1\ngamma = 1\nf = 1\n"
               "n_s = 2\nt = 1\n[input]\nkind = coherent\nalpha = 1\n[ensemble]\nseed = 1\n"
               "samples = 10\n",
               "n_max");
}

TEST_CASE("comments and blank lines are ignored") {
    auto cfg = parse_experiment_config(
        "# leading comment\n[amplifier]\nkind = pia  # trailing\ngain = 2\n\n"
        "[input]\nkind = fock\nm = 3\n[ensemble]\nseed = 9\n");
    REQUIRE(cfg.kind == AmplifierKind::pia);
    REQUIRE(cfg.input.kind == InputKind::fock);
    REQUIRE(cfg.input.fock_m == 3);
    REQUIRE(cfg.input.mean_photons() == 3.0);
    REQUIRE(cfg.input.photon_variance() == 0.0);
}

TEST_CASE("numbers survive the report format round trip") {
    for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 2.0098, 0.0,
                     123456789.123456789}) {
        const std::string s = format_number(v);
        REQUIRE(std::stod(s) == v);
    }
}

TEST_CASE("checksums match the reference vectors") {
    REQUIRE(fnv1a64("") == 0xcbf29ce484222325ULL);
    REQUIRE(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    REQUIRE(hex64(0xcbf29ce484222325ULL) == "cbf29ce484222325");
    REQUIRE(hex64(0x1ULL) == "0000000000000001");
}

TEST_CASE("ideal amplifier channel reproduces its closed-form figures") {
    auto cfg = parse_experiment_config(
        "[amplifier]\nkind = pia\ngain = 100\nidler_photons = 0\n[input]\nkind = coherent\n"
        "alpha = 10\n[ensemble]\nseed = 5\n");
    auto r = run_channel(cfg);
    REQUIRE(r.amplifier == "pia");
    REQUIRE(r.gain_linear == Catch::Approx(100.0).epsilon(1e-9));
    REQUIRE(r.noise_figure_linear == Catch::Approx(2.0098).margin(1e-6));
    REQUIRE(r.snr_in == Catch::Approx(200.0).epsilon(1e-12));
    REQUIRE(r.mean_bit0 == Catch::Approx(99.0).epsilon(1e-9));
    REQUIRE(r.mean_bit1 == Catch::Approx(10099.0).epsilon(1e-9));
    REQUIRE(r.ber > 0.0);
    REQUIRE(r.ber < 0.01);
    REQUIRE(r.mutual_information_bits > 0.9);
    REQUIRE(r.mean_bit0_se == 0.0);
    REQUIRE(r.n_steps == 0);
    REQUIRE_FALSE(r.has_validity);
}

TEST_CASE("number-gain channel output is exact to the rescaling") {
    auto cfg = parse_experiment_config(
        "[amplifier]\nkind = pna\ngain = 4\n[input]\nkind = coherent\nalpha = 3\n"
        "[ensemble]\nseed = 5\n");
    auto r = run_channel(cfg);
    REQUIRE(r.gain_linear == Catch::Approx(4.0).epsilon(1e-9));
    REQUIRE(r.ber == Catch::Approx(0.5 * std::exp(-9.0)).epsilon(1e-9));
    REQUIRE(r.threshold == 0);
    // Unit-gain comparison: identical error rate, bit for bit.
    auto unit = parse_experiment_config(
        "[amplifier]\nkind = pna\ngain = 1\n[input]\nkind = coherent\nalpha = 3\n"
        "[ensemble]\nseed = 5\n");
    auto r1 = run_channel(unit);
    REQUIRE(std::abs(r.ber - r1.ber) < 1e-15);
}

TEST_CASE("persisted scalars re-derive from the persisted histograms") {
    TempDir dir;
    auto cfg = parse_experiment_config(laser_cfg_text);
    cfg.out_dir = dir.str();
    auto run = run_experiment(cfg, 2);

    auto kvs = parse_kv(slurp(dir.path / "report.txt"));
    auto h0 = parse_hist(slurp(dir.path / "hist_bit0.txt"));
    auto h1 = parse_hist(slurp(dir.path / "hist_bit1.txt"));
    REQUIRE(h0.probs.size() == h1.probs.size());
    REQUIRE(long(h0.probs.size()) == std::stol(kvs.at("n_max")) + 1);

    auto decision = optimal_threshold(h0, h1);
    REQUIRE(decision.threshold == std::stoi(kvs.at("threshold")));
    REQUIRE(std::abs(decision.ber - std::stod(kvs.at("ber"))) < 1e-12);
    const double info = binary_mutual_information(decision.errors);
    REQUIRE(std::abs(info - std::stod(kvs.at("mutual_information_bits"))) < 1e-12);

    const double gain = std::stod(kvs.at("gain_linear"));
    REQUIRE(std::abs(std::stod(kvs.at("gain_db")) - 10.0 * std::log10(gain)) < 1e-12);
    const double snr_out = std::stod(kvs.at("snr_out"));
    const double s_out = std::stod(kvs.at("signal_out"));
    const double n_out = std::stod(kvs.at("noise_out"));
    REQUIRE(std::abs(snr_out - s_out * s_out / n_out) < 1e-9 * snr_out);
    REQUIRE(kvs.at("validity_ok") == "true");
    REQUIRE(kvs.count("wall_seconds") == 0);
    REQUIRE(run.report.wall_seconds > 0.0);
}

TEST_CASE("manifest checksums cover the files as written") {
    TempDir dir;
    auto cfg = parse_experiment_config(
        "[amplifier]\nkind = pia\ngain = 5\n[input]\nkind = coherent\nalpha = 2\n"
        "[ensemble]\nseed = 123\n");
    cfg.out_dir = dir.str();
    run_experiment(cfg);

    const std::string manifest = slurp(dir.path / "manifest.txt");
    REQUIRE(is_manifest_text(manifest));
    auto kvs = parse_kv(manifest);
    REQUIRE(kvs.at("experiment") == "run");
    REQUIRE(kvs.at("seed") == "123");
    REQUIRE(kvs.at("version") == version_string);
    int checksummed = 0;
    for (const auto& [key, value] : kvs) {
        if (key.rfind("checksum ", 0) != 0) continue;
        const std::string name = key.substr(9);
        REQUIRE(hex64(fnv1a64(slurp(dir.path / name))) == value);
        ++checksummed;
    }
    REQUIRE(checksummed == 3);
    // The embedded config is the input text, verbatim.
    const auto begin = manifest.find("config_begin\n");
    const auto end = manifest.find("config_end\n");
    REQUIRE(begin != std::string::npos);
    const std::string embedded =
        manifest.substr(begin + 13, end - begin - 13);
    REQUIRE(embedded == cfg.config_text);
}

TEST_CASE("rerunning a manifest reproduces every byte at any thread count") {
    TempDir a, b, c;
    auto cfg = parse_experiment_config(laser_cfg_text);
    cfg.out_dir = a.str();
    run_experiment(cfg, 1);
    const std::string manifest = slurp(a.path / "manifest.txt");

    rerun_from_manifest_text(manifest, "manifest.txt", b.str(), 3);
    rerun_from_manifest_text(manifest, "manifest.txt", c.str(), 1);
    for (const char* name : {"report.txt", "hist_bit0.txt", "hist_bit1.txt", "manifest.txt"}) {
        REQUIRE(slurp(b.path / name) == slurp(a.path / name));
        REQUIRE(slurp(c.path / name) == slurp(a.path / name));
    }
}

TEST_CASE("the seed steers the stochastic channels") {
    auto cfg = parse_experiment_config(laser_cfg_text);
    auto r1 = run_channel(cfg, 2);
    cfg.seed = 778;
    auto r2 = run_channel(cfg, 2);
    REQUIRE(r1.mean_bit1 != r2.mean_bit1);
    REQUIRE(render_histogram(r1.hist_bit1) != render_histogram(r2.hist_bit1));
}

TEST_CASE("jump-operator channel runs end to end deterministically") {
    auto cfg = parse_experiment_config(
        "[amplifier]\nkind = qjump\nC = 1\nsigma0 = 0.2\nN = 1\ngamma = 1\nf = 1\nn_s = 2\n"
        "t = 2\n[input]\nkind = coherent\nalpha = 2\n[ensemble]\nsamples = 60\nseed = 31\n"
        "[analysis]\nn_max = 24\n");
    auto r1 = run_channel(cfg, 1);
    auto r4 = run_channel(cfg, 4);
    REQUIRE(render_report(r1) == render_report(r4));
    REQUIRE(r1.amplifier == "qjump");
    REQUIRE(r1.hist_bit1.dist.probs.size() == 25);
    REQUIRE(r1.n_steps > 0);
    REQUIRE(r1.dt_used > 0.0);
    REQUIRE(r1.mean_bit1_se > 0.0);
    // The lossy below-threshold cavity attenuates the input.
    REQUIRE(r1.gain_linear < 1.0);
    REQUIRE(r1.gain_linear > 0.0);
}

TEST_CASE("fock input through the jump-operator channel") {
    auto cfg = parse_experiment_config(
        "[amplifier]\nkind = qjump\nC = 1\nsigma0 = 0.2\nN = 1\ngamma = 1\nf = 1\nn_s = 2\n"
        "t = 1\n[input]\nkind = fock\nm = 2\n[ensemble]\nsamples = 40\nseed = 8\n"
        "[analysis]\nn_max = 16\n");
    auto r = run_channel(cfg, 2);
    REQUIRE(r.input_kind == "fock");
    REQUIRE(r.signal_in == 2.0);
    REQUIRE(std::isnan(r.noise_figure_linear) == false);
}

TEST_CASE("saturated-laser comparison shares grid and input") {
    TempDir dir;
    auto cfg = parse_experiment_config(
        "[amplifier]\nkind = laser_fpe\nC = 4.5\nsigma0 = 0.5\nN = 55\ngamma = 1\nf = 0.001\n"
        "n_s = 55\nt = 0.2\noverride_validity = true\n[input]\nkind = coherent\nalpha = 1\n"
        "[ensemble]\nsamples = 8000\ndt = 0.001\nseed = 2024\n[output]\ndir = " +
        dir.str() + "\n");
    auto rec = run_compare(cfg, 2);
    REQUIRE(rec.matched_gain_linear == Catch::Approx(rec.laser.gain_linear));
    REQUIRE(rec.pia.amplifier == "pia");
    REQUIRE(rec.pia.n_max == rec.laser.n_max);
    REQUIRE(rec.pia.hist_bit0.dist.probs.size() == rec.laser.hist_bit0.dist.probs.size());
    REQUIRE(rec.small_signal_gain_linear > 1.0);

    // Far below saturation the laser behaves as a linear amplifier whose
    // idler occupancy follows min{C(1+s0), C(1-s0)+1}/|2Cs0 - 1|.
    const LaserParams p{4.5, 0.5, 55, 1.0, 0.001, 55.0};
    auto eq = linear_equivalent_pia(p, 0.2);
    REQUIRE(eq.idler_photons == Catch::Approx((4.5 * 0.5 + 1.0) / 3.5).margin(1e-12));
    const double g = eq.gain_n;
    const double spontaneous = (g - 1.0) * (eq.idler_photons + 1.0);
    REQUIRE(rec.laser.mean_bit0 == Catch::Approx(spontaneous).epsilon(0.08));
    const double t_noise = spontaneous;
    REQUIRE(rec.laser.var_bit0 == Catch::Approx(t_noise * (t_noise + 1.0)).epsilon(0.20));

    for (const char* name :
         {"comparison.txt", "laser_report.txt", "laser_hist_bit0.txt", "laser_hist_bit1.txt",
          "pia_report.txt", "pia_hist_bit0.txt", "pia_hist_bit1.txt", "manifest.txt"}) {
        REQUIRE(fs::exists(dir.path / name));
    }
    auto kvs = parse_kv(slurp(dir.path / "manifest.txt"));
    REQUIRE(kvs.at("experiment") == "compare");
}

TEST_CASE("comparison requires the saturable-laser channel") {
    auto cfg = parse_experiment_config(
        "[amplifier]\nkind = pia\ngain = 2\n[input]\nkind = coherent\nalpha = 1\n"
        "[ensemble]\nseed = 1\n");
    REQUIRE_THROWS_AS(compare_at_matched_gain(cfg), ConfigError);
}

TEST_CASE("diffusion-versus-jump validation record is internally consistent") {
    Fig2Budgets small;
    small.fpe_samples = 2000;
    small.fpe_relax_time = 12.0;
    small.fpe_dt = 2e-3;
    small.n_max = 110;
    small.qj_burn_in = 10.5;
    small.qj_avg_time = 10.0;
    small.qj_trajectories = 4;
    auto rec = run_fig2_validation(99, 2, small);
    REQUIRE(rec.tv >= 0.0);
    REQUIRE(rec.tv <= 1.0);
    REQUIRE(rec.combined_statistical_error ==
            Catch::Approx(rec.tv_noise_mean + 2.0 * rec.tv_noise_sd));
    REQUIRE(rec.bound == Catch::Approx(0.05 + rec.combined_statistical_error));
    REQUIRE(rec.pass == (rec.tv <= rec.bound));
    REQUIRE(rec.diffusion.dist.probs.size() == 111);
    REQUIRE(rec.jump.dist.probs.size() == 111);
    REQUIRE(rec.diffusion_effective_samples == 2000.0);
    REQUIRE(rec.jump_effective_samples > 0.0);
    auto files = fig2_files(rec);
    REQUIRE(files.size() == 3);
    REQUIRE(files[0].name == "fig2_summary.txt");
    auto kvs = parse_kv(files[0].content);
    REQUIRE(std::stod(kvs.at("total_variation")) == rec.tv);
    REQUIRE(kvs.count("wall_seconds") == 0);
}

TEST_CASE("manifests from another program version are refused") {
    std::string manifest = "# ampsim manifest v1\nversion = 0.0.1\nexperiment = run\n"
                           "seed = 1\nconfig_begin\nconfig_end\n";
    REQUIRE_THROWS_AS(parse_manifest(manifest, "old.txt"), ConfigError);
    std::string unknown = std::string("# ampsim manifest v1\nversion = ") + version_string +
                          "\nexperiment = destroy\nseed = 1\nconfig_begin\nconfig_end\n";
    TempDir dir;
    REQUIRE_THROWS_AS(rerun_from_manifest_text(unknown, "bad.txt", dir.str()), ConfigError);
    REQUIRE_FALSE(is_manifest_text(laser_cfg_text));
}

TEST_CASE("canonical comparison configuration is generated from the seed") {
    const std::string text = fig3_config_text(4242);
    REQUIRE(text.find("seed = 4242") != std::string::npos);
    auto cfg = parse_experiment_config(text, "<generated>");
    REQUIRE(cfg.kind == AmplifierKind::laser_fpe);
    REQUIRE(cfg.samples == 20000);
    REQUIRE(cfg.override_validity);
    REQUIRE(cfg.laser.f == 0.001);
    REQUIRE(cfg.input.alpha == 3.95);
}
