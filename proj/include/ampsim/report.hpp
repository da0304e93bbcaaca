#pragma once

// Persistence layer for experiment outputs: a flat report file with stable key
// order, per-bit histogram files for external plotters, and a run manifest
// that embeds the config, seed and per-file checksums so any run can be
// reproduced bit-exactly. All numbers are printed with std::to_chars at 17
// significant digits: locale-independent and round-trip exact, so identical
// inputs give byte-identical files on every platform. Wall-clock time is
// deliberately kept out of every persisted file; it goes to stdout.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "laser.hpp"
#include "photon_dist.hpp"
#include "version.hpp"

namespace ampsim {

inline std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    if (res.ec != std::errc()) throw std::runtime_error("format_number: conversion failed");
    return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

struct HistogramWithErrors {
    PhotonDistribution dist;
    std::vector<double> std_error;  // zero for analytic channels
};

struct ChannelReport {
    std::string amplifier;
    std::string input_kind;
    double input_alpha = 0.0;
    int input_m = 0;
    std::uint64_t seed = 0;
    int n_max = 0;

    int threshold = 0;
    double ber = 0.0;
    double q01 = 0.0;
    double q10 = 0.0;
    double mutual_information_bits = 0.0;

    double gain_linear = 0.0;
    double gain_db = 0.0;
    double noise_figure_linear = 0.0;
    double noise_figure_db = 0.0;

    double signal_in = 0.0;
    double noise_in = 0.0;
    double snr_in = 0.0;
    double signal_out = 0.0;
    double noise_out = 0.0;
    double snr_out = 0.0;

    double mean_bit0 = 0.0;
    double var_bit0 = 0.0;
    double mean_bit1 = 0.0;
    double var_bit1 = 0.0;
    double mean_bit0_se = 0.0;  // statistical errors; zero for analytic channels
    double var_bit0_se = 0.0;
    double mean_bit1_se = 0.0;
    double var_bit1_se = 0.0;

    double dt_used = 0.0;  // ensemble channels only; 0 when analytic
    long n_steps = 0;
    int halvings = 0;

    bool has_validity = false;
    ValidityReport validity;
    bool validity_overridden = false;

    HistogramWithErrors hist_bit0;
    HistogramWithErrors hist_bit1;
    std::vector<std::string> notes;

    double wall_seconds = 0.0;  // never written to checksummed files
};

namespace detail {

inline void kv(std::string& out, std::string_view key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
}

inline void kv(std::string& out, std::string_view key, double value) {
    kv(out, key, format_number(value));
}

}  // namespace detail

inline std::string render_report(const ChannelReport& r) {
    std::string out;
    detail::kv(out, "amplifier", r.amplifier);
    detail::kv(out, "input_kind", r.input_kind);
    if (r.input_kind == "coherent")
        detail::kv(out, "input_alpha", r.input_alpha);
    else
        detail::kv(out, "input_m", std::to_string(r.input_m));
    detail::kv(out, "seed", std::to_string(r.seed));
    detail::kv(out, "n_max", std::to_string(r.n_max));
    detail::kv(out, "threshold", std::to_string(r.threshold));
    detail::kv(out, "ber", r.ber);
    detail::kv(out, "q01", r.q01);
    detail::kv(out, "q10", r.q10);
    detail::kv(out, "mutual_information_bits", r.mutual_information_bits);
    detail::kv(out, "gain_linear", r.gain_linear);
    detail::kv(out, "gain_db", r.gain_db);
    detail::kv(out, "noise_figure_linear", r.noise_figure_linear);
    detail::kv(out, "noise_figure_db", r.noise_figure_db);
    detail::kv(out, "signal_in", r.signal_in);
    detail::kv(out, "noise_in", r.noise_in);
    detail::kv(out, "snr_in", r.snr_in);
    detail::kv(out, "signal_out", r.signal_out);
    detail::kv(out, "noise_out", r.noise_out);
    detail::kv(out, "snr_out", r.snr_out);
    detail::kv(out, "mean_bit0", r.mean_bit0);
    detail::kv(out, "var_bit0", r.var_bit0);
    detail::kv(out, "mean_bit1", r.mean_bit1);
    detail::kv(out, "var_bit1", r.var_bit1);
    detail::kv(out, "mean_bit0_se", r.mean_bit0_se);
    detail::kv(out, "var_bit0_se", r.var_bit0_se);
    detail::kv(out, "mean_bit1_se", r.mean_bit1_se);
    detail::kv(out, "var_bit1_se", r.var_bit1_se);
    detail::kv(out, "tail_bit0", r.hist_bit0.dist.tail_mass);
    detail::kv(out, "tail_bit1", r.hist_bit1.dist.tail_mass);
    if (r.n_steps > 0) {
        detail::kv(out, "dt_used", r.dt_used);
        detail::kv(out, "n_steps", std::to_string(r.n_steps));
        detail::kv(out, "halvings", std::to_string(r.halvings));
    }
    if (r.has_validity) {
        detail::kv(out, "validity_ok", r.validity.all_ok() ? "true" : "false");
        detail::kv(out, "validity_overridden", r.validity_overridden ? "true" : "false");
        detail::kv(out, "validity_adiabatic_margin", r.validity.adiabatic_margin);
        detail::kv(out, "validity_trace_time_margin", r.validity.trace_time_margin);
        detail::kv(out, "validity_saturation_margin", r.validity.saturation_margin);
        detail::kv(out, "validity_strictness", r.validity.strictness);
    }
    for (const auto& note : r.notes) detail::kv(out, "note", note);
    return out;
}

// Plain numeric columns "n p err", one row per bin, n = 0..n_max.
inline std::string render_histogram(const HistogramWithErrors& h) {
    if (!h.std_error.empty() && h.std_error.size() != h.dist.probs.size())
        throw std::invalid_argument("render_histogram: error column length mismatch");
    std::string out;
    for (std::size_t n = 0; n < h.dist.probs.size(); ++n) {
        out += std::to_string(n);
        out += ' ';
        out += format_number(h.dist.probs[n]);
        out += ' ';
        out += format_number(h.std_error.empty() ? 0.0 : h.std_error[n]);
        out += '\n';
    }
    return out;
}

struct OutputFile {
    std::string name;
    std::string content;
};

inline constexpr const char* manifest_marker = "# ampsim manifest v1";

// The manifest is itself a config-style text file; the original config is
// embedded verbatim between the config_begin / config_end fence lines.
inline std::string render_manifest(const std::string& experiment, std::uint64_t seed,
                                   const std::string& config_text,
                                   const std::vector<OutputFile>& files) {
    std::string out = manifest_marker;
    out += '\n';
    detail::kv(out, "version", version_string);
    detail::kv(out, "experiment", experiment);
    detail::kv(out, "seed", std::to_string(seed));
    out += "config_begin\n";
    out += config_text;
    if (!config_text.empty() && config_text.back() != '\n') out += '\n';
    out += "config_end\n";
    for (const auto& f : files)
        detail::kv(out, "checksum " + f.name, hex64(fnv1a64(f.content)));
    return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

// Writes the checksummed files, then manifest.txt last.
inline void persist_run(const std::string& dir, const std::string& experiment,
                        std::uint64_t seed, const std::string& config_text,
                        const std::vector<OutputFile>& files) {
    const std::filesystem::path root(dir);
    std::filesystem::create_directories(root);
    for (const auto& f : files) write_file(root / f.name, f.content);
    write_file(root / "manifest.txt", render_manifest(experiment, seed, config_text, files));
}

// Checksummed file set of a single channel run.
inline std::vector<OutputFile> report_files(const ChannelReport& r,
                                            const std::string& prefix = "") {
    std::vector<OutputFile> files;
    files.push_back({prefix.empty() ? "report.txt" : prefix + "_report.txt", render_report(r)});
    files.push_back({prefix.empty() ? "hist_bit0.txt" : prefix + "_hist_bit0.txt",
                     render_histogram(r.hist_bit0)});
    files.push_back({prefix.empty() ? "hist_bit1.txt" : prefix + "_hist_bit1.txt",
                     render_histogram(r.hist_bit1)});
    return files;
}

}  // namespace ampsim
