#pragma once

// Declarative experiment configuration. A run is described by a small INI-style
// text file with [section] headers and key = value lines; '#' starts a comment.
// Physics parameters have no defaults, numerical knobs (dt, strictness) do.
// Errors carry file:line positions. The verbatim file text is kept so the run
// manifest can embed it for bit-exact reruns.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "laser.hpp"
#include "pia.hpp"

namespace ampsim {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class AmplifierKind { pia, pna, laser_fpe, qjump };

inline const char* to_string(AmplifierKind k) {
    switch (k) {
        case AmplifierKind::pia: return "pia";
        case AmplifierKind::pna: return "pna";
        case AmplifierKind::laser_fpe: return "laser_fpe";
        case AmplifierKind::qjump: return "qjump";
    }
    return "?";
}

enum class InputKind { coherent, fock };

// Bit-"1" input state; bit "0" is always vacuum.
struct InputSpec {
    InputKind kind = InputKind::coherent;
    double alpha = 0.0;  // real coherent amplitude, mean photons alpha^2
    int fock_m = 0;

    double mean_photons() const {
        return kind == InputKind::coherent ? alpha * alpha : static_cast<double>(fock_m);
    }
    double photon_variance() const {
        return kind == InputKind::coherent ? alpha * alpha : 0.0;
    }
    // <a^2> of the input state (real amplitude convention).
    double a_squared() const {
        return kind == InputKind::coherent ? alpha * alpha : 0.0;
    }
};

struct ExperimentConfig {
    AmplifierKind kind = AmplifierKind::pia;
    PiaParams pia;       // pia and pna (gain_n holds the integer pna gain)
    LaserParams laser;   // laser_fpe and qjump
    double channel_time = 0.0;
    bool override_validity = false;
    InputSpec input;
    std::size_t samples = 0;
    double dt = 0.0;     // 0 = automatic step control
    std::uint64_t seed = 0;
    int n_max = 0;       // photon cutoff; 0 = automatic (qjump requires explicit)
    double strictness = default_strictness;
    std::string out_dir = "out";
    std::string config_text;    // verbatim source for the manifest
    std::string source_label;   // path used in error messages
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

struct ConfigEntry {
    std::string section;
    std::string key;
    std::string value;
    int line = 0;
    mutable bool used = false;
};

struct ParsedConfig {
    std::string label;
    std::string text;
    std::vector<ConfigEntry> entries;
};

[[noreturn]] inline void config_fail(const std::string& label, int line, const std::string& msg) {
    throw ConfigError(label + ":" + std::to_string(line) + ": " + msg);
}

inline ParsedConfig parse_config_text(std::string text, std::string label) {
    ParsedConfig pc;
    pc.label = std::move(label);
    pc.text = std::move(text);
    std::string section;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= pc.text.size()) {
        std::size_t eol = pc.text.find('\n', pos);
        if (eol == std::string::npos) eol = pc.text.size();
        std::string_view line(pc.text.data() + pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) {
            if (pos > pc.text.size()) break;
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                config_fail(pc.label, line_no, "malformed section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (section.empty()) config_fail(pc.label, line_no, "empty section name");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            config_fail(pc.label, line_no, "expected key = value");
        if (section.empty())
            config_fail(pc.label, line_no, "key outside any [section]");
        ConfigEntry e;
        e.section = section;
        e.key = std::string(trim(line.substr(0, eq)));
        e.value = std::string(trim(line.substr(eq + 1)));
        e.line = line_no;
        if (e.key.empty()) config_fail(pc.label, line_no, "empty key");
        if (e.value.empty()) config_fail(pc.label, line_no, "empty value for key '" + e.key + "'");
        for (const auto& prev : pc.entries)
            if (prev.section == e.section && prev.key == e.key)
                config_fail(pc.label, line_no,
                            "duplicate key '" + e.key + "' in [" + e.section + "]");
        pc.entries.push_back(std::move(e));
    }
    return pc;
}

class EntryReader {
public:
    explicit EntryReader(const ParsedConfig& pc) : pc_(pc) {}

    const ConfigEntry* find(std::string_view section, std::string_view key) const {
        for (const auto& e : pc_.entries)
            if (e.section == section && e.key == key) {
                e.used = true;
                return &e;
            }
        return nullptr;
    }

    [[noreturn]] void fail(const ConfigEntry& e, const std::string& msg) const {
        config_fail(pc_.label, e.line, msg);
    }

    [[noreturn]] void fail_missing(std::string_view section, std::string_view key) const {
        throw ConfigError(pc_.label + ": missing required key '" + std::string(key) + "' in [" +
                          std::string(section) + "]");
    }

    std::string require_string(std::string_view section, std::string_view key) const {
        const ConfigEntry* e = find(section, key);
        if (!e) fail_missing(section, key);
        return e->value;
    }

    double require_number(std::string_view section, std::string_view key) const {
        const ConfigEntry* e = find(section, key);
        if (!e) fail_missing(section, key);
        return to_double(*e);
    }

    std::optional<double> optional_number(std::string_view section, std::string_view key) const {
        const ConfigEntry* e = find(section, key);
        if (!e) return std::nullopt;
        return to_double(*e);
    }

    int require_int(std::string_view section, std::string_view key) const {
        const ConfigEntry* e = find(section, key);
        if (!e) fail_missing(section, key);
        return to_int(*e);
    }

    std::optional<int> optional_int(std::string_view section, std::string_view key) const {
        const ConfigEntry* e = find(section, key);
        if (!e) return std::nullopt;
        return to_int(*e);
    }

    std::uint64_t require_u64(std::string_view section, std::string_view key) const {
        const ConfigEntry* e = find(section, key);
        if (!e) fail_missing(section, key);
        std::uint64_t out = 0;
        if (!from_chars_all(e->value, out)) fail(*e, "expected an unsigned integer");
        return out;
    }

    bool flag_or(std::string_view section, std::string_view key, bool fallback) const {
        const ConfigEntry* e = find(section, key);
        if (!e) return fallback;
        if (e->value == "true") return true;
        if (e->value == "false") return false;
        fail(*e, "expected true or false");
    }

    // Every entry must have been consumed; anything left is a typo or a key
    // the selected amplifier kind does not take.
    void reject_unused() const {
        for (const auto& e : pc_.entries)
            if (!e.used)
                fail(e, "unknown or inapplicable key '" + e.key + "' in [" + e.section + "]");
    }

private:
    template <class T>
    static bool from_chars_all(const std::string& v, T& out) {
        const char* first = v.data();
        const char* last = v.data() + v.size();
        auto [ptr, ec] = std::from_chars(first, last, out);
        return ec == std::errc() && ptr == last;
    }

    double to_double(const ConfigEntry& e) const {
        double out = 0.0;
        if (!from_chars_all(e.value, out)) fail(e, "expected a number, got '" + e.value + "'");
        return out;
    }

    int to_int(const ConfigEntry& e) const {
        int out = 0;
        if (!from_chars_all(e.value, out)) fail(e, "expected an integer, got '" + e.value + "'");
        return out;
    }

    const ParsedConfig& pc_;
};

}  // namespace detail

inline ExperimentConfig build_experiment_config(const detail::ParsedConfig& pc) {
    detail::EntryReader r(pc);
    ExperimentConfig cfg;
    cfg.config_text = pc.text;
    cfg.source_label = pc.label;

    const detail::ConfigEntry* kind_entry = r.find("amplifier", "kind");
    if (!kind_entry) r.fail_missing("amplifier", "kind");
    const std::string& kind = kind_entry->value;
    if (kind == "pia") cfg.kind = AmplifierKind::pia;
    else if (kind == "pna") cfg.kind = AmplifierKind::pna;
    else if (kind == "laser_fpe") cfg.kind = AmplifierKind::laser_fpe;
    else if (kind == "qjump") cfg.kind = AmplifierKind::qjump;
    else r.fail(*kind_entry, "unknown amplifier kind '" + kind + "'");

    const bool is_laser = cfg.kind == AmplifierKind::laser_fpe || cfg.kind == AmplifierKind::qjump;

    if (cfg.kind == AmplifierKind::pia) {
        cfg.pia.gain_n = r.require_number("amplifier", "gain");
        cfg.pia.idler_photons = r.optional_number("amplifier", "idler_photons").value_or(0.0);
    } else if (cfg.kind == AmplifierKind::pna) {
        const detail::ConfigEntry* g = r.find("amplifier", "gain");
        if (!g) r.fail_missing("amplifier", "gain");
        cfg.pia.gain_n = r.require_number("amplifier", "gain");
        if (cfg.pia.gain_n < 1.0 || cfg.pia.gain_n != std::floor(cfg.pia.gain_n))
            r.fail(*g, "pna gain must be a positive integer");
    } else {
        cfg.laser.C = r.require_number("amplifier", "C");
        cfg.laser.sigma0 = r.require_number("amplifier", "sigma0");
        cfg.laser.N = r.require_int("amplifier", "N");
        cfg.laser.gamma = r.require_number("amplifier", "gamma");
        cfg.laser.f = r.require_number("amplifier", "f");
        cfg.laser.n_s = r.require_number("amplifier", "n_s");
        const detail::ConfigEntry* t = r.find("amplifier", "t");
        if (!t) r.fail_missing("amplifier", "t");
        cfg.channel_time = r.require_number("amplifier", "t");
        if (!(cfg.channel_time > 0.0)) r.fail(*t, "channel time must be positive");
        cfg.override_validity = r.flag_or("amplifier", "override_validity", false);
    }

    const detail::ConfigEntry* input_kind = r.find("input", "kind");
    if (!input_kind) r.fail_missing("input", "kind");
    if (input_kind->value == "coherent") {
        cfg.input.kind = InputKind::coherent;
        const detail::ConfigEntry* a = r.find("input", "alpha");
        if (!a) r.fail_missing("input", "alpha");
        cfg.input.alpha = r.require_number("input", "alpha");
        if (cfg.input.alpha < 0.0) r.fail(*a, "alpha must be non-negative");
    } else if (input_kind->value == "fock") {
        cfg.input.kind = InputKind::fock;
        const detail::ConfigEntry* m = r.find("input", "m");
        if (!m) r.fail_missing("input", "m");
        cfg.input.fock_m = r.require_int("input", "m");
        if (cfg.input.fock_m < 0) r.fail(*m, "m must be non-negative");
    } else {
        r.fail(*input_kind, "unknown input kind '" + input_kind->value + "'");
    }

    cfg.seed = r.require_u64("ensemble", "seed");
    if (is_laser) {
        const detail::ConfigEntry* s = r.find("ensemble", "samples");
        if (!s) r.fail_missing("ensemble", "samples");
        const int samples = r.require_int("ensemble", "samples");
        if (samples < 2) r.fail(*s, "need at least 2 samples");
        cfg.samples = static_cast<std::size_t>(samples);
        if (auto dt = r.optional_number("ensemble", "dt")) {
            const detail::ConfigEntry* e = r.find("ensemble", "dt");
            if (!(*dt > 0.0)) r.fail(*e, "dt must be positive");
            cfg.dt = *dt;
        }
    }

    if (auto n = r.optional_int("analysis", "n_max")) {
        const detail::ConfigEntry* e = r.find("analysis", "n_max");
        if (*n < 1) r.fail(*e, "n_max must be at least 1");
        cfg.n_max = *n;
    } else if (cfg.kind == AmplifierKind::qjump) {
        r.fail_missing("analysis", "n_max");
    }
    if (is_laser) {
        if (auto s = r.optional_number("analysis", "strictness")) {
            const detail::ConfigEntry* e = r.find("analysis", "strictness");
            if (!(*s > 0.0)) r.fail(*e, "strictness must be positive");
            cfg.strictness = *s;
        }
    }

    if (const detail::ConfigEntry* d = r.find("output", "dir")) cfg.out_dir = d->value;

    r.reject_unused();

    try {
        if (cfg.kind == AmplifierKind::pia || cfg.kind == AmplifierKind::pna)
            validate(cfg.pia);
        else
            validate(cfg.laser);
    } catch (const std::exception& e) {
        throw ConfigError(pc.label + ": " + e.what());
    }
    return cfg;
}

inline ExperimentConfig parse_experiment_config(std::string text,
                                                std::string label = "<config>") {
    return build_experiment_config(detail::parse_config_text(std::move(text), std::move(label)));
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_experiment_config(ss.str(), path);
}

}  // namespace ampsim
