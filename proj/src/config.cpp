#include "bpl/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include "bpl/errors.hpp"
#include "text_util.hpp"

namespace bpl {

namespace {

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto piece = text::trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
        if (!piece.empty()) out.emplace_back(piece);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

// Splits "12.5mm" or "12.5 mm" into number and unit.
std::pair<std::string, std::string> number_and_unit(std::string_view s) {
    s = text::trim(s);
    const auto sp = s.find_first_of(" \t");
    if (sp != std::string_view::npos) {
        return {std::string(text::trim(s.substr(0, sp))), std::string(text::trim(s.substr(sp)))};
    }
    if (s.starts_with("inf") || s.starts_with("+inf") || s.starts_with("-inf")) {
        const auto n = s.find("inf") + 3;
        return {std::string(s.substr(0, n)), std::string(s.substr(n))};
    }
    std::size_t i = 0;
    while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.' || s[i] == '-' ||
                            s[i] == '+' || ((s[i] == 'e' || s[i] == 'E') && i + 1 < s.size() &&
                                            (std::isdigit(static_cast<unsigned char>(s[i + 1])) ||
                                             s[i + 1] == '-' || s[i + 1] == '+')))) {
        ++i;
    }
    return {std::string(s.substr(0, i)), std::string(s.substr(i))};
}

double length_unit(const std::string& unit) {
    if (unit == "m") return 1.0;
    if (unit == "cm") return 1e-2;
    if (unit == "mm") return 1e-3;
    if (unit == "um" || unit == "\xC2\xB5m" || unit == "\xCE\xBCm") return 1e-6;
    if (unit == "nm") return 1e-9;
    if (unit.empty()) throw ConfigError("missing length unit (m, cm, mm, um, nm)");
    throw ConfigError("unknown length unit '" + unit + "'");
}

double parse_angle(const std::string& value) {
    const auto [num, unit] = number_and_unit(value);
    const auto v = text::parse_double(num);
    if (!v) throw ConfigError("bad angle '" + value + "'");
    if (unit == "deg") return *v * std::numbers::pi / 180.0;
    if (unit == "rad") return *v;
    throw ConfigError("angle needs a deg or rad unit: '" + value + "'");
}

double parse_fraction(const std::string& s) {
    const auto slash = s.find('/');
    if (slash == std::string::npos) {
        const auto v = text::parse_double(s);
        if (!v) throw ConfigError("bad fraction '" + s + "'");
        return *v;
    }
    const auto a = text::parse_double(s.substr(0, slash));
    const auto b = text::parse_double(s.substr(slash + 1));
    if (!a || !b || *b == 0.0) throw ConfigError("bad fraction '" + s + "'");
    return *a / *b;
}

std::vector<int> parse_paths(const std::string& s) {
    std::vector<int> out;
    for (const auto& p : split_list(s)) {
        const auto v = text::parse_int<int>(p);
        if (!v || *v < 0) throw ConfigError("bad path index '" + p + "'");
        out.push_back(*v);
    }
    if (out.empty()) throw ConfigError("empty paths= list");
    return out;
}

OpticalElement parse_element(const std::string& value) {
    auto tokens = text::split_ws(value);
    if (tokens.empty()) throw ConfigError("empty element");
    const std::string kind(tokens[0]);
    std::optional<std::vector<int>> paths;
    std::vector<std::string> rest;
    for (std::size_t i = 1; i < tokens.size(); ++i) {
        if (tokens[i].starts_with("paths=")) {
            paths = parse_paths(std::string(tokens[i].substr(6)));
        } else {
            rest.emplace_back(tokens[i]);
        }
    }
    if (kind == "BD") {
        if (rest.size() != 1) throw ConfigError("BD expects a displacement sign (+1 or -1)");
        const auto sign = text::parse_int<int>(rest[0]);
        if (!sign || (*sign != 1 && *sign != -1)) throw ConfigError("BD displacement sign must be +1 or -1");
        return BeamDisplacer{*sign, paths};
    }
    if (kind == "HWP" || kind == "QWP") {
        double angle = 0.0;
        if (rest.size() == 1 && rest[0].starts_with("split=")) {
            if (kind != "HWP") throw ConfigError("split= is only defined for HWP");
            angle = hwp_angle_for_split(parse_fraction(rest[0].substr(6)));
        } else if (rest.size() == 2) {
            angle = parse_angle(rest[0] + " " + rest[1]);
        } else if (rest.size() == 1) {
            angle = parse_angle(rest[0]);
        } else {
            throw ConfigError(kind + " expects `<angle> deg|rad` or `split=<fraction>`");
        }
        if (kind == "HWP") return HalfWavePlate{angle, paths};
        return QuarterWavePlate{angle, paths};
    }
    throw ConfigError("unknown element type '" + kind + "' (HWP, QWP, BD)");
}

std::string format_paths(const std::optional<std::vector<int>>& paths) {
    if (!paths) return "";
    std::string s = " paths=";
    for (std::size_t i = 0; i < paths->size(); ++i) s += (i ? "," : "") + std::to_string((*paths)[i]);
    return s;
}

std::string format_element(const OpticalElement& e) {
    return std::visit(
        [](const auto& el) -> std::string {
            using T = std::decay_t<decltype(el)>;
            if constexpr (std::is_same_v<T, BeamDisplacer>) {
                return std::string("BD ") + (el.displacement_sign > 0 ? "+1" : "-1") + format_paths(el.paths);
            } else if constexpr (std::is_same_v<T, HalfWavePlate>) {
                return "HWP " + text::num(el.angle) + " rad" + format_paths(el.paths);
            } else {
                return "QWP " + text::num(el.angle) + " rad" + format_paths(el.paths);
            }
        },
        e);
}

std::string len(double v) { return text::num(v) + " m"; }

std::string len_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + len(v[i]);
    return s;
}

}  // namespace

double parse_length(const std::string& value) {
    const auto [num, unit] = number_and_unit(value);
    const auto v = text::parse_double(num);
    if (!v) throw ConfigError("bad length '" + value + "'");
    return *v * length_unit(unit);
}

ExperimentConfig parse_config(std::istream& is, const std::string& source_name) {
    ExperimentConfig cfg;
    std::string section;
    std::string line;
    int lineno = 0;
    bool saw_d = false;

    using Setter = std::function<void(const std::string&)>;
    auto length_into = [](double& target) { return [&target](const std::string& v) { target = parse_length(v); }; };
    auto opt_length_into = [](std::optional<double>& target) {
        return [&target](const std::string& v) { target = parse_length(v); };
    };
    auto length_list_into = [](auto& target) {
        return [&target](const std::string& v) {
            std::vector<double> out;
            for (const auto& item : split_list(v)) out.push_back(parse_length(item));
            target = out;
        };
    };
    auto real_into = [](double& target) {
        return [&target](const std::string& v) {
            const auto x = text::parse_double(v);
            if (!x) throw ConfigError("bad number '" + v + "'");
            target = *x;
        };
    };

    std::map<std::string, std::map<std::string, Setter>> keys;
    auto& src = keys["source"];
    src["D"] = [&](const std::string& v) {
        const auto x = text::parse_int<int>(v);
        if (!x) throw ConfigError("D must be an integer");
        cfg.source.D = *x;
    };
    src["d"] = [&](const std::string& v) {
        cfg.source.d = parse_length(v);
        saw_d = true;
    };
    src["lambda_pump"] = length_into(cfg.source.lambda_pump);
    src["lambda_down"] = length_into(cfg.source.lambda_down);
    src["f_p"] = length_into(cfg.source.f_p);
    src["f_i"] = length_into(cfg.source.f_i);
    src["f_F"] = length_into(cfg.source.f_F);
    src["w_p"] = opt_length_into(cfg.source.w_p);
    src["incident_curvature"] = [&](const std::string& v) {
        const auto t = text::trim(v);
        cfg.source.incident_curvature = (t == "inf" || t == "+inf") ? kInf : (t == "-inf" ? -kInf : parse_length(v));
    };
    src["slit_width"] = length_into(cfg.source.slit_width);
    src["crystal_length"] = length_into(cfg.source.crystal_length);
    src["phase_matching_width"] = length_into(cfg.source.phase_matching_width);
    src["resolution_width"] = length_into(cfg.source.resolution_width);
    src["crystal_offset"] = length_into(cfg.source.crystal_offset);
    src["aperture"] = opt_length_into(cfg.source.aperture);

    auto& pbg = keys["pbg"];
    pbg["element"] = [&](const std::string& v) { cfg.chain.push_back(parse_element(v)); };
    pbg["amplitudes"] = [&](const std::string& v) {
        std::vector<double> a;
        for (const auto& item : split_list(v)) a.push_back(parse_fraction(item));
        cfg.amplitudes = a;
    };

    auto& scan = keys["scan"];
    scan["image_fixed"] = length_list_into(cfg.scan.image_fixed);
    scan["image_step"] = length_into(cfg.scan.image_step);
    scan["image_margin"] = opt_length_into(cfg.scan.image_margin);
    scan["fourier_fixed"] = length_list_into(cfg.scan.fourier_fixed);
    scan["fourier_step"] = length_into(cfg.scan.fourier_step);
    scan["fourier_half_span"] = [&](const std::string& v) {
        if (text::trim(v) == "auto") {
            cfg.scan.fourier_half_span.reset();
        } else {
            cfg.scan.fourier_half_span = parse_length(v);
        }
    };
    scan["fourier_slit"] = length_into(cfg.scan.fourier_slit);

    auto& noise = keys["noise"];
    noise["mean_peak_counts"] = real_into(cfg.noise.mean_peak_counts);
    noise["seed"] = [&](const std::string& v) {
        const auto x = text::parse_int<std::uint64_t>(v);
        if (!x) throw ConfigError("seed must be an unsigned 64-bit integer");
        cfg.noise.seed = *x;
    };

    auto& ana = keys["analysis"];
    ana["tau_diag"] = real_into(cfg.analysis.tau_diag);
    ana["n_resamples"] = [&](const std::string& v) {
        const auto x = text::parse_int<int>(v);
        if (!x) throw ConfigError("n_resamples must be an integer");
        cfg.analysis.n_resamples = *x;
    };
    ana["envelope"] = [&](const std::string& v) { cfg.analysis.envelope = parse_envelope(std::string(text::trim(v))); };

    std::map<std::string, int> seen;
    while (std::getline(is, line)) {
        ++lineno;
        auto where = [&] { return source_name + ":" + std::to_string(lineno) + ": "; };
        auto t = text::trim(line);
        if (const auto hash = t.find('#'); hash != std::string_view::npos) t = text::trim(t.substr(0, hash));
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError(where() + "malformed section header");
            section = std::string(text::trim(t.substr(1, t.size() - 2)));
            if (!keys.contains(section)) throw ConfigError(where() + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) throw ConfigError(where() + "expected `key = value`");
        const std::string key(text::trim(t.substr(0, eq)));
        const std::string value(text::trim(t.substr(eq + 1)));
        if (section.empty()) throw ConfigError(where() + "key `" + key + "` outside any section");
        const auto& sec = keys.at(section);
        const auto it = sec.find(key);
        if (it == sec.end()) throw ConfigError(where() + "unknown key `" + key + "` in [" + section + "]");
        const std::string full = section + "." + key;
        if (key != "element" && seen[full]++ > 0) throw ConfigError(where() + "duplicate key `" + key + "`");
        try {
            it->second(value);
        } catch (const ConfigError& e) {
            throw ConfigError(where() + key + ": " + e.what());
        }
    }
    (void)saw_d;

    const auto errs = validate(cfg);
    if (!errs.empty()) {
        std::string msg = source_name + ": invalid configuration:";
        for (const auto& e : errs) msg += "\n  - " + e;
        throw ConfigError(msg);
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string());
    return parse_config(is, path.string());
}

std::vector<std::string> validate(const ExperimentConfig& cfg) {
    auto errs = validate(cfg.source);
    auto positive = [&](double v, const std::string& name) {
        if (!(v > 0.0) || !std::isfinite(v)) errs.push_back(name + " must be positive");
    };
    positive(cfg.scan.image_step, "image_step");
    positive(cfg.scan.fourier_step, "fourier_step");
    if (cfg.scan.image_margin) positive(*cfg.scan.image_margin, "image_margin");
    if (cfg.scan.fourier_half_span) positive(*cfg.scan.fourier_half_span, "fourier_half_span");
    if (!(cfg.scan.fourier_slit >= 0.0)) errs.emplace_back("fourier_slit must be >= 0");
    if (cfg.scan.fourier_fixed.empty()) errs.emplace_back("fourier_fixed needs at least one position");
    if (!(cfg.noise.mean_peak_counts > 0.0)) errs.emplace_back("mean_peak_counts must be positive");
    if (!(cfg.analysis.tau_diag >= 0.0 && cfg.analysis.tau_diag <= 1.0)) errs.emplace_back("tau_diag must lie in [0, 1]");
    if (cfg.analysis.n_resamples < 100) errs.emplace_back("n_resamples must be >= 100");

    if (cfg.amplitudes) {
        const auto& a = *cfg.amplitudes;
        if (static_cast<int>(a.size()) != cfg.source.D) {
            errs.push_back("amplitudes lists " + std::to_string(a.size()) + " paths but D = " +
                           std::to_string(cfg.source.D));
        }
        double sum = 0.0;
        for (double x : a) {
            if (!(x >= 0.0)) errs.emplace_back("amplitudes must be >= 0");
            sum += x * x;
        }
        if (!(sum > 0.0)) errs.emplace_back("amplitudes are all zero");
    } else if (cfg.chain.empty()) {
        if (cfg.source.D != 1) errs.emplace_back("no [pbg] element chain or amplitudes for D > 1");
    } else {
        try {
            const auto pump = pump_amplitudes(apply_chain(PolPathField::single(Pol::H), cfg.chain));
            if (pump.amplitudes.size() != cfg.source.D) {
                errs.push_back("element chain produces " + std::to_string(pump.amplitudes.size()) +
                               " paths but D = " + std::to_string(cfg.source.D));
            }
        } catch (const Error& e) {
            errs.emplace_back(e.what());
        }
    }
    if (cfg.scan.image_fixed && cfg.source.d > 0.0) {
        for (double x : *cfg.scan.image_fixed) {
            const double rel = x / cfg.source.d;
            const long idx = std::lround(rel);
            if (idx < 0 || idx >= cfg.source.D || std::abs(rel - static_cast<double>(idx)) > 0.25) {
                errs.push_back("image_fixed position " + text::num(x * 1e3, 6) + " mm is not on a path center");
            }
        }
    }
    return errs;
}

void write_config(std::ostream& os, const ExperimentConfig& cfg) {
    const auto& s = cfg.source;
    os << "[source]\n";
    os << "D = " << s.D << '\n';
    os << "d = " << len(s.d) << '\n';
    os << "lambda_pump = " << len(s.lambda_pump) << '\n';
    os << "lambda_down = " << len(s.lambda_down) << '\n';
    os << "f_p = " << len(s.f_p) << '\n';
    os << "f_i = " << len(s.f_i) << '\n';
    os << "f_F = " << len(s.f_F) << '\n';
    if (s.w_p) os << "w_p = " << len(*s.w_p) << '\n';
    os << "incident_curvature = "
       << (std::isinf(s.incident_curvature) ? (s.incident_curvature > 0 ? "inf" : "-inf") : len(s.incident_curvature))
       << '\n';
    os << "slit_width = " << len(s.slit_width) << '\n';
    os << "crystal_length = " << len(s.crystal_length) << '\n';
    os << "phase_matching_width = " << len(s.phase_matching_width) << '\n';
    os << "resolution_width = " << len(s.resolution_width) << '\n';
    os << "crystal_offset = " << len(s.crystal_offset) << '\n';
    if (s.aperture) os << "aperture = " << len(*s.aperture) << '\n';

    os << "\n[pbg]\n";
    for (const auto& e : cfg.chain) os << "element = " << format_element(e) << '\n';
    if (cfg.amplitudes) {
        os << "amplitudes = ";
        for (std::size_t i = 0; i < cfg.amplitudes->size(); ++i) os << (i ? ", " : "") << text::num((*cfg.amplitudes)[i]);
        os << '\n';
    }

    os << "\n[scan]\n";
    if (cfg.scan.image_fixed) os << "image_fixed = " << len_list(*cfg.scan.image_fixed) << '\n';
    os << "image_step = " << len(cfg.scan.image_step) << '\n';
    if (cfg.scan.image_margin) os << "image_margin = " << len(*cfg.scan.image_margin) << '\n';
    os << "fourier_fixed = " << len_list(cfg.scan.fourier_fixed) << '\n';
    os << "fourier_step = " << len(cfg.scan.fourier_step) << '\n';
    os << "fourier_half_span = " << (cfg.scan.fourier_half_span ? len(*cfg.scan.fourier_half_span) : "auto") << '\n';
    os << "fourier_slit = " << len(cfg.scan.fourier_slit) << '\n';

    os << "\n[noise]\n";
    os << "mean_peak_counts = " << text::num(cfg.noise.mean_peak_counts) << '\n';
    os << "seed = " << cfg.noise.seed << '\n';

    os << "\n[analysis]\n";
    os << "tau_diag = " << text::num(cfg.analysis.tau_diag) << '\n';
    os << "n_resamples = " << cfg.analysis.n_resamples << '\n';
    os << "envelope = " << to_string(cfg.analysis.envelope) << '\n';
}

PumpAmplitudes pump_from_config(const ExperimentConfig& cfg) {
    if (cfg.amplitudes) {
        const auto& a = *cfg.amplitudes;
        double total = 0.0;
        for (double x : a) total += x * x;
        PumpAmplitudes p;
        p.amplitudes.resize(static_cast<Eigen::Index>(a.size()));
        for (std::size_t l = 0; l < a.size(); ++l) {
            p.amplitudes(static_cast<Eigen::Index>(l)) = a[l] / std::sqrt(total);
            p.h_intensity.push_back(a[l] * a[l]);
        }
        p.h_fraction = 1.0;
        return p;
    }
    return pump_amplitudes(apply_chain(PolPathField::single(Pol::H), cfg.chain));
}

BiphotonPathState state_from_config(const ExperimentConfig& cfg) {
    const auto pump = pump_from_config(cfg);
    return build_state(pump.amplitudes, beam_at_crystal(cfg.source).width, cfg.source.d);
}

DetectionSetup detection_from_config(const ExperimentConfig& cfg) {
    return DetectionSetup::from(cfg.source, cfg.scan.fourier_slit, cfg.analysis.envelope);
}

std::vector<double> image_fixed_positions(const ExperimentConfig& cfg) {
    if (cfg.scan.image_fixed) return *cfg.scan.image_fixed;
    std::vector<double> out;
    for (int i = 0; i < cfg.source.D; ++i) out.push_back(i * cfg.source.d);
    return out;
}

std::vector<double> image_scan_grid(const ExperimentConfig& cfg) {
    const double margin = cfg.scan.image_margin.value_or(cfg.source.d);
    return aligned_grid(-margin, (cfg.source.D - 1) * cfg.source.d + margin, cfg.scan.image_step);
}

std::vector<double> fourier_scan_grid(const ExperimentConfig& cfg, const BiphotonPathState& state, double x_i) {
    const auto setup = detection_from_config(cfg);
    const double half = cfg.scan.fourier_half_span.value_or(
        std::min(4.0 * cip_envelope_width(state, setup.f_F, setup.k_down, setup.envelope),
                 32.0 * cip_fringe_period(setup.f_F, setup.k_down, state.pitch)));
    return aligned_grid(-x_i - half, -x_i + half, cfg.scan.fourier_step);
}

}  // namespace bpl
