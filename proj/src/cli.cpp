#include "bpl/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>

#include <CLI11.hpp>

#include "bpl/analysis.hpp"
#include "bpl/config.hpp"
#include "bpl/errors.hpp"
#include "text_util.hpp"

namespace bpl {

namespace fs = std::filesystem;

namespace {

constexpr const char* kExitCodeHelp =
    "Exit codes:\n"
    "  0  success\n"
    "  1  unexpected internal error\n"
    "  2  usage error (bad flags, bad BPL_SEED)\n"
    "  3  configuration error (parse or validation)\n"
    "  4  data error (missing, malformed or empty scans)\n"
    "  5  convergence error (fits or bootstrap)\n"
    "\n"
    "Seed precedence: --seed, then BPL_SEED, then [noise] seed in the config.";

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::string scans;
    std::string format = "tsv";
    int threads = 0;
};

class UsageError : public Error {
public:
    using Error::Error;
};

// Independent, reproducible seed per output stream.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kBootstrapStream = 0xB0075;

std::uint64_t resolve_seed(const Options& opt, const ExperimentConfig& cfg) {
    if (opt.seed) return *opt.seed;
    if (const char* env = std::getenv("BPL_SEED"); env && *env) {
        const auto v = text::parse_int<std::uint64_t>(env);
        if (!v) throw UsageError(std::string("BPL_SEED is not an unsigned 64-bit integer: '") + env + "'");
        return *v;
    }
    return cfg.noise.seed;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    return os;
}

std::string mm(double v) { return text::fixed(v * 1e3, 6); }

struct Context {
    ExperimentConfig cfg;
    BiphotonPathState state;
    DetectionSetup setup;
    std::uint64_t seed = 0;
    fs::path out;
};

Context make_context(const Options& opt) {
    if (opt.config.empty()) throw UsageError("a config file is required (--config <path>)");
    Context ctx;
    ctx.cfg = load_config(opt.config);
    ctx.seed = resolve_seed(opt, ctx.cfg);
    ctx.state = state_from_config(ctx.cfg);
    ctx.setup = detection_from_config(ctx.cfg);
    ctx.out = opt.out;
    fs::create_directories(ctx.out);
    return ctx;
}

void write_expected(const fs::path& path, const char* title, Plane plane, double fixed,
                    const std::vector<double>& grid, const Context& ctx) {
    const auto counts = expected_counts(plane, fixed, grid, ctx.state, ctx.setup, ctx.cfg.noise.mean_peak_counts);
    auto os = open_out(path);
    os << "# " << title << ", fixed detector at " << mm(fixed) << " mm\n";
    os << "# position_mm\trate\texpected_counts\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        os << mm(grid[i]) << '\t' << text::num(plane_rate(plane, ctx.state, ctx.setup, fixed, grid[i]), 10) << '\t'
           << text::num(counts[i], 10) << '\n';
    }
}

void simulate_image(const Context& ctx, std::ostream& out) {
    {
        auto os = open_out(ctx.out / "state.tsv");
        write_state(os, ctx.state);
    }
    {
        auto os = open_out(ctx.out / "image_joint_coeffs.tsv");
        write_coeffs(os, model_joint_coeffs(ctx.state, ctx.setup.sigma_h));
    }
    const auto grid = image_scan_grid(ctx.cfg);
    const auto fixed = image_fixed_positions(ctx.cfg);
    for (std::size_t i = 0; i < fixed.size(); ++i) {
        auto rec = synth_scan(Plane::Image, fixed[i], grid, ctx.state, ctx.setup, ctx.cfg.noise.mean_peak_counts,
                              stream_seed(ctx.seed, i));
        rec.integration_label = "mean_peak_counts=" + text::num(ctx.cfg.noise.mean_peak_counts);
        const auto name = "image_scan_p" + std::to_string(i) + ".tsv";
        save_scan(ctx.out / name, rec);
        write_expected(ctx.out / ("image_expected_p" + std::to_string(i) + ".tsv"), "expected image-plane coincidences",
                       Plane::Image, fixed[i], grid, ctx);
        out << "wrote " << (ctx.out / name).string() << '\n';
    }
}

void simulate_fourier(const Context& ctx, std::ostream& out) {
    const auto& fixed = ctx.cfg.scan.fourier_fixed;
    for (std::size_t k = 0; k < fixed.size(); ++k) {
        const auto grid = fourier_scan_grid(ctx.cfg, ctx.state, fixed[k]);
        auto rec = synth_scan(Plane::Fourier, fixed[k], grid, ctx.state, ctx.setup, ctx.cfg.noise.mean_peak_counts,
                              stream_seed(ctx.seed, 1000 + k));
        rec.integration_label = "mean_peak_counts=" + text::num(ctx.cfg.noise.mean_peak_counts);
        const auto name = "fourier_scan_f" + std::to_string(k) + ".tsv";
        save_scan(ctx.out / name, rec);
        write_expected(ctx.out / ("fourier_expected_f" + std::to_string(k) + ".tsv"),
                       "expected Fourier-plane coincidences", Plane::Fourier, fixed[k], grid, ctx);
        out << "wrote " << (ctx.out / name).string() << '\n';
    }
}

AnalysisPlan make_plan(const Context& ctx, int threads) {
    AnalysisPlan plan;
    plan.D = ctx.cfg.source.D;
    plan.pitch = ctx.cfg.source.d;
    plan.expected_width = image_peak_width(ctx.state, ctx.setup);
    plan.tau_diag = ctx.cfg.analysis.tau_diag;
    plan.n_resamples = ctx.cfg.analysis.n_resamples;
    plan.seed = stream_seed(ctx.seed, kBootstrapStream);
    plan.threads = threads;
    return plan;
}

std::vector<ScanRecord> of_plane(const std::vector<ScanRecord>& scans, Plane plane) {
    std::vector<ScanRecord> out;
    for (const auto& s : scans) {
        if (s.plane == plane) out.push_back(s);
    }
    return out;
}

fs::path scans_dir(const Options& opt) { return opt.scans.empty() ? fs::path(opt.out) : fs::path(opt.scans); }

void analyze(const Context& ctx, const fs::path& dir, int threads, std::ostream& out) {
    const auto scans = load_scan_directory(dir);
    const auto image = of_plane(scans, Plane::Image);
    const auto fourier = of_plane(scans, Plane::Fourier);

    if (!image.empty()) {
        const auto plan = make_plan(ctx, threads);
        const auto fits = fit_image_scans(image, plan);
        auto os = open_out(ctx.out / "peak_fits.tsv");
        os << "# fixed_path\tpeak\texpected_center_mm\tcenter_mm\twidth_um\tamplitude\tarea\tarea_err\t"
              "center_err_um\twidth_err_um\treduced_chi2\tconverged\twidth_fixed\tempty\ttie\n";
        for (const auto& sf : fits) {
            for (const auto& f : sf.fits) {
                os << sf.fixed_index << '\t' << f.index << '\t' << mm(f.expected_center) << '\t' << mm(f.center)
                   << '\t' << text::fixed(f.width * 1e6, 4) << '\t' << text::num(f.amplitude, 10) << '\t'
                   << text::num(f.area, 10) << '\t' << text::num(f.area_err, 10) << '\t'
                   << text::fixed(f.center_err * 1e6, 4) << '\t' << text::fixed(f.width_err * 1e6, 4) << '\t'
                   << text::num(f.reduced_chi2, 6) << '\t' << f.converged << '\t' << f.width_fixed << '\t'
                   << f.empty << '\t' << f.tie << '\n';
            }
        }
        out << "wrote " << (ctx.out / "peak_fits.tsv").string() << '\n';
    }

    if (!fourier.empty()) {
        auto os = open_out(ctx.out / "fringes.tsv");
        os << "# fixed_position_mm\tperiod_mm\tvisibility\tenvelope_width_mm\tspectral_bin_per_mm\tstatus\n";
        for (const auto& s : fourier) {
            os << mm(s.fixed_position) << '\t';
            try {
                const auto m = fringe_metrics(s);
                os << text::fixed(m.period * 1e3, 6) << '\t' << text::fixed(m.visibility, 6) << '\t'
                   << (std::isinf(m.envelope_width) ? std::string("inf") : text::fixed(m.envelope_width * 1e3, 6))
                   << '\t' << text::fixed(m.spectral_bin * 1e-3, 6) << "\tok\n";
                out << "fringes at " << mm(s.fixed_position) << " mm: period " << text::fixed(m.period * 1e3, 4)
                    << " mm, visibility " << text::fixed(m.visibility, 3) << '\n';
            } catch (const DataError& e) {
                os << "nan\tnan\tnan\tnan\tno_fringes\n";
                out << "fringes at " << mm(s.fixed_position) << " mm: " << e.what() << '\n';
            }
        }
        out << "wrote " << (ctx.out / "fringes.tsv").string() << '\n';
    }
}

void report(const Context& ctx, const fs::path& dir, int threads, std::ostream& out) {
    const auto image = of_plane(load_scan_directory(dir), Plane::Image);
    if (image.empty()) throw DataError("no image-plane scans found in " + dir.string());
    const auto rep = analyze_entanglement(image, make_plan(ctx, threads));
    {
        auto os = open_out(ctx.out / "report.txt");
        write_report(os, rep);
    }
    {
        auto os = open_out(ctx.out / "alpha.tsv");
        write_coeffs(os, DiscreteJointCoeffs(rep.alpha), &rep.alpha_std);
    }
    out << "D = " << rep.D << ", C = " << text::fixed(rep.concurrence, 5) << " +- "
        << text::fixed(rep.concurrence_std, 5) << " (" << rep.formula << "), off-diagonal mass "
        << text::num(rep.off_diagonal_mass, 3) << '\n';
    if (!rep.diagonal) out << "warning: state is not path-correlated; concurrence not reported\n";
    out << "wrote " << (ctx.out / "report.txt").string() << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Simulate and analyze path-entangled photon pairs from a parallel-beam SPDC source.", "bpl"};
    app.footer(kExitCodeHelp);
    app.require_subcommand(1);

    Options opt;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config,config", opt.config, "experiment config file")->required();
        sub->add_option("--seed", opt.seed, "random seed (overrides BPL_SEED and the config)");
        sub->add_option("--out", opt.out, "output directory")->capture_default_str();
        sub->add_option("--format", opt.format, "output format")->check(CLI::IsMember({"tsv"}))->capture_default_str();
        sub->add_option("--threads", opt.threads, "bootstrap worker threads (0: all cores)")
            ->check(CLI::NonNegativeNumber);
    };

    auto* sim_image = app.add_subcommand("simulate-image", "write Poisson-sampled image-plane scans");
    auto* sim_fourier = app.add_subcommand("simulate-fourier", "write Poisson-sampled Fourier-plane scans");
    auto* analyze_cmd = app.add_subcommand("analyze", "fit peaks and fringes in a scan directory");
    auto* report_cmd = app.add_subcommand("report", "entanglement report with bootstrap uncertainties");
    auto* pipeline_cmd = app.add_subcommand("pipeline", "simulate both planes, analyze and report");
    for (auto* sub : {sim_image, sim_fourier, analyze_cmd, report_cmd, pipeline_cmd}) add_common(sub);
    for (auto* sub : {analyze_cmd, report_cmd}) {
        sub->add_option("--scans", opt.scans, "directory holding scan files (default: --out)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        const Context ctx = make_context(opt);
        if (sim_image->parsed()) {
            simulate_image(ctx, out);
        } else if (sim_fourier->parsed()) {
            simulate_fourier(ctx, out);
        } else if (analyze_cmd->parsed()) {
            analyze(ctx, scans_dir(opt), opt.threads, out);
        } else if (report_cmd->parsed()) {
            report(ctx, scans_dir(opt), opt.threads, out);
        } else {
            out << "seed " << ctx.seed << '\n';
            simulate_image(ctx, out);
            simulate_fourier(ctx, out);
            analyze(ctx, ctx.out, opt.threads, out);
            report(ctx, ctx.out, opt.threads, out);
        }
        return kExitOk;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const ConvergenceError& e) {
        err << "convergence error: " << e.what() << '\n';
        return kExitConvergence;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUnexpected;
    }
}

}  // namespace bpl
