#include "bpl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include <fftw3.h>

#include "bpl/errors.hpp"
#include "text_util.hpp"

namespace bpl {

namespace {

void check_kappa(std::span<const double> kappa) {
    double norm = 0.0;
    for (double k : kappa) {
        if (k < 0.0 || !std::isfinite(k)) throw DataError("Schmidt coefficients must be finite and >= 0");
        norm += k * k;
    }
    if (std::abs(norm - 1.0) > 1e-9) throw DataError("Schmidt coefficients must satisfy sum kappa^2 = 1");
}

}  // namespace

double concurrence_2x2(std::span<const double> kappa) {
    if (kappa.size() != 2) throw DataError("two-qubit concurrence needs 2 Schmidt coefficients");
    check_kappa(kappa);
    return 2.0 * kappa[0] * kappa[1];
}

double concurrence_3x3(std::span<const double> kappa) {
    if (kappa.size() != 3) throw DataError("two-qutrit concurrence needs 3 Schmidt coefficients");
    check_kappa(kappa);
    const double a = kappa[0] * kappa[0], b = kappa[1] * kappa[1], c = kappa[2] * kappa[2];
    return std::sqrt(3.0 * (a * b + b * c + c * a));
}

double concurrence(std::span<const double> kappa) {
    if (kappa.size() == 2) return concurrence_2x2(kappa);
    if (kappa.size() == 3) return concurrence_3x3(kappa);
    check_kappa(kappa);
    const auto n = static_cast<double>(kappa.size());
    if (kappa.size() < 2) return 0.0;
    double s4 = 0.0;
    for (double k : kappa) s4 += k * k * k * k;
    return std::sqrt(std::max(0.0, n / (n - 1.0) * (1.0 - s4)));
}

std::vector<ScanFits> fit_image_scans(const std::vector<ScanRecord>& scans, const AnalysisPlan& plan) {
    if (plan.D < 1 || !(plan.pitch > 0.0)) throw ConfigError("analysis plan needs D >= 1 and d > 0");
    std::vector<double> centers;
    for (int j = 0; j < plan.D; ++j) centers.push_back(j * plan.pitch);
    PeakFitOptions opts;
    opts.window_half_width = plan.window_half_width();
    opts.expected_width = plan.expected_width;

    std::vector<ScanFits> out;
    std::vector<bool> seen(static_cast<std::size_t>(plan.D), false);
    for (const auto& scan : scans) {
        if (scan.plane != Plane::Image) continue;
        const double rel = scan.fixed_position / plan.pitch;
        const long idx = std::lround(rel);
        if (idx < 0 || idx >= plan.D || std::abs(rel - static_cast<double>(idx)) > 0.25) {
            throw DataError("image scan with detector 1 at " + text::fixed(scan.fixed_position * 1e3, 4) +
                            " mm matches no path center");
        }
        if (seen[static_cast<std::size_t>(idx)]) {
            throw DataError("more than one image scan for detector-1 path " + std::to_string(idx));
        }
        seen[static_cast<std::size_t>(idx)] = true;
        out.push_back({static_cast<int>(idx), fit_peaks(scan, centers, opts)});
    }
    if (out.empty()) throw DataError("no image-plane scans found");
    return out;
}

DiscreteJointCoeffs assemble_alpha(const std::vector<ScanFits>& fits, int D) {
    Eigen::MatrixXd area = Eigen::MatrixXd::Zero(D, D);
    std::vector<bool> have(static_cast<std::size_t>(D), false);
    for (const auto& sf : fits) {
        if (sf.fixed_index < 0 || sf.fixed_index >= D) throw DataError("scan path index out of range");
        if (static_cast<int>(sf.fits.size()) != D) throw DataError("scan fit count does not match D");
        have[static_cast<std::size_t>(sf.fixed_index)] = true;
        for (int j = 0; j < D; ++j) {
            const auto& f = sf.fits[static_cast<std::size_t>(j)];
            area(sf.fixed_index, j) = (f.empty || !f.converged) ? 0.0 : f.area;
        }
    }
    std::string missing;
    for (int i = 0; i < D; ++i) {
        if (!have[static_cast<std::size_t>(i)]) missing += (missing.empty() ? "" : ", ") + std::to_string(i);
    }
    if (!missing.empty()) throw DataError("partial data: no image scan for detector-1 path(s) " + missing);
    return DiscreteJointCoeffs::from_weights(area);
}

McSummary mc_uncertainty(const std::vector<ScanRecord>& scans, const ScanPipeline& pipeline, int n_resamples,
                         std::uint64_t seed, int threads) {
    if (n_resamples < 100) throw ConfigError("bootstrap needs at least 100 resamples");
    std::vector<std::vector<double>> results(static_cast<std::size_t>(n_resamples));
    std::vector<char> failed(static_cast<std::size_t>(n_resamples), 0);

    auto run = [&](int r) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(r)};
        std::mt19937_64 rng(seq);
        std::vector<ScanRecord> resampled = scans;
        for (auto& s : resampled) {
            for (auto& c : s.counts) {
                if (c > 0) c = std::poisson_distribution<std::int64_t>(static_cast<double>(c))(rng);
            }
        }
        try {
            results[static_cast<std::size_t>(r)] = pipeline(resampled);
        } catch (const Error&) {
            failed[static_cast<std::size_t>(r)] = 1;
        }
    };

    int nthreads = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    nthreads = std::min(nthreads, n_resamples);
    if (nthreads <= 1) {
        for (int r = 0; r < n_resamples; ++r) run(r);
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < nthreads; ++t) {
            pool.emplace_back([&, t] {
                for (int r = t; r < n_resamples; r += nthreads) run(r);
            });
        }
    }

    McSummary out;
    out.resamples = n_resamples;
    out.failures = static_cast<int>(std::count(failed.begin(), failed.end(), 1));
    if (out.failures * 10 > n_resamples) {
        throw ConvergenceError("bootstrap aborted: " + std::to_string(out.failures) + " of " +
                               std::to_string(n_resamples) + " resamples failed");
    }
    std::size_t nq = 0;
    for (int r = 0; r < n_resamples; ++r) {
        if (!failed[static_cast<std::size_t>(r)]) {
            nq = results[static_cast<std::size_t>(r)].size();
            break;
        }
    }
    out.quantities.assign(nq, {});
    for (std::size_t q = 0; q < nq; ++q) {
        double sum = 0.0, sum2 = 0.0;
        int n = 0;
        for (int r = 0; r < n_resamples; ++r) {
            if (failed[static_cast<std::size_t>(r)]) continue;
            const double v = results[static_cast<std::size_t>(r)][q];
            sum += v;
            ++n;
        }
        const double mean = sum / n;
        for (int r = 0; r < n_resamples; ++r) {
            if (failed[static_cast<std::size_t>(r)]) continue;
            const double dv = results[static_cast<std::size_t>(r)][q] - mean;
            sum2 += dv * dv;
        }
        out.quantities[q] = {mean, n > 1 ? std::sqrt(sum2 / (n - 1)) : 0.0};
    }
    return out;
}

EntanglementReport entanglement_report(const DiscreteJointCoeffs& coeffs, double tau_diag) {
    EntanglementReport rep;
    rep.D = coeffs.dimension();
    rep.alpha = coeffs.matrix();
    rep.alpha_std = Eigen::MatrixXd::Zero(rep.D, rep.D);
    rep.off_diagonal_mass = coeffs.off_diagonal_mass();
    rep.tau_diag = tau_diag;
    rep.diagonal = rep.off_diagonal_mass <= tau_diag;
    rep.formula = rep.D == 2 ? "C2x2 = 2 k0 k1"
                  : rep.D == 3 ? "C3x3 = sqrt(3 (k0^2 k1^2 + k1^2 k2^2 + k2^2 k0^2))"
                               : "sqrt(D/(D-1) (1 - sum k^4))";
    if (rep.diagonal) {
        rep.kappa = schmidt_coefficients(coeffs, tau_diag);
        rep.concurrence = concurrence(rep.kappa);
    } else {
        rep.concurrence = std::numeric_limits<double>::quiet_NaN();
    }
    rep.kappa_std.assign(rep.kappa.size(), 0.0);
    return rep;
}

namespace {

// [C, kappa..., alpha row-major...]
std::vector<double> flatten(const EntanglementReport& r) {
    std::vector<double> v{r.concurrence};
    v.insert(v.end(), r.kappa.begin(), r.kappa.end());
    for (int i = 0; i < r.D; ++i) {
        for (int j = 0; j < r.D; ++j) v.push_back(r.alpha(i, j));
    }
    return v;
}

}  // namespace

EntanglementReport analyze_entanglement(const std::vector<ScanRecord>& scans, const AnalysisPlan& plan) {
    std::vector<ScanRecord> image;
    for (const auto& s : scans) {
        if (s.plane == Plane::Image) image.push_back(s);
    }
    auto point = [&](const std::vector<ScanRecord>& data) {
        return entanglement_report(assemble_alpha(fit_image_scans(data, plan), plan.D), plan.tau_diag);
    };
    EntanglementReport rep = point(image);
    rep.seed = plan.seed;
    rep.n_resamples = plan.n_resamples;
    if (!rep.diagonal) return rep;

    ScanPipeline pipeline = [&](const std::vector<ScanRecord>& data) {
        auto r = point(data);
        if (!r.diagonal) throw DataError("resample not path-correlated");
        return flatten(r);
    };
    const McSummary mc = mc_uncertainty(image, pipeline, plan.n_resamples, plan.seed, plan.threads);
    rep.failed_resamples = mc.failures;
    std::size_t q = 0;
    rep.concurrence_std = mc.quantities[q++].std;
    for (auto& ks : rep.kappa_std) ks = mc.quantities[q++].std;
    for (int i = 0; i < rep.D; ++i) {
        for (int j = 0; j < rep.D; ++j) rep.alpha_std(i, j) = mc.quantities[q++].std;
    }
    return rep;
}

void write_report(std::ostream& os, const EntanglementReport& r) {
    os << "D = " << r.D << '\n';
    os << "concurrence = " << text::num(r.concurrence, 10) << '\n';
    os << "concurrence_std = " << text::num(r.concurrence_std, 6) << '\n';
    os << "concurrence_formula = " << r.formula << '\n';
    os << "diagonal = " << (r.diagonal ? "true" : "false") << '\n';
    os << "off_diagonal_mass = " << text::num(r.off_diagonal_mass, 6) << '\n';
    os << "tau_diag = " << text::num(r.tau_diag, 6) << '\n';
    for (std::size_t l = 0; l < r.kappa.size(); ++l) {
        os << "kappa_" << l << " = " << text::num(r.kappa[l], 10) << '\n';
        os << "kappa_" << l << "_std = " << text::num(r.kappa_std[l], 6) << '\n';
    }
    for (int i = 0; i < r.D; ++i) {
        for (int j = 0; j < r.D; ++j) {
            os << "alpha_" << i << j << " = " << text::num(r.alpha(i, j), 10) << '\n';
            os << "alpha_" << i << j << "_std = " << text::num(r.alpha_std(i, j), 6) << '\n';
        }
    }
    os << "n_resamples = " << r.n_resamples << '\n';
    os << "failed_resamples = " << r.failed_resamples << '\n';
    os << "seed = " << r.seed << '\n';
}

std::map<std::string, std::string> read_key_values(std::istream& is) {
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto t = text::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) throw DataError("line " + std::to_string(lineno) + ": expected key = value");
        kv[std::string(text::trim(t.substr(0, eq)))] = std::string(text::trim(t.substr(eq + 1)));
    }
    return kv;
}

namespace {

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// |FFT|^2 of a real sequence, bins 0..N/2.
std::vector<double> power_spectrum(const std::vector<double>& x) {
    const int n = static_cast<int>(x.size());
    std::vector<double> in = x;
    std::vector<fftw_complex> out(static_cast<std::size_t>(n / 2 + 1));
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(n, in.data(), out.data(), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    std::vector<double> p(out.size());
    for (std::size_t k = 0; k < out.size(); ++k) p[k] = out[k][0] * out[k][0] + out[k][1] * out[k][1];
    return p;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

// Truncated Fourier series over [lo, hi], evaluated over one period around c.
double local_visibility(const std::vector<double>& x, const std::vector<double>& y, double c, double period) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::abs(x[i] - c) <= period) {
            xs.push_back(x[i]);
            ys.push_back(y[i]);
        }
    }
    const int harmonics = std::min(4, (static_cast<int>(xs.size()) - 1) / 4);
    if (harmonics < 1) {
        if (ys.empty()) return 0.0;
        const auto [mn, mx] = std::minmax_element(ys.begin(), ys.end());
        return (*mx + *mn) > 0.0 ? (*mx - *mn) / (*mx + *mn) : 0.0;
    }
    const double omega = 2.0 * std::numbers::pi / period;
    Eigen::MatrixXd a(static_cast<Eigen::Index>(xs.size()), 2 * harmonics + 1);
    Eigen::VectorXd b(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        a(r, 0) = 1.0;
        for (int h = 1; h <= harmonics; ++h) {
            a(r, 2 * h - 1) = std::cos(h * omega * (xs[i] - c));
            a(r, 2 * h) = std::sin(h * omega * (xs[i] - c));
        }
        b(r) = ys[i];
    }
    const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(b);
    double mn = std::numeric_limits<double>::infinity(), mx = -mn;
    for (int i = 0; i < 512; ++i) {
        const double t = -0.5 * period + period * i / 511.0;
        double v = coef(0);
        for (int h = 1; h <= harmonics; ++h) {
            v += coef(2 * h - 1) * std::cos(h * omega * t) + coef(2 * h) * std::sin(h * omega * t);
        }
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    mn = std::max(mn, 0.0);
    return (mx + mn) > 0.0 ? std::clamp((mx - mn) / (mx + mn), 0.0, 1.0) : 0.0;
}

}  // namespace

FringeMetrics fringe_metrics(const ScanRecord& scan) {
    validate(scan);
    std::vector<double> x = scan.positions;
    std::vector<double> y(scan.counts.begin(), scan.counts.end());
    if (x.size() > 1 && x[1] < x[0]) {
        std::reverse(x.begin(), x.end());
        std::reverse(y.begin(), y.end());
    }
    const int n = static_cast<int>(x.size());
    if (n < 16) throw DataError("no fringes detected: scan too short");
    const double step = (x.back() - x.front()) / (n - 1);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
    if (!(mean > 0.0)) throw DataError("no fringes detected: scan has no counts");

    std::vector<double> windowed(static_cast<std::size_t>(n));
    double dc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
        windowed[static_cast<std::size_t>(i)] = (y[static_cast<std::size_t>(i)] - mean) * hann;
        dc += y[static_cast<std::size_t>(i)] * hann;
    }
    const auto p = power_spectrum(windowed);
    const int kmin = 4;  // at least four fringes across the scan
    const int kmax = static_cast<int>(p.size()) - 2;
    if (kmax <= kmin) throw DataError("no fringes detected: scan too short");
    const double floor = median(std::vector<double>(p.begin() + kmin, p.begin() + kmax + 1));

    int best = -1;
    for (int k = kmin; k <= kmax; ++k) {
        if (p[k] < p[k - 1] || p[k] < p[k + 1]) continue;
        const double valley = *std::min_element(p.begin() + kmin, p.begin() + k + 1);
        if (p[k] < 10.0 * valley) continue;
        if (p[k] < 25.0 * floor) continue;
        if (p[k] < 1e-6 * dc * dc) continue;
        if (best < 0 || p[k] > p[best]) best = k;
    }
    if (best < 0) throw DataError("no fringes detected");

    double shift = 0.0;
    {
        const double a = std::log(std::max(p[best - 1], 1e-300));
        const double b = std::log(p[best]);
        const double c = std::log(std::max(p[best + 1], 1e-300));
        const double denom = a - 2.0 * b + c;
        if (denom < 0.0) shift = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
    }
    FringeMetrics m;
    m.spectral_bin = 1.0 / (n * step);
    m.period = 1.0 / ((best + shift) * m.spectral_bin);

    // Envelope center: maximum of the scan averaged over one period.
    const int half = std::max(1, static_cast<int>(std::lround(0.5 * m.period / step)));
    int center_idx = 0;
    double best_avg = -1.0;
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        int cnt = 0;
        for (int j = std::max(0, i - half); j <= std::min(n - 1, i + half); ++j, ++cnt) s += y[j];
        if (s / cnt > best_avg) {
            best_avg = s / cnt;
            center_idx = i;
        }
    }
    m.visibility = local_visibility(x, y, x[static_cast<std::size_t>(center_idx)], m.period);

    // Envelope: Gaussian through the per-period maxima (log-quadratic least squares).
    std::vector<double> mx, my;
    const double global_max = *std::max_element(y.begin(), y.end());
    for (double lo = x.front(); lo < x.back(); lo += m.period) {
        double bx = 0.0, by = -1.0;
        for (int i = 0; i < n; ++i) {
            if (x[i] >= lo && x[i] < lo + m.period && y[i] > by) {
                by = y[i];
                bx = x[i];
            }
        }
        if (by > 0.05 * global_max) {
            mx.push_back(bx);
            my.push_back(by);
        }
    }
    m.envelope_width = std::numeric_limits<double>::infinity();
    if (mx.size() >= 3) {
        const double xc = x[static_cast<std::size_t>(center_idx)];
        Eigen::MatrixXd a(static_cast<Eigen::Index>(mx.size()), 3);
        Eigen::VectorXd b(static_cast<Eigen::Index>(mx.size()));
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double t = mx[i] - xc;
            const double w = std::sqrt(my[i]);
            a.row(static_cast<Eigen::Index>(i)) << w, w * t, w * t * t;
            b(static_cast<Eigen::Index>(i)) = w * std::log(my[i]);
        }
        const Eigen::Vector3d coef = a.colPivHouseholderQr().solve(b);
        // Intensity exp(-2 t^2 / W^2) => quadratic coefficient -2 / W^2.
        if (coef(2) < 0.0) {
            const double w = std::sqrt(-2.0 / coef(2));
            if (w < 1e3 * (x.back() - x.front())) m.envelope_width = w;
        }
    }
    return m;
}

}  // namespace bpl
