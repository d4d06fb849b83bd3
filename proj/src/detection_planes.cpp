#include "bpl/detection_planes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "bpl/errors.hpp"
#include "quadrature.hpp"

namespace bpl {

using std::numbers::pi;

const char* to_string(CipEnvelope e) { return e == CipEnvelope::Verbatim ? "verbatim" : "paraxial"; }

CipEnvelope parse_envelope(const std::string& s) {
    if (s == "verbatim") return CipEnvelope::Verbatim;
    if (s == "paraxial") return CipEnvelope::Paraxial;
    throw ConfigError("unknown envelope '" + s + "' (expected verbatim or paraxial)");
}

std::complex<double> image_plane_amplitude(double x, const BiphotonPathState& state) {
    const double w2 = state.waist * state.waist;
    std::complex<double> sum{0.0, 0.0};
    for (Eigen::Index l = 0; l < state.amplitudes.size(); ++l) {
        const double u = x - static_cast<double>(l) * state.pitch;
        sum += state.amplitudes(l) * std::exp(-u * u / w2);
    }
    return sum;
}

double image_plane_diagonal(double x, const BiphotonPathState& state, double f_i, double k,
                            bool include_lens_phase) {
    std::complex<double> a = image_plane_amplitude(x, state);
    if (include_lens_phase) a *= std::polar(1.0, k * x * x / f_i);
    return std::norm(a);
}

namespace {

double gaussian_unit(double u, double sigma) {
    return std::exp(-0.5 * (u / sigma) * (u / sigma)) / (sigma * std::sqrt(2.0 * pi));
}

// Integral of |psi(v)|^2 over [a, b], closed form.
double diagonal_mass(const BiphotonPathState& state, double a, double b) {
    if (!(b > a)) return 0.0;
    const double w = state.waist;
    const double d = state.pitch;
    const double pref = 0.5 * w * std::sqrt(0.5 * pi);
    double sum = 0.0;
    const auto n = state.amplitudes.size();
    for (Eigen::Index l = 0; l < n; ++l) {
        for (Eigen::Index m = 0; m < n; ++m) {
            const double coef = (state.amplitudes(l) * std::conj(state.amplitudes(m))).real();
            if (coef == 0.0) continue;
            const double dl = static_cast<double>(l - m) * d;
            const double c = 0.5 * static_cast<double>(l + m) * d;
            const double cross = std::exp(-dl * dl / (2.0 * w * w));
            const double span = std::erf(std::sqrt(2.0) * (b - c) / w) - std::erf(std::sqrt(2.0) * (a - c) / w);
            sum += coef * cross * pref * span;
        }
    }
    return sum;
}

double psi_sq(double v, const BiphotonPathState& state) { return std::norm(image_plane_amplitude(v, state)); }

}  // namespace

double image_plane_joint(double x1, double x2, const BiphotonPathState& state, double sigma_h) {
    const double v = 0.5 * (x1 + x2);
    const double u = x1 - x2;
    if (sigma_h > 0.0) return psi_sq(v, state) * gaussian_unit(u, sigma_h);
    return u == 0.0 ? psi_sq(v, state) : 0.0;
}

double image_plane_rate(const BiphotonPathState& state, double sigma_h, Aperture det1, Aperture det2) {
    const double s1 = det1.width, s2 = det2.width;
    const double x1 = det1.center, x2 = det2.center;
    const double delta = x1 - x2;

    if (sigma_h == 0.0) {
        if (s1 > 0.0 && s2 > 0.0) {
            const double lo = std::max(x1 - 0.5 * s1, x2 - 0.5 * s2);
            const double hi = std::min(x1 + 0.5 * s1, x2 + 0.5 * s2);
            return diagonal_mass(state, lo, hi);
        }
        if (s1 > 0.0) return std::abs(delta) <= 0.5 * s1 ? psi_sq(x2, state) : 0.0;
        if (s2 > 0.0) return std::abs(delta) <= 0.5 * s2 ? psi_sq(x1, state) : 0.0;
        const double tol = 1e-12 * std::max(state.pitch, state.waist);
        return std::abs(delta) <= tol ? psi_sq(x1, state) : 0.0;
    }

    if (s1 == 0.0 && s2 == 0.0) return image_plane_joint(x1, x2, state, sigma_h);
    if (s1 == 0.0 || s2 == 0.0) {
        const Aperture slit = s1 > 0.0 ? det1 : det2;
        const double point = s1 > 0.0 ? x2 : x1;
        const double lo = std::max(slit.center - 0.5 * slit.width, point - 12.0 * sigma_h);
        const double hi = std::min(slit.center + 0.5 * slit.width, point + 12.0 * sigma_h);
        return quad::integrate([&](double y) { return image_plane_joint(y, point, state, sigma_h); }, lo, hi, 8);
    }

    // Sum/difference coordinates: u = x1' - x2', v = (x1' + x2')/2, unit Jacobian.
    const double half = 0.5 * (s1 + s2);
    const double ulo = std::max(delta - half, -12.0 * sigma_h);
    const double uhi = std::min(delta + half, 12.0 * sigma_h);
    if (!(uhi > ulo)) return 0.0;
    auto inner = [&](double u) {
        const double vlo = std::max(x1 - 0.5 * s1 - 0.5 * u, x2 - 0.5 * s2 + 0.5 * u);
        const double vhi = std::min(x1 + 0.5 * s1 - 0.5 * u, x2 + 0.5 * s2 + 0.5 * u);
        return gaussian_unit(u, sigma_h) * diagonal_mass(state, vlo, vhi);
    };
    std::vector<double> cuts{ulo, uhi, delta - 0.5 * (s1 - s2), delta + 0.5 * (s1 - s2), 0.0};
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double a = std::max(cuts[i], ulo), b = std::min(cuts[i + 1], uhi);
        total += quad::integrate(inner, a, b, 6);
    }
    return total;
}

DiscreteJointCoeffs model_joint_coeffs(const BiphotonPathState& state, double sigma_h) {
    const int n = state.dimension();
    Eigen::MatrixXd w(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            w(i, j) = image_plane_rate(state, sigma_h, {i * state.pitch, state.pitch}, {j * state.pitch, state.pitch});
        }
    }
    return DiscreteJointCoeffs::from_weights(w);
}

JointMap image_plane_joint_map(const BiphotonPathState& state, double sigma_h,
                               const std::vector<double>& x1, const std::vector<double>& x2) {
    if (x1.size() < 2 || x2.size() < 2) throw ConfigError("joint map grids need at least two points");
    JointMap map{x1, x2, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x1.size()), static_cast<Eigen::Index>(x2.size()))};
    const double d1 = x1[1] - x1[0], d2 = x2[1] - x2[0];
    if (sigma_h > 0.0) {
        for (std::size_t i = 0; i < x1.size(); ++i) {
            for (std::size_t j = 0; j < x2.size(); ++j) {
                map.density(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    image_plane_joint(x1[i], x2[j], state, sigma_h);
            }
        }
    } else {
        if (x1 != x2) throw ConfigError("a delta-correlated joint map needs identical grids");
        for (std::size_t i = 0; i < x1.size(); ++i) {
            map.density(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = psi_sq(x1[i], state) / d1;
        }
    }
    const double total = map.density.sum() * d1 * d2;
    if (total > 0.0) map.density /= total;
    return map;
}

double fourier_plane_cip(double x_i, double x_s, const BiphotonPathState& state, double f_F, double k,
                         CipEnvelope envelope) {
    const double s = x_s + x_i;
    const double envelope_arg = envelope == CipEnvelope::Verbatim
                                    ? k * state.waist * state.waist * s * s / f_F
                                    : k * k * state.waist * state.waist * s * s / (f_F * f_F);
    const double pre = (2.0 * k / f_F) * (2.0 * k / f_F) * std::exp(-envelope_arg);
    const double phase_step = 2.0 * k * state.pitch * s / f_F;
    std::complex<double> sum{0.0, 0.0};
    for (Eigen::Index l = 0; l < state.amplitudes.size(); ++l) {
        sum += state.amplitudes(l) * std::polar(pre, phase_step * static_cast<double>(l));
    }
    return std::norm(sum);
}

double cip_fringe_period(double f_F, double k, double pitch) { return pi * f_F / (k * pitch); }

double cip_envelope_width(const BiphotonPathState& state, double f_F, double k, CipEnvelope envelope) {
    // Intensity envelope exp(-2 s^2 / W^2).
    if (envelope == CipEnvelope::Verbatim) return std::sqrt(f_F / (k * state.waist * state.waist));
    return f_F / (k * state.waist);
}

double fourier_plane_rate(const BiphotonPathState& state, double f_F, double k, CipEnvelope envelope,
                          Aperture det_i, Aperture det_s) {
    const double s0 = det_i.center + det_s.center;
    auto cip = [&](double s) { return fourier_plane_cip(0.0, s, state, f_F, k, envelope); };
    const double a = det_i.width, b = det_s.width;
    if (a == 0.0 && b == 0.0) return cip(s0);
    if (a == 0.0 || b == 0.0) {
        const double w = std::max(a, b);
        return quad::integrate(cip, s0 - 0.5 * w, s0 + 0.5 * w, 4);
    }
    // Two boxes in the sum coordinate convolve to a trapezoid.
    const double outer = 0.5 * (a + b);
    const double inner = 0.5 * std::abs(a - b);
    const double flat = std::min(a, b);
    auto weight = [&](double t) { return std::min(flat, outer - std::abs(t)); };
    auto f = [&](double t) { return weight(t) * cip(s0 + t); };
    return quad::integrate(f, -outer, -inner, 4) + quad::integrate(f, -inner, inner, 4) +
           quad::integrate(f, inner, outer, 4);
}

DensityFn slit_convolve(DensityFn density, double slit_width) {
    if (slit_width < 0.0) throw ConfigError("slit width must be >= 0");
    if (slit_width == 0.0) return density;
    return [density = std::move(density), slit_width](double x) {
        return quad::integrate([&](double t) { return density(x - t); }, -0.5 * slit_width, 0.5 * slit_width, 16) /
               slit_width;
    };
}

JointDensityFn slit_convolve(JointDensityFn density, double slit_width_1, double slit_width_2) {
    if (slit_width_1 < 0.0 || slit_width_2 < 0.0) throw ConfigError("slit width must be >= 0");
    return [density = std::move(density), slit_width_1, slit_width_2](double x1, double x2) {
        auto row = [&](double y1) {
            return slit_convolve([&](double y2) { return density(y1, y2); }, slit_width_2)(x2);
        };
        return slit_convolve(DensityFn(row), slit_width_1)(x1);
    };
}

std::vector<double> linear_grid(double start, double stop, int n) {
    if (n < 2) throw ConfigError("grid needs at least two points");
    std::vector<double> g(static_cast<std::size_t>(n));
    const double h = (stop - start) / (n - 1);
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = start + i * h;
    return g;
}

std::vector<double> aligned_grid(double start, double stop, double step) {
    if (!(step > 0.0) || !(stop > start)) throw ConfigError("scan grid needs step > 0 and stop > start");
    const auto first = static_cast<long long>(std::ceil(start / step - 1e-9));
    const auto last = static_cast<long long>(std::floor(stop / step + 1e-9));
    std::vector<double> g;
    for (long long i = first; i <= last; ++i) g.push_back(static_cast<double>(i) * step);
    return g;
}

std::vector<double> default_image_grid(const BiphotonPathState& state, int n) {
    const double center = 0.5 * (state.dimension() - 1) * state.pitch;
    const double half = state.dimension() * state.pitch + 6.0 * state.waist;
    return linear_grid(center - half, center + half, n);
}

std::vector<double> default_fourier_grid(const BiphotonPathState& state, double f_F, double k,
                                         CipEnvelope envelope, double x_i, int n) {
    const double half = std::min(4.0 * cip_envelope_width(state, f_F, k, envelope),
                                 32.0 * cip_fringe_period(f_F, k, state.pitch));
    return linear_grid(-x_i - half, -x_i + half, n);
}

DetectionSetup DetectionSetup::from(const SourceConfig& cfg, double fourier_slit, CipEnvelope envelope) {
    DetectionSetup s;
    s.f_i = cfg.f_i;
    s.f_F = cfg.f_F;
    s.k_down = cfg.k_down();
    s.sigma_h = std::hypot(cfg.phase_matching_width, cfg.resolution_width);
    s.image_slit = cfg.slit_width;
    s.fourier_slit = fourier_slit;
    s.envelope = envelope;
    return s;
}

double plane_rate(Plane plane, const BiphotonPathState& state, const DetectionSetup& setup,
                  double fixed_position, double scanned_position) {
    if (plane == Plane::Image) {
        return image_plane_rate(state, setup.sigma_h, {fixed_position, setup.image_slit},
                                {scanned_position, setup.image_slit});
    }
    return fourier_plane_rate(state, setup.f_F, setup.k_down, setup.envelope, {fixed_position, setup.fourier_slit},
                              {scanned_position, setup.fourier_slit});
}

double image_peak_width(const BiphotonPathState& state, const DetectionSetup& setup) {
    const double half = 0.5 * state.pitch;
    double m0 = 0.0, m2 = 0.0;
    for (double x : linear_grid(-half, half, 801)) {
        const double r = plane_rate(Plane::Image, state, setup, 0.0, x);
        m0 += r;
        m2 += r * x * x;
    }
    if (!(m0 > 0.0)) return 0.0;
    return std::sqrt(m2 / m0);
}

double peak_rate(Plane plane, const BiphotonPathState& state, const DetectionSetup& setup) {
    double best = 0.0;
    if (plane == Plane::Image) {
        for (int l = 0; l < state.dimension(); ++l) {
            const double x = l * state.pitch;
            best = std::max(best, plane_rate(plane, state, setup, x, x));
        }
    } else {
        const double period = cip_fringe_period(setup.f_F, setup.k_down, state.pitch);
        for (double s : linear_grid(-period, period, 401)) {
            best = std::max(best, plane_rate(plane, state, setup, 0.0, s));
        }
    }
    return best;
}

std::vector<double> expected_counts(Plane plane, double fixed_position, std::span<const double> grid,
                                    const BiphotonPathState& state, const DetectionSetup& setup,
                                    double mean_peak_counts) {
    const double peak = peak_rate(plane, state, setup);
    if (!(peak > 0.0)) throw DataError("detection model has zero peak rate");
    std::vector<double> out;
    out.reserve(grid.size());
    for (double x : grid) out.push_back(mean_peak_counts * plane_rate(plane, state, setup, fixed_position, x) / peak);
    return out;
}

ScanRecord synth_scan(Plane plane, double fixed_position, std::span<const double> grid,
                      const BiphotonPathState& state, const DetectionSetup& setup, double mean_peak_counts,
                      std::uint64_t seed) {
    if (grid.empty()) throw ConfigError("scan grid is empty");
    if (!(mean_peak_counts >= 0.0)) throw ConfigError("mean_peak_counts must be >= 0");
    const auto mean = expected_counts(plane, fixed_position, grid, state, setup, mean_peak_counts);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    std::mt19937_64 rng(seq);
    ScanRecord rec;
    rec.plane = plane;
    rec.fixed_position = fixed_position;
    rec.positions.assign(grid.begin(), grid.end());
    rec.step = grid.size() > 1 ? std::abs(grid[1] - grid[0]) : 0.0;
    rec.slit_width = plane == Plane::Image ? setup.image_slit : setup.fourier_slit;
    rec.integration_label = "synthetic";
    rec.seed = seed;
    rec.counts.reserve(mean.size());
    for (double m : mean) {
        if (m > 0.0) {
            std::poisson_distribution<std::int64_t> pd(m);
            rec.counts.push_back(pd(rng));
        } else {
            rec.counts.push_back(0);
        }
    }
    validate(rec);
    return rec;
}

}  // namespace bpl
