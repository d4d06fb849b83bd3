#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bpl/detection_planes.hpp"
#include "bpl/errors.hpp"
#include "oracles.hpp"

using namespace bpl;
using std::numbers::pi;

namespace {

constexpr double kD = 1e-3;
constexpr double kW = 56.4e-6;
constexpr double kF = 0.5;
const double kK = 2 * pi / 710e-9;

BiphotonPathState equal_state(int D, double w = kW, double d = kD) {
    return build_state(Eigen::VectorXcd::Constant(D, 1.0 / std::sqrt(D)), w, d);
}

DetectionSetup setup(double image_slit, double fourier_slit, double sigma_h = 0.0) {
    DetectionSetup s;
    s.f_i = 0.25;
    s.f_F = kF;
    s.k_down = kK;
    s.sigma_h = sigma_h;
    s.image_slit = image_slit;
    s.fourier_slit = fourier_slit;
    return s;
}

// |sum A_l exp(-(x - l d)^2 / w^2)|^2 written out independently.
double psi_sq_oracle(double x, const Eigen::VectorXcd& a, double w, double d) {
    std::complex<double> s = 0;
    for (int l = 0; l < a.size(); ++l) s += a(l) * std::exp(-(x - l * d) * (x - l * d) / (w * w));
    return std::norm(s);
}

double gauss(double u, double sigma) { return std::exp(-0.5 * u * u / (sigma * sigma)) / (sigma * std::sqrt(2 * pi)); }

}  // namespace

TEST_CASE("image plane diagonal") {
    const auto one = equal_state(1);
    for (double x : {0.0, 10e-6, 40e-6, 100e-6}) {
        CHECK(image_plane_diagonal(x, one, 0.25, kK) ==
              doctest::Approx(std::exp(-2 * x * x / (kW * kW))).epsilon(1e-14));
    }

    const double w = 300e-6;
    const auto two = equal_state(2, w);
    const double per_path_peak = 0.5;
    CHECK(image_plane_diagonal(kD / 2, two, 0.25, kK) ==
          doctest::Approx(4 * std::exp(-kD * kD / (2 * w * w)) * per_path_peak).epsilon(1e-13));
}

TEST_CASE("lens phase does not change the diagonal") {
    const auto s = build_state((Eigen::VectorXcd(3) << 0.6, std::complex<double>(0, 0.48), 0.64).finished(), 400e-6, kD);
    for (double x = -1e-3; x < 3e-3; x += 0.0731e-3) {
        CHECK(std::abs(image_plane_diagonal(x, s, 0.25, kK, true) - image_plane_diagonal(x, s, 0.25, kK, false)) <
              1e-12);
    }
}

TEST_CASE("shifting every path shifts the pattern") {
    const auto a = equal_state(2, 300e-6);
    const auto shifted = build_state((Eigen::VectorXcd(3) << 0.0, 1 / std::sqrt(2.0), 1 / std::sqrt(2.0)).finished(),
                                     300e-6, kD);
    for (double x = -1e-3; x < 2e-3; x += 0.1e-3) {
        CHECK(image_plane_diagonal(x + kD, shifted, 0.25, kK, false) ==
              doctest::Approx(image_plane_diagonal(x, a, 0.25, kK, false)).epsilon(1e-13));
    }
}

TEST_CASE("delta-correlated joint density") {
    const auto s = equal_state(2);
    CHECK(image_plane_joint(0.0, 1e-6, s, 0.0) == 0.0);
    CHECK(image_plane_joint(10e-6, 10e-6, s, 0.0) == doctest::Approx(psi_sq_oracle(10e-6, s.amplitudes, kW, kD)));
}

TEST_CASE("cross peaks vanish for well separated paths") {
    const auto s = equal_state(2);
    const double sigma = 5e-6;
    auto mass = [&](double c1, double c2) {
        return oracle::simpson2([&](double x1, double x2) { return image_plane_joint(x1, x2, s, sigma); },
                                c1 - kD / 2, c1 + kD / 2, c2 - kD / 2, c2 + kD / 2, 600);
    };
    const double diag = mass(0, 0) + mass(kD, kD);
    const double cross = mass(0, kD) + mass(kD, 0);
    CHECK(cross / diag < 1e-6);
}

TEST_CASE("window rates match two-dimensional quadrature") {
    // d = 2 w0 with a finite correlation width spreads mass into the cross windows.
    const double w = 50e-6, d = 100e-6, sigma = 30e-6;
    const auto s = equal_state(2, w, d);
    auto brute = [&](double c1, double c2) {
        return oracle::simpson2(
            [&](double x1, double x2) {
                return psi_sq_oracle(0.5 * (x1 + x2), s.amplitudes, w, d) * gauss(x1 - x2, sigma);
            },
            c1 - d / 2, c1 + d / 2, c2 - d / 2, c2 + d / 2, 600);
    };
    const auto coeffs = model_joint_coeffs(s, sigma);
    const double b00 = brute(0, 0), b01 = brute(0, d), b10 = brute(d, 0), b11 = brute(d, d);
    const double total = b00 + b01 + b10 + b11;
    CHECK(coeffs(0, 0) == doctest::Approx(b00 / total).epsilon(1e-7));
    CHECK(coeffs(0, 1) == doctest::Approx(b01 / total).epsilon(1e-7));
    CHECK(coeffs(1, 0) == doctest::Approx(b10 / total).epsilon(1e-7));
    CHECK(coeffs(1, 1) == doctest::Approx(b11 / total).epsilon(1e-7));
    CHECK(coeffs.off_diagonal_mass() > 0.01);

    const double rate = image_plane_rate(s, sigma, {0.0, 40e-6}, {20e-6, 60e-6});
    const double ref = oracle::simpson2(
        [&](double x1, double x2) { return psi_sq_oracle(0.5 * (x1 + x2), s.amplitudes, w, d) * gauss(x1 - x2, sigma); },
        -20e-6, 20e-6, -10e-6, 50e-6, 600);
    CHECK(rate == doctest::Approx(ref).epsilon(1e-8));
}

TEST_CASE("slit-averaged delta-correlated rate") {
    const auto s = equal_state(2);
    for (double offset : {0.0, 30e-6, 70e-6, 120e-6}) {
        const double rate = image_plane_rate(s, 0.0, {0.0, 100e-6}, {offset, 100e-6});
        const double lo = std::max(-50e-6, offset - 50e-6), hi = std::min(50e-6, offset + 50e-6);
        const double ref =
            hi > lo ? oracle::simpson([&](double x) { return psi_sq_oracle(x, s.amplitudes, kW, kD); }, lo, hi) : 0.0;
        CHECK(rate == doctest::Approx(ref).epsilon(1e-10));
    }
}

TEST_CASE("joint map normalization") {
    const auto s = equal_state(2, 300e-6);
    const auto g = linear_grid(-1e-3, 2e-3, 121);
    for (double sigma : {0.0, 50e-6}) {
        const auto m = image_plane_joint_map(s, sigma, g, g);
        const double h = g[1] - g[0];
        CHECK(m.density.sum() * h * h == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(m.density.minCoeff() >= 0.0);
    }
}

TEST_CASE("Fourier plane pattern") {
    const auto one = equal_state(1);
    const double period = cip_fringe_period(kF, kK, kD);
    CHECK(period == doctest::Approx(0.1775e-3).epsilon(1e-12));
    CHECK(period == doctest::Approx(710e-9 * kF / (2 * kD)).epsilon(1e-14));

    // D = 1: monotone envelope in |s|, no fringes.
    double prev = fourier_plane_cip(0.0, 0.0, one, kF, kK, CipEnvelope::Paraxial);
    for (double s = 1e-6; s < 5e-3; s += 1e-5) {
        const double v = fourier_plane_cip(0.0, s, one, kF, kK, CipEnvelope::Paraxial);
        CHECK(v <= prev);
        prev = v;
    }

    const auto two = equal_state(2);
    for (auto env : {CipEnvelope::Verbatim, CipEnvelope::Paraxial}) {
        const double peak = fourier_plane_cip(0.0, 0.0, two, kF, kK, env);
        CHECK(fourier_plane_cip(0.0, period / 2, two, kF, kK, env) < 1e-20 * peak);
        const double ratio = fourier_plane_cip(0.0, period, two, kF, kK, env) / peak;
        const double env_ratio = fourier_plane_cip(0.0, period, one, kF, kK, env) /
                                 fourier_plane_cip(0.0, 0.0, one, kF, kK, env);
        CHECK(ratio == doctest::Approx(env_ratio).epsilon(1e-12));
    }
}

TEST_CASE("three-path principal to secondary maxima") {
    const auto three = equal_state(3);
    const double period = cip_fringe_period(kF, kK, kD);
    // |sum_l exp(i l phi)|^2 over one period.
    double principal = 0, secondary = 0;
    for (int i = 0; i <= 20000; ++i) {
        const double phi = 2 * pi * i / 20000.0;
        const double v = std::norm(1.0 + std::polar(1.0, phi) + std::polar(1.0, 2 * phi));
        principal = std::max(principal, v);
        if (phi > 2 * pi / 3 && phi < 4 * pi / 3) secondary = std::max(secondary, v);
    }
    CHECK(secondary / principal == doctest::Approx(1.0 / 9.0).epsilon(1e-8));

    const double p = fourier_plane_cip(0.0, 0.0, three, kF, kK);
    const double sec = fourier_plane_cip(0.0, period / 2, three, kF, kK);
    CHECK(sec / p == doctest::Approx(secondary / principal).epsilon(1e-5));
}

TEST_CASE("Fourier pattern depends on the coordinate sum only") {
    const auto s = build_state((Eigen::VectorXcd(3) << 0.5, std::complex<double>(0, 0.5), std::sqrt(0.5)).finished(),
                               kW, kD);
    for (auto env : {CipEnvelope::Verbatim, CipEnvelope::Paraxial}) {
        const double peak = fourier_plane_cip(0, 0, s, kF, kK, env);
        for (double xi : {-0.3e-3, 0.0, 0.2e-3}) {
            for (double delta = -1e-3; delta <= 1e-3; delta += 0.0173e-3) {
                const double a = fourier_plane_cip(xi, 0.05e-3, s, kF, kK, env);
                const double b = fourier_plane_cip(xi + delta, 0.05e-3 - delta, s, kF, kK, env);
                CHECK(std::abs(a - b) < 1e-10 * peak);
            }
        }
    }
}

TEST_CASE("envelope widths") {
    const auto s = equal_state(1);
    const double wv = cip_envelope_width(s, kF, kK, CipEnvelope::Verbatim);
    const double wp = cip_envelope_width(s, kF, kK, CipEnvelope::Paraxial);
    for (auto [env, w] : {std::pair{CipEnvelope::Verbatim, wv}, std::pair{CipEnvelope::Paraxial, wp}}) {
        const double ratio = fourier_plane_cip(0, w, s, kF, kK, env) / fourier_plane_cip(0, 0, s, kF, kK, env);
        CHECK(ratio == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
    }
}

TEST_CASE("slit convolution") {
    DensityFn f = [](double x) { return std::exp(-x * x / 2e-8) * (1 + 0.5 * std::cos(x / 3e-5)); };
    auto same = slit_convolve(f, 0.0);
    CHECK(same(1.3e-4) == f(1.3e-4));

    auto flat = slit_convolve([](double) { return 2.5; }, 80e-6);
    CHECK(flat(0.3) == doctest::Approx(2.5).epsilon(1e-14));

    auto conv = slit_convolve(f, 60e-6);
    for (double x : {-2e-4, 0.0, 1.1e-4}) {
        CHECK(conv(x) == doctest::Approx(oracle::boxcar(f, x, 60e-6)).epsilon(1e-9));
    }

    const double total = oracle::simpson(f, -2e-3, 2e-3, 40000);
    const double smoothed = oracle::simpson(conv, -2e-3, 2e-3, 40000);
    CHECK(smoothed == doctest::Approx(total).epsilon(1e-9));

    CHECK_THROWS_AS(slit_convolve(f, -1.0), ConfigError);
}

TEST_CASE("slit averaging reduces fringe visibility by a sinc") {
    const double period = 0.1775e-3;
    DensityFn fringe = [&](double s) { return 1 + std::cos(2 * pi * s / period); };
    auto visibility = [&](const DensityFn& g) {
        const double mx = g(0.0), mn = g(period / 2);
        return (mx - mn) / (mx + mn);
    };
    for (double slit : {20e-6, 50e-6, 100e-6}) {
        const double arg = pi * slit / period;
        const double expect = std::abs(std::sin(arg) / arg);
        CHECK(visibility(slit_convolve(fringe, slit)) == doctest::Approx(expect).epsilon(1e-9));
        CHECK(visibility([&](double x) { return oracle::boxcar(fringe, x, slit); }) ==
              doctest::Approx(expect).epsilon(1e-7));
    }
    CHECK(std::abs(std::sin(pi * 0.05 / 0.1775) / (pi * 0.05 / 0.1775)) == doctest::Approx(0.873).epsilon(1e-3));
    CHECK(visibility(slit_convolve(fringe, period)) < 1e-9);
}

TEST_CASE("two-slit Fourier rate equals the double boxcar") {
    const auto s = equal_state(2);
    const double a = 50e-6, b = 30e-6;
    for (double xs : {0.0, 0.04e-3, 0.09e-3}) {
        const double rate = fourier_plane_rate(s, kF, kK, CipEnvelope::Verbatim, {0.0, a}, {xs, b});
        const double ref = oracle::simpson2(
            [&](double x1, double x2) { return fourier_plane_cip(x1, x2, s, kF, kK, CipEnvelope::Verbatim); },
            -a / 2, a / 2, xs - b / 2, xs + b / 2, 400);
        CHECK(rate == doctest::Approx(ref).epsilon(1e-8));
    }
}

TEST_CASE("grids") {
    const auto g = aligned_grid(-1e-3, 2e-3, 0.2e-3);
    CHECK(g.size() == 16);
    CHECK(std::find(g.begin(), g.end(), 0.0) != g.end());
    CHECK(g[5] == 0.0);
    CHECK(g[10] == 0.2e-3 * 5);
    CHECK_THROWS_AS(aligned_grid(0, 1, 0), ConfigError);

    const auto s = equal_state(3);
    const auto img = default_image_grid(s);
    CHECK(img.size() == 2048);
    CHECK(img.front() == doctest::Approx(kD - (3 * kD + 6 * kW)).epsilon(1e-12));
    const auto four = default_fourier_grid(s, kF, kK, CipEnvelope::Paraxial, 0.1e-3);
    CHECK((four.front() + four.back()) / 2 == doctest::Approx(-0.1e-3).epsilon(1e-9));
    CHECK(four.back() - four.front() ==
          doctest::Approx(8 * cip_envelope_width(s, kF, kK, CipEnvelope::Paraxial)).epsilon(1e-12));
}

TEST_CASE("synthetic scans") {
    const auto s = equal_state(2);
    const auto st = setup(100e-6, 50e-6);
    const auto grid = aligned_grid(-1e-3, 2e-3, 0.02e-3);

    const auto a = synth_scan(Plane::Image, 0.0, grid, s, st, 1e4, 42);
    const auto b = synth_scan(Plane::Image, 0.0, grid, s, st, 1e4, 42);
    CHECK(a.counts == b.counts);
    CHECK(a.seed == std::optional<std::uint64_t>(42));
    const auto c = synth_scan(Plane::Image, 0.0, grid, s, st, 1e4, 43);
    CHECK(a.counts != c.counts);

    const auto zero = synth_scan(Plane::Image, 0.0, grid, s, st, 0.0, 1);
    CHECK(std::all_of(zero.counts.begin(), zero.counts.end(), [](auto n) { return n == 0; }));

    CHECK_THROWS_AS(synth_scan(Plane::Image, 0.0, std::vector<double>{}, s, st, 1e4, 1), ConfigError);
}

TEST_CASE("high-count scans follow the model within Poisson bands") {
    const auto s = equal_state(3);
    const auto st = setup(100e-6, 50e-6);
    const auto four_grid = default_fourier_grid(s, kF, kK, CipEnvelope::Verbatim, 0.0, 1500);
    const auto image_grid = linear_grid(-0.2e-3, 2.2e-3, 1500);
    for (auto [plane, grid] : {std::pair{Plane::Image, image_grid}, std::pair{Plane::Fourier, four_grid}}) {
        const auto mean = expected_counts(plane, 0.0, grid, s, st, 1e6);
        const auto rec = synth_scan(plane, 0.0, grid, s, st, 1e6, 9);
        int inside = 0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (std::abs(static_cast<double>(rec.counts[i]) - mean[i]) <= 3 * std::sqrt(std::max(mean[i], 1.0))) {
                ++inside;
            }
        }
        CHECK(inside >= 0.99 * static_cast<double>(grid.size()));
        CHECK(*std::max_element(mean.begin(), mean.end()) <= 1e6 * (1 + 1e-12));
    }
}

TEST_CASE("count totals scale with the peak setting") {
    const auto s = equal_state(2);
    const auto st = setup(100e-6, 50e-6);
    const auto grid = aligned_grid(-1e-3, 2e-3, 0.01e-3);
    auto total = [&](double peak) {
        const auto rec = synth_scan(Plane::Image, kD, grid, s, st, peak, 77);
        double t = 0;
        for (auto n : rec.counts) t += static_cast<double>(n);
        return t;
    };
    const double t1 = total(1e4), t2 = total(4e4);
    CHECK(std::abs(t2 - 4 * t1) < 3 * std::sqrt(t2 + 16 * t1));
}

TEST_CASE("peak width prediction") {
    const auto s = equal_state(2);
    const double slit = 100e-6;
    // Delta correlation: the rate is the |psi|^2 mass where both slits overlap.
    auto rate = [&](double x) {
        const double lo = std::max(-slit / 2, x - slit / 2), hi = std::min(slit / 2, x + slit / 2);
        if (hi <= lo) return 0.0;
        return oracle::simpson([&](double v) { return psi_sq_oracle(v, s.amplitudes, kW, kD); }, lo, hi, 400);
    };
    const double m2 = oracle::simpson([&](double x) { return x * x * rate(x); }, -slit, slit, 2000);
    const double m0 = oracle::simpson(rate, -slit, slit, 2000);
    CHECK(image_peak_width(s, setup(slit, 50e-6)) == doctest::Approx(std::sqrt(m2 / m0)).epsilon(1e-3));
}
