#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "bpl/analysis.hpp"
#include "bpl/detection_planes.hpp"
#include "bpl/errors.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace bpl;
using std::numbers::pi;

namespace {

constexpr double kD = 1e-3;
constexpr double kW = 56.4e-6;
const double kK = 2 * pi / 710e-9;

DetectionSetup bench_setup(double fourier_slit = 50e-6) {
    DetectionSetup s;
    s.f_i = 0.25;
    s.f_F = 0.5;
    s.k_down = kK;
    s.image_slit = 100e-6;
    s.fourier_slit = fourier_slit;
    return s;
}

BiphotonPathState state_from(std::vector<double> probs) {
    Eigen::VectorXcd a(static_cast<Eigen::Index>(probs.size()));
    for (std::size_t i = 0; i < probs.size(); ++i) a(static_cast<Eigen::Index>(i)) = std::sqrt(probs[i]);
    return build_state(a, kW, kD);
}

std::vector<ScanRecord> image_scans(const BiphotonPathState& s, const DetectionSetup& st, double peak,
                                    std::uint64_t seed, double step = 0.2e-3) {
    const int D = s.dimension();
    const auto grid = aligned_grid(-kD, (D - 1) * kD + kD, step);
    std::vector<ScanRecord> out;
    for (int i = 0; i < D; ++i) out.push_back(synth_scan(Plane::Image, i * kD, grid, s, st, peak, seed + i));
    return out;
}

AnalysisPlan plan_for(const BiphotonPathState& s, const DetectionSetup& st, std::uint64_t seed = 3) {
    AnalysisPlan p;
    p.D = s.dimension();
    p.pitch = kD;
    p.expected_width = image_peak_width(s, st);
    p.seed = seed;
    p.n_resamples = 100;
    return p;
}

// Scan with exact model counts (no noise), rounded.
ScanRecord gaussian_scan(const std::vector<double>& centers, const std::vector<double>& areas, double sigma,
                         double step, double lo, double hi) {
    ScanRecord r;
    r.plane = Plane::Image;
    r.step = step;
    for (double x = lo; x <= hi + 1e-12; x += step) {
        double y = 0;
        for (std::size_t i = 0; i < centers.size(); ++i) {
            const double u = x - centers[i];
            y += areas[i] / (sigma * std::sqrt(2 * pi)) * std::exp(-0.5 * u * u / (sigma * sigma));
        }
        r.positions.push_back(x);
        r.counts.push_back(std::llround(y));
    }
    return r;
}

}  // namespace

TEST_CASE("concurrence formulas") {
    const double r2 = 1 / std::sqrt(2.0), r3 = 1 / std::sqrt(3.0);
    CHECK(concurrence_2x2(std::vector{r2, r2}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(concurrence_2x2(std::vector{1.0, 0.0}) == 0.0);
    CHECK(concurrence_3x3(std::vector{r3, r3, r3}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(concurrence_3x3(std::vector{1.0, 0.0, 0.0}) == 0.0);
    CHECK_THROWS_AS(concurrence_2x2(std::vector{0.5, 0.5}), DataError);
    CHECK_THROWS_AS(concurrence_3x3(std::vector{r2, r2}), DataError);
}

TEST_CASE("concurrence is symmetric, bounded and matches the general form") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 500; ++t) {
        for (int D : {2, 3, 4, 6}) {
            std::vector<double> k(static_cast<std::size_t>(D));
            double n = 0;
            for (auto& x : k) {
                x = u(rng);
                n += x * x;
            }
            for (auto& x : k) x /= std::sqrt(n);
            const double c = concurrence(k);
            CHECK(c >= 0.0);
            CHECK(c <= 1.0 + 1e-9);
            auto shuffled = k;
            std::shuffle(shuffled.begin(), shuffled.end(), rng);
            CHECK(concurrence(shuffled) == doctest::Approx(c).epsilon(1e-13));

            double s4 = 0;
            for (double x : k) s4 += x * x * x * x;
            CHECK(c == doctest::Approx(std::sqrt(D / (D - 1.0) * (1 - s4))).epsilon(1e-12));
        }
    }
}

TEST_CASE("two-qubit concurrence grows toward balance") {
    double prev = -1;
    for (double p = 0.0; p <= 0.5 + 1e-12; p += 0.01) {
        const double c = concurrence_2x2(std::vector{std::sqrt(1 - p), std::sqrt(p)});
        CHECK(c > prev);
        prev = c;
    }
}

TEST_CASE("peak fit recovers an exact Gaussian") {
    // Large counts keep integer rounding below the tolerance.
    const double area = 1e9 * 1e-5, sigma = 0.1e-3;
    const auto scan = gaussian_scan({0.0}, {area}, sigma, 1e-5, -0.5e-3, 0.5e-3);
    PeakFitOptions o;
    o.window_half_width = 0.5e-3;
    o.expected_width = 0.09e-3;
    const auto fits = fit_peaks(scan, std::vector{0.0}, o);
    REQUIRE(fits.size() == 1);
    CHECK(fits[0].converged);
    CHECK_FALSE(fits[0].width_fixed);
    CHECK(fits[0].area == doctest::Approx(area).epsilon(1e-6));
    CHECK(fits[0].width == doctest::Approx(sigma).epsilon(1e-6));
    CHECK(std::abs(fits[0].center) < 1e-9);
}

TEST_CASE("peak fit area ratio within Poisson errors") {
    std::mt19937_64 rng(8);
    const double sigma = 0.08e-3, step = 0.02e-3;
    const double peak = 1e5;
    const double a0 = 2 * peak * sigma * std::sqrt(2 * pi), a1 = a0 / 2;
    auto scan = gaussian_scan({0.0, 1e-3}, {a0, a1}, sigma, step, -0.5e-3, 1.5e-3);
    for (auto& c : scan.counts) c = std::poisson_distribution<std::int64_t>(static_cast<double>(std::max<std::int64_t>(c, 0)) + 1e-9)(rng);
    PeakFitOptions o;
    o.window_half_width = 0.5e-3;
    o.expected_width = sigma;
    const auto fits = fit_peaks(scan, std::vector{0.0, 1e-3}, o);
    const double ratio = fits[0].area / fits[1].area;
    const double err = ratio * std::hypot(fits[0].area_err / fits[0].area, fits[1].area_err / fits[1].area);
    CHECK(std::abs(ratio - 2.0) < 3 * err);
    CHECK(err < 0.01);
}

TEST_CASE("peak fit errors") {
    PeakFitOptions o;
    o.window_half_width = 0.5e-3;
    o.expected_width = 50e-6;
    ScanRecord zero;
    zero.positions = aligned_grid(-1e-3, 2e-3, 0.2e-3);
    zero.counts.assign(zero.positions.size(), 0);
    CHECK(throws_with<DataError>([&] { fit_peaks(zero, std::vector{0.0, 1e-3}, o); }, "no signal"));

    ScanRecord bad = zero;
    bad.counts[3] = 5;
    std::swap(bad.positions[1], bad.positions[2]);
    CHECK_THROWS_AS(fit_peaks(bad, std::vector{0.0}, o), DataError);

    ScanRecord sparse;
    sparse.positions = {-0.4e-3, 0.0, 0.4e-3};
    sparse.counts = {1, 10, 1};
    CHECK(throws_with<DataError>([&] { fit_peaks(sparse, std::vector{0.0}, o); }, "fewer than 5"));
}

TEST_CASE("under-resolved peaks fall back to a fixed width") {
    const auto s = state_from({0.5, 0.5});
    const auto st = bench_setup();
    const auto scans = image_scans(s, st, 1e4, 1);
    const auto fits = fit_image_scans(scans, plan_for(s, st));
    REQUIRE(fits.size() == 2);
    for (const auto& sf : fits) {
        const auto& on = sf.fits[static_cast<std::size_t>(sf.fixed_index)];
        CHECK(on.converged);
        CHECK(on.width_fixed);
        CHECK(on.area > 0);
        CHECK(sf.fits[static_cast<std::size_t>(1 - sf.fixed_index)].empty);
    }
}

TEST_CASE("assemble alpha") {
    const auto s = state_from({0.5, 0.5});
    const auto st = bench_setup();
    const auto plan = plan_for(s, st);
    const auto fits = fit_image_scans(image_scans(s, st, 1e4, 11), plan);
    const auto alpha = assemble_alpha(fits, 2);
    CHECK(alpha.off_diagonal_mass() < 1e-3);
    CHECK(alpha(0, 0) == doctest::Approx(0.5).epsilon(0.03));
    CHECK(alpha.matrix().sum() == doctest::Approx(1.0).epsilon(1e-15));

    std::vector<ScanFits> partial{fits[0]};
    CHECK(throws_with<DataError>([&] { assemble_alpha(partial, 2); }, "path(s) 1"));

    const auto one = state_from({1.0});
    const auto single = assemble_alpha(fit_image_scans(image_scans(one, st, 1e4, 2), plan_for(one, st)), 1);
    CHECK(single.dimension() == 1);
    CHECK(single(0, 0) == 1.0);

    const auto three = state_from({1.0 / 3, 1.0 / 3, 1.0 / 3});
    const auto a3 = assemble_alpha(fit_image_scans(image_scans(three, st, 1e4, 5), plan_for(three, st)), 3);
    CHECK(a3.off_diagonal_mass() < 1e-3);
    for (int i = 0; i < 3; ++i) CHECK(a3(i, i) > 0.3);
}

TEST_CASE("bootstrap is deterministic and rejects small runs") {
    const auto s = state_from({0.7, 0.3});
    const auto st = bench_setup();
    const auto scans = image_scans(s, st, 1e4, 4);
    const auto plan = plan_for(s, st);
    ScanPipeline pipe = [&](const std::vector<ScanRecord>& d) {
        const auto r = entanglement_report(assemble_alpha(fit_image_scans(d, plan), 2));
        return std::vector<double>{r.concurrence};
    };
    const auto a = mc_uncertainty(scans, pipe, 100, 99, 1);
    const auto b = mc_uncertainty(scans, pipe, 100, 99, 3);
    CHECK(a.quantities[0].mean == b.quantities[0].mean);
    CHECK(a.quantities[0].std == b.quantities[0].std);
    CHECK_THROWS_AS(mc_uncertainty(scans, pipe, 99, 99), ConfigError);

    int calls = 0;
    ScanPipeline flaky = [&](const std::vector<ScanRecord>&) -> std::vector<double> {
        if (++calls % 5 == 0) throw DataError("bad resample");
        return {1.0};
    };
    CHECK_THROWS_AS(mc_uncertainty(scans, flaky, 100, 1, 1), ConvergenceError);
}

TEST_CASE("bootstrap spread shrinks with the square root of the counts") {
    // Unbalanced amplitudes: C depends linearly on the fitted probabilities there.
    const auto s = state_from({0.8, 0.2});
    const auto st = bench_setup();
    const auto plan = plan_for(s, st);
    ScanPipeline pipe = [&](const std::vector<ScanRecord>& d) {
        const auto r = entanglement_report(assemble_alpha(fit_image_scans(d, plan), 2));
        return std::vector<double>{r.concurrence};
    };
    const double lo = mc_uncertainty(image_scans(s, st, 1e4, 21), pipe, 200, 5).quantities[0].std;
    const double hi = mc_uncertainty(image_scans(s, st, 1e6, 21), pipe, 200, 5).quantities[0].std;
    CHECK(hi / lo == doctest::Approx(0.1).epsilon(0.25));
}

TEST_CASE("end-to-end recovery within bootstrap errors") {
    const auto st = bench_setup();
    for (const auto& probs : {std::vector{0.8, 0.2}, std::vector{0.5, 0.3, 0.2}}) {
        const auto s = state_from(probs);
        std::vector<double> k(probs.size());
        for (std::size_t i = 0; i < k.size(); ++i) k[i] = std::sqrt(probs[i]);
        std::sort(k.rbegin(), k.rend());
        const double truth = concurrence(k);
        auto plan = plan_for(s, st, 12);
        plan.n_resamples = 200;
        const auto rep = analyze_entanglement(image_scans(s, st, 1e4, 31), plan);
        CHECK(rep.diagonal);
        CHECK(rep.failed_resamples == 0);
        CHECK(std::abs(rep.concurrence - truth) < 3 * rep.concurrence_std);
        CHECK(rep.alpha.sum() == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("report text round-trip") {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(2, 2);
    p(0, 0) = 0.52;
    p(1, 1) = 0.48;
    const auto rep = entanglement_report(DiscreteJointCoeffs(p));
    CHECK(rep.concurrence == doctest::Approx(2 * std::sqrt(0.52 * 0.48)).epsilon(1e-14));
    std::stringstream ss;
    write_report(ss, rep);
    const auto kv = read_key_values(ss);
    CHECK(kv.at("D") == "2");
    CHECK(std::stod(kv.at("concurrence")) == doctest::Approx(rep.concurrence).epsilon(1e-9));
    CHECK(kv.at("diagonal") == "true");
    CHECK(kv.count("alpha_01") == 1);

    Eigen::MatrixXd spread(2, 2);
    spread << 0.4, 0.1, 0.1, 0.4;
    const auto mixed = entanglement_report(DiscreteJointCoeffs(spread));
    CHECK_FALSE(mixed.diagonal);
    CHECK(std::isnan(mixed.concurrence));
}

namespace {

ScanRecord exact_fourier_scan(const BiphotonPathState& s, double slit, double step, int n, double shift = 0.0) {
    ScanRecord r;
    r.plane = Plane::Fourier;
    r.step = step;
    DensityFn cip = [&](double x) { return fourier_plane_cip(0.0, x, s, 0.5, kK, CipEnvelope::Verbatim); };
    auto smooth = slit_convolve(cip, slit);
    const double peak = cip(0.0);
    for (int i = 0; i < n; ++i) {
        const double x = (i - n / 2) * step;
        r.positions.push_back(x + shift);
        r.counts.push_back(std::llround(1e7 * smooth(x) / peak));
    }
    return r;
}

}  // namespace

TEST_CASE("fringe metrics") {
    const auto two = state_from({0.5, 0.5});
    const double period = cip_fringe_period(0.5, kK, kD);
    const auto scan = exact_fourier_scan(two, 0.0, 5e-6, 2048);
    const auto m = fringe_metrics(scan);
    CHECK(std::abs(1 / m.period - 1 / period) <= m.spectral_bin);
    CHECK(m.period == doctest::Approx(0.1775e-3).epsilon(0.01));
    CHECK(m.visibility >= 0.99);

    const auto moved = fringe_metrics(exact_fourier_scan(two, 0.0, 5e-6, 2048, 0.37e-3));
    CHECK(moved.period == doctest::Approx(m.period).epsilon(1e-12));

    const auto slit = fringe_metrics(exact_fourier_scan(two, 50e-6, 5e-6, 2048));
    const double arg = pi * 50e-6 / period;
    CHECK(slit.visibility / m.visibility == doctest::Approx(std::sin(arg) / arg).epsilon(5e-3));

    const auto one = state_from({1.0});
    CHECK(throws_with<DataError>([&] { fringe_metrics(exact_fourier_scan(one, 0.0, 5e-6, 2048)); },
                                 "no fringes detected"));
}

TEST_CASE("fringe metrics on noisy three-path scans") {
    const auto three = state_from({1.0 / 3, 1.0 / 3, 1.0 / 3});
    const auto st = bench_setup(0.0);
    const auto grid = aligned_grid(-32 * 0.1775e-3, 32 * 0.1775e-3, 5e-6);
    const auto scan = synth_scan(Plane::Fourier, 0.0, grid, three, st, 1e4, 3);
    const auto m = fringe_metrics(scan);
    CHECK(m.period == doctest::Approx(0.1775e-3).epsilon(0.01));
    CHECK(m.visibility > 0.95);
}
