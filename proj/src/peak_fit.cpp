#include "bpl/peak_fit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>

#include "bpl/errors.hpp"

namespace bpl {

namespace {

const double kSqrt2Pi = std::sqrt(2.0 * std::numbers::pi);

struct Window {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> weight;  // 1 / variance, variance = max(count, 1)
};

// Parameters: center, log(width), amplitude.
struct GaussianResidual {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    const Window* w;

    int inputs() const { return 3; }
    int values() const { return static_cast<int>(w->x.size()); }

    int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
        const double sigma = std::exp(p(1));
        for (int i = 0; i < values(); ++i) {
            const double z = (w->x[i] - p(0)) / sigma;
            r(i) = (p(2) * std::exp(-0.5 * z * z) - w->y[i]) * std::sqrt(w->weight[i]);
        }
        return 0;
    }

    int df(const Eigen::VectorXd& p, Eigen::MatrixXd& j) const {
        const double sigma = std::exp(p(1));
        for (int i = 0; i < values(); ++i) {
            const double z = (w->x[i] - p(0)) / sigma;
            const double g = std::exp(-0.5 * z * z);
            const double sw = std::sqrt(w->weight[i]);
            j(i, 0) = p(2) * g * z / sigma * sw;
            j(i, 1) = p(2) * g * z * z * sw;
            j(i, 2) = g * sw;
        }
        return 0;
    }
};

double chi2_reduced(const Window& w, double center, double sigma, double amp, int nparams) {
    double chi2 = 0.0;
    for (std::size_t i = 0; i < w.x.size(); ++i) {
        const double z = (w.x[i] - center) / sigma;
        const double r = amp * std::exp(-0.5 * z * z) - w.y[i];
        chi2 += r * r * w.weight[i];
    }
    const int dof = static_cast<int>(w.x.size()) - nparams;
    return dof > 0 ? chi2 / dof : 0.0;
}

bool fit_free(const Window& w, double center0, double width0, PeakFit& out) {
    Eigen::VectorXd p(3);
    p << center0, std::log(width0), *std::max_element(w.y.begin(), w.y.end());
    GaussianResidual f{&w};
    Eigen::LevenbergMarquardt<GaussianResidual> lm(f);
    lm.parameters.ftol = 1e-14;
    lm.parameters.xtol = 1e-14;
    lm.parameters.maxfev = 2000;
    const auto status = lm.minimize(p);
    using namespace Eigen::LevenbergMarquardtSpace;
    const bool ok = status == RelativeReductionTooSmall || status == RelativeErrorTooSmall ||
                    status == RelativeErrorAndReductionTooSmall || status == CosinusTooSmall ||
                    status == XtolTooSmall || status == FtolTooSmall || status == GtolTooSmall;
    if (!ok || !p.allFinite()) return false;

    Eigen::MatrixXd jac(f.values(), 3);
    f.df(p, jac);
    const Eigen::Matrix3d fisher = jac.transpose() * jac;
    if (!(fisher.diagonal().minCoeff() > 0.0)) return false;
    // Unit-diagonal scaling: the parameters differ by many orders of magnitude.
    const Eigen::Vector3d scale = fisher.diagonal().cwiseSqrt().cwiseInverse();
    const Eigen::Matrix3d scaled = scale.asDiagonal() * fisher * scale.asDiagonal();
    Eigen::FullPivLU<Eigen::Matrix3d> lu(scaled);
    if (!lu.isInvertible()) return false;
    const Eigen::Matrix3d cov = scale.asDiagonal() * lu.inverse() * scale.asDiagonal();

    const double sigma = std::exp(p(1));
    out.center = p(0);
    out.width = sigma;
    out.amplitude = p(2);
    out.area = p(2) * sigma * kSqrt2Pi;
    Eigen::Vector3d grad(0.0, p(2) * sigma * kSqrt2Pi, sigma * kSqrt2Pi);
    out.center_err = std::sqrt(std::max(cov(0, 0), 0.0));
    out.width_err = sigma * std::sqrt(std::max(cov(1, 1), 0.0));
    out.area_err = std::sqrt(std::max(grad.dot(cov * grad), 0.0));
    out.reduced_chi2 = chi2_reduced(w, p(0), sigma, p(2), 3);
    out.converged = true;
    out.width_fixed = false;
    return std::isfinite(out.area_err) && out.area >= 0.0;
}

void fit_fixed_width(const Window& w, double center, double sigma, PeakFit& out) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < w.x.size(); ++i) {
        const double z = (w.x[i] - center) / sigma;
        const double g = std::exp(-0.5 * z * z);
        num += w.weight[i] * w.y[i] * g;
        den += w.weight[i] * g * g;
    }
    out.center = center;
    out.width = sigma;
    out.center_err = 0.0;
    out.width_err = 0.0;
    if (!(den > 0.0)) {
        out.amplitude = 0.0;
        out.area = 0.0;
        out.area_err = 0.0;
        out.converged = false;
        out.width_fixed = true;
        return;
    }
    out.amplitude = std::max(num / den, 0.0);
    out.area = out.amplitude * sigma * kSqrt2Pi;
    out.area_err = sigma * kSqrt2Pi / std::sqrt(den);
    out.reduced_chi2 = chi2_reduced(w, center, sigma, out.amplitude, 1);
    out.converged = true;
    out.width_fixed = true;
}

// Nearest expected center; ties go to the lower index.
int nearest_center(std::span<const double> centers, double x, bool& tie) {
    int best = 0;
    double best_d = std::abs(x - centers[0]);
    tie = false;
    for (std::size_t i = 1; i < centers.size(); ++i) {
        const double dist = std::abs(x - centers[i]);
        if (dist < best_d - 1e-15) {
            best = static_cast<int>(i);
            best_d = dist;
            tie = false;
        } else if (std::abs(dist - best_d) <= 1e-15) {
            tie = true;
        }
    }
    return best;
}

}  // namespace

std::vector<PeakFit> fit_peaks(const ScanRecord& scan, std::span<const double> expected_centers,
                               const PeakFitOptions& options) {
    validate(scan);
    if (expected_centers.empty()) throw ConfigError("no expected peak centers");
    if (!(options.window_half_width > 0.0)) throw ConfigError("peak window half-width must be positive");
    std::int64_t total = 0;
    for (auto c : scan.counts) total += c;
    if (total == 0) throw DataError("no signal: scan has zero coincidences");

    const double step = scan.step > 0.0 ? scan.step
                                        : std::abs(scan.positions.back() - scan.positions.front()) /
                                              static_cast<double>(std::max<std::size_t>(scan.positions.size() - 1, 1));
    const double width0 = options.expected_width > 0.0 ? options.expected_width : options.window_half_width / 3.0;
    const bool resolved = width0 >= options.min_resolved_ratio * step;

    std::vector<PeakFit> fits;
    for (std::size_t j = 0; j < expected_centers.size(); ++j) {
        const double c0 = expected_centers[j];
        Window w;
        for (std::size_t i = 0; i < scan.positions.size(); ++i) {
            if (std::abs(scan.positions[i] - c0) <= options.window_half_width * (1.0 + 1e-9)) {
                w.x.push_back(scan.positions[i]);
                const auto y = static_cast<double>(scan.counts[i]);
                w.y.push_back(y);
                w.weight.push_back(1.0 / std::max(y, 1.0));
            }
        }
        if (w.x.size() < 5) {
            throw DataError("fewer than 5 scan points in the window around " + std::to_string(c0 * 1e3) + " mm");
        }
        PeakFit fit;
        fit.index = static_cast<int>(j);
        fit.expected_center = c0;
        if (std::all_of(w.y.begin(), w.y.end(), [](double y) { return y == 0.0; })) {
            fit.center = c0;
            fit.width = width0;
            fit.empty = true;
            fits.push_back(fit);
            continue;
        }
        bool ok = false;
        if (resolved) {
            ok = fit_free(w, c0, width0, fit);
            if (ok) {
                const bool inside = std::abs(fit.center - c0) <= options.window_half_width &&
                                    fit.width <= 2.0 * options.window_half_width;
                bool tie = false;
                const int idx = nearest_center(expected_centers, fit.center, tie);
                ok = inside && (idx == static_cast<int>(j) || tie);
                fit.tie = tie;
                if (ok && tie) fit.index = idx;
            }
        }
        if (!ok) {
            fit.tie = false;
            fit.index = static_cast<int>(j);
            fit_fixed_width(w, c0, width0, fit);
        }
        fits.push_back(fit);
    }
    return fits;
}

}  // namespace bpl
