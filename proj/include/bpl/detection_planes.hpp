#pragma once

// Coincidence observables at the image (2f-2f) and Fourier (f-f) planes,
// detector slit averaging, and Poisson-sampled synthetic scans.

#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bpl/biphoton_state.hpp"
#include "bpl/gaussian_beam.hpp"
#include "bpl/scan_record.hpp"

namespace bpl {

/// Envelope of the conditional interference pattern. `Verbatim` uses
/// exp(-k w0^2 s^2 / f); `Paraxial` uses exp(-k^2 w0^2 s^2 / f^2),
/// the transform of the pump angular spectrum at transverse momentum 2ks/f.
enum class CipEnvelope { Verbatim, Paraxial };

const char* to_string(CipEnvelope e);
CipEnvelope parse_envelope(const std::string& s);

/// Detector acceptance: center and full slit width (0 = point detector).
struct Aperture {
    double center = 0.0;
    double width = 0.0;
};

/// sum_l A_l exp(-(x - l d)^2 / w0^2): the path-mode superposition seen at the image plane.
std::complex<double> image_plane_amplitude(double x, const BiphotonPathState& state);

/// Coincidence density for x_i = x_s = x. The quadratic lens phase has unit
/// modulus; it is kept as an option only so its cancellation can be checked.
double image_plane_diagonal(double x, const BiphotonPathState& state, double f_i, double k,
                            bool include_lens_phase = true);

/// Joint density |psi((x1 + x2)/2)|^2 h(x1 - x2), h a unit-area Gaussian of
/// width sigma_h = sqrt(sigma_pm^2 + sigma_res^2). For sigma_h == 0 h is a
/// Dirac delta; the function then returns 0 off the diagonal and the delta
/// coefficient |psi(x)|^2 on it.
double image_plane_joint(double x1, double x2, const BiphotonPathState& state, double sigma_h);

/// Coincidence rate with both detectors integrated over their slits.
double image_plane_rate(const BiphotonPathState& state, double sigma_h, Aperture det1, Aperture det2);

/// Probabilities of a coincidence in path windows (i d +- d/2, j d +- d/2),
/// normalized over all D^2 window pairs.
DiscreteJointCoeffs model_joint_coeffs(const BiphotonPathState& state, double sigma_h);

struct JointMap {
    std::vector<double> x1;
    std::vector<double> x2;
    Eigen::MatrixXd density;  // density(i, j) at (x1[i], x2[j]), integrates to 1
};

/// Normalized joint map on uniform grids. With sigma_h == 0 the delta is
/// discretized onto the diagonal cells, which requires x1 == x2.
JointMap image_plane_joint_map(const BiphotonPathState& state, double sigma_h,
                               const std::vector<double>& x1, const std::vector<double>& x2);

/// Fourier-plane conditional interference pattern. Depends on x_s + x_i only.
double fourier_plane_cip(double x_i, double x_s, const BiphotonPathState& state, double f_F, double k,
                         CipEnvelope envelope = CipEnvelope::Verbatim);

/// Fringe period in the sum coordinate: pi f_F / (k d).
double cip_fringe_period(double f_F, double k, double pitch);

/// 1/e^2 half-width of the intensity envelope in the sum coordinate.
double cip_envelope_width(const BiphotonPathState& state, double f_F, double k, CipEnvelope envelope);

double fourier_plane_rate(const BiphotonPathState& state, double f_F, double k, CipEnvelope envelope,
                          Aperture det_i, Aperture det_s);

using DensityFn = std::function<double(double)>;
using JointDensityFn = std::function<double(double, double)>;

/// Boxcar average over a slit of the given full width. Zero width is the identity.
DensityFn slit_convolve(DensityFn density, double slit_width);
JointDensityFn slit_convolve(JointDensityFn density, double slit_width_1, double slit_width_2);

/// Uniform grid of n points.
std::vector<double> linear_grid(double start, double stop, int n);

/// Positions k * step covering [start, stop], so grid points land on path centers.
std::vector<double> aligned_grid(double start, double stop, double step);

/// 2048 points over center +- (D d + 6 w0).
std::vector<double> default_image_grid(const BiphotonPathState& state, int n = 2048);

/// Detector-2 positions for a Fourier scan with detector 1 at x_i: centered on
/// s = 0, half-span min(4 envelope widths, 32 fringe periods).
std::vector<double> default_fourier_grid(const BiphotonPathState& state, double f_F, double k,
                                         CipEnvelope envelope, double x_i, int n = 2048);

/// Everything needed to turn a state into detector rates.
struct DetectionSetup {
    double f_i = 0.0;
    double f_F = 0.0;
    double k_down = 0.0;
    double sigma_h = 0.0;
    double image_slit = 0.0;
    double fourier_slit = 0.0;
    CipEnvelope envelope = CipEnvelope::Verbatim;

    static DetectionSetup from(const SourceConfig& cfg, double fourier_slit, CipEnvelope envelope);
};

/// RMS width of the image-plane coincidence peak seen by a detector-2 scan
/// with detector 1 on a path center.
double image_peak_width(const BiphotonPathState& state, const DetectionSetup& setup);

/// Slit-averaged rate at (fixed, scanned) for the chosen plane.
double plane_rate(Plane plane, const BiphotonPathState& state, const DetectionSetup& setup,
                  double fixed_position, double scanned_position);

/// Largest slit-averaged rate of the plane; it maps to mean_peak_counts.
double peak_rate(Plane plane, const BiphotonPathState& state, const DetectionSetup& setup);

/// Expected counts along a scan (rate scaled so peak_rate -> mean_peak_counts).
std::vector<double> expected_counts(Plane plane, double fixed_position, std::span<const double> grid,
                                    const BiphotonPathState& state, const DetectionSetup& setup,
                                    double mean_peak_counts);

/// Poisson-sampled scan; deterministic for a given seed.
ScanRecord synth_scan(Plane plane, double fixed_position, std::span<const double> grid,
                      const BiphotonPathState& state, const DetectionSetup& setup, double mean_peak_counts,
                      std::uint64_t seed);

}  // namespace bpl
