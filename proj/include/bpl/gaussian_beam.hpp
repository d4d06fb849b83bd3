#pragma once

// Gaussian pump beam geometry: single-lens focusing and the multi-path pump
// field at the crystal. SI units throughout. Curvature sign convention:
// R < 0 means the wavefront converges toward a waist downstream.

#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bpl {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct BeamParams {
    double wavelength = 0.0;
    double width = 0.0;             // w(z)
    double curvature_radius = kInf;  // R(z), signed
    double gouy = 0.0;              // zeta(z)

    double wavenumber() const;
};

/// Geometry of the source and both detection arms.
struct SourceConfig {
    int D = 1;
    double d = 0.0;             // path pitch
    double lambda_pump = 0.0;
    double lambda_down = 0.0;
    double f_p = 0.0;           // pump focusing lens
    double f_i = 0.0;           // 2f-2f imaging lens
    double f_F = 0.0;           // f-f Fourier lens
    std::optional<double> w_p;  // incident pump width on the focusing lens
    double incident_curvature = kInf;
    double slit_width = 0.0;
    double crystal_length = 0.0;
    double phase_matching_width = 0.0;  // sigma_pm
    double resolution_width = 0.0;      // sigma_res
    double crystal_offset = 0.0;        // crystal plane minus waist plane
    std::optional<double> aperture;     // crystal transverse size

    double k_down() const;

    friend bool operator==(const SourceConfig&, const SourceConfig&) = default;
};

/// Every violated invariant, empty when valid.
std::vector<std::string> validate(const SourceConfig& cfg);

double lens_curvature(double incident_radius, double focal_length);

double waist_after_lens(double incident_width, double wavelength, double curvature_after_lens);

double rayleigh_range(double waist, double wavelength);

/// Beam parameters a distance z past the waist.
BeamParams beam_at(double waist, double wavelength, double z);

/// Focused pump waist w0' for this geometry.
double pump_waist(const SourceConfig& cfg);

/// Pump beam parameters at the crystal plane.
BeamParams beam_at_crystal(const SourceConfig& cfg);

/// Multi-Gaussian pump field: every path shares w(z), R(z) and zeta(z).
std::complex<double> pump_field(double x, double z, const Eigen::VectorXcd& amplitudes,
                                const BeamParams& params, double pitch);

}  // namespace bpl
