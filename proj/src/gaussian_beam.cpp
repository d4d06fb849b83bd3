#include "bpl/gaussian_beam.hpp"

#include <cmath>
#include <numbers>

#include "bpl/errors.hpp"

namespace bpl {

using std::numbers::pi;

double BeamParams::wavenumber() const { return 2.0 * pi / wavelength; }

double SourceConfig::k_down() const { return 2.0 * pi / lambda_down; }

std::vector<std::string> validate(const SourceConfig& cfg) {
    std::vector<std::string> errs;
    auto positive = [&](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) errs.push_back(std::string(name) + " must be positive");
    };
    auto non_negative = [&](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v)) errs.push_back(std::string(name) + " must be >= 0");
    };
    if (cfg.D < 1) errs.emplace_back("D must be >= 1");
    positive(cfg.d, "d");
    positive(cfg.lambda_pump, "lambda_pump");
    positive(cfg.lambda_down, "lambda_down");
    positive(cfg.f_p, "f_p");
    positive(cfg.f_i, "f_i");
    positive(cfg.f_F, "f_F");
    if (!cfg.w_p) {
        errs.emplace_back("w_p required; not specified in paper");
    } else {
        positive(*cfg.w_p, "w_p");
    }
    if (cfg.incident_curvature == 0.0 || std::isnan(cfg.incident_curvature)) {
        errs.emplace_back("incident_curvature must be nonzero");
    }
    non_negative(cfg.slit_width, "slit_width");
    non_negative(cfg.crystal_length, "crystal_length");
    non_negative(cfg.phase_matching_width, "phase_matching_width");
    non_negative(cfg.resolution_width, "resolution_width");
    if (!std::isfinite(cfg.crystal_offset)) errs.emplace_back("crystal_offset must be finite");
    if (cfg.aperture) {
        positive(*cfg.aperture, "aperture");
        if (cfg.D >= 1 && cfg.d > 0.0 && cfg.D * cfg.d > *cfg.aperture) {
            errs.emplace_back("D * d exceeds the crystal aperture");
        }
    }
    return errs;
}

double lens_curvature(double incident_radius, double focal_length) {
    if (focal_length == 0.0) throw ConfigError("focal length must be nonzero");
    const double inv = 1.0 / incident_radius - 1.0 / focal_length;  // 1/inf == 0
    return 1.0 / inv;  // inv == 0 gives +inf
}

double waist_after_lens(double incident_width, double wavelength, double curvature_after_lens) {
    if (!(incident_width > 0.0)) throw ConfigError("incident width must be positive");
    if (!(wavelength > 0.0)) throw ConfigError("wavelength must be positive");
    const double q = pi * incident_width * incident_width / (wavelength * curvature_after_lens);
    return incident_width / std::sqrt(1.0 + q * q);
}

double rayleigh_range(double waist, double wavelength) {
    return pi * waist * waist / wavelength;
}

BeamParams beam_at(double waist, double wavelength, double z) {
    if (!(waist > 0.0) || !(wavelength > 0.0)) {
        throw ConfigError("beam waist and wavelength must be positive");
    }
    const double zr = rayleigh_range(waist, wavelength);
    BeamParams b;
    b.wavelength = wavelength;
    b.width = waist * std::sqrt(1.0 + (z / zr) * (z / zr));
    b.curvature_radius = (z == 0.0) ? kInf : z * (1.0 + (zr / z) * (zr / z));
    b.gouy = std::atan(z / zr);
    return b;
}

double pump_waist(const SourceConfig& cfg) {
    if (!cfg.w_p) throw ConfigError("w_p required; not specified in paper");
    const double r = lens_curvature(cfg.incident_curvature, cfg.f_p);
    return waist_after_lens(*cfg.w_p, cfg.lambda_pump, r);
}

BeamParams beam_at_crystal(const SourceConfig& cfg) {
    return beam_at(pump_waist(cfg), cfg.lambda_pump, cfg.crystal_offset);
}

std::complex<double> pump_field(double x, double z, const Eigen::VectorXcd& amplitudes,
                                const BeamParams& params, double pitch) {
    const double k = params.wavenumber();
    const double w2 = params.width * params.width;
    const double inv_r = std::isinf(params.curvature_radius) ? 0.0 : 1.0 / params.curvature_radius;
    std::complex<double> sum{0.0, 0.0};
    for (Eigen::Index l = 0; l < amplitudes.size(); ++l) {
        const double u = x - static_cast<double>(l) * pitch;
        const double phase = -(k * z + 0.5 * k * u * u * inv_r - params.gouy);
        sum += amplitudes(l) * std::exp(-u * u / w2) * std::polar(1.0, phase);
    }
    return sum;
}

}  // namespace bpl
