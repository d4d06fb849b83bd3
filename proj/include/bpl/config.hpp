#pragma once

// Experiment configuration: a flat `key = value` file with [section]
// headers. Lengths carry unit suffixes (m, cm, mm, um, nm) and angles
// carry deg or rad; everything is stored in SI.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bpl/biphoton_state.hpp"
#include "bpl/detection_planes.hpp"
#include "bpl/gaussian_beam.hpp"
#include "bpl/jones_optics.hpp"

namespace bpl {

struct ScanPlan {
    std::optional<std::vector<double>> image_fixed;  // default: path centers
    double image_step = 0.20e-3;
    std::optional<double> image_margin;              // default: d
    std::vector<double> fourier_fixed{0.0};
    double fourier_step = 5e-6;
    std::optional<double> fourier_half_span;         // default: min(4 envelopes, 32 periods)
    double fourier_slit = 50e-6;

    friend bool operator==(const ScanPlan&, const ScanPlan&) = default;
};

struct NoisePlan {
    double mean_peak_counts = 1e4;
    std::uint64_t seed = 1;

    friend bool operator==(const NoisePlan&, const NoisePlan&) = default;
};

struct AnalysisSettings {
    double tau_diag = kDefaultDiagonalTolerance;
    int n_resamples = 200;
    CipEnvelope envelope = CipEnvelope::Verbatim;

    friend bool operator==(const AnalysisSettings&, const AnalysisSettings&) = default;
};

struct ExperimentConfig {
    SourceConfig source;
    std::vector<OpticalElement> chain;
    std::optional<std::vector<double>> amplitudes;  // direct |A_l| specification, bypasses the chain
    ScanPlan scan;
    NoisePlan noise;
    AnalysisSettings analysis;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Parses and validates. Parse errors name the line; validation errors list
/// every violated invariant. Both throw ConfigError.
ExperimentConfig parse_config(std::istream& is, const std::string& source_name = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

void write_config(std::ostream& os, const ExperimentConfig& cfg);

/// Every violated invariant, empty when valid.
std::vector<std::string> validate(const ExperimentConfig& cfg);

/// Length with unit suffix, e.g. "0.20 mm" or "355nm". Returns meters.
double parse_length(const std::string& text);

PumpAmplitudes pump_from_config(const ExperimentConfig& cfg);
BiphotonPathState state_from_config(const ExperimentConfig& cfg);
DetectionSetup detection_from_config(const ExperimentConfig& cfg);

std::vector<double> image_fixed_positions(const ExperimentConfig& cfg);
std::vector<double> image_scan_grid(const ExperimentConfig& cfg);
std::vector<double> fourier_scan_grid(const ExperimentConfig& cfg, const BiphotonPathState& state, double x_i);

}  // namespace bpl
