#pragma once

// Measurement-to-entanglement pipeline: image-plane peak areas -> joint
// probabilities -> Schmidt coefficients -> concurrence, with a Poisson
// parametric bootstrap for uncertainties; fringe metrics for Fourier scans.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bpl/biphoton_state.hpp"
#include "bpl/peak_fit.hpp"
#include "bpl/scan_record.hpp"

namespace bpl {

double concurrence_2x2(std::span<const double> kappa);
double concurrence_3x3(std::span<const double> kappa);

/// Two qubits and two qutrits use their closed forms; other D use the
/// normalized I-concurrence sqrt(D/(D-1) (1 - sum kappa^4)), which reduces to both.
double concurrence(std::span<const double> kappa);

struct AnalysisPlan {
    int D = 1;
    double pitch = 0.0;
    double expected_width = 0.0;  // predicted width of a coincidence peak
    double tau_diag = kDefaultDiagonalTolerance;
    int n_resamples = 200;
    std::uint64_t seed = 0;
    int threads = 0;  // 0: hardware concurrency

    double window_half_width() const { return 0.5 * pitch; }
};

struct ScanFits {
    int fixed_index = -1;  // path of detector 1
    std::vector<PeakFit> fits;
};

/// Fits every image-plane scan; the fixed detector position picks the path index.
std::vector<ScanFits> fit_image_scans(const std::vector<ScanRecord>& scans, const AnalysisPlan& plan);

/// |alpha_ij|^2 = area(ij) / sum of all areas. Needs one scan per path of detector 1.
DiscreteJointCoeffs assemble_alpha(const std::vector<ScanFits>& fits, int D);

struct QuantitySummary {
    double mean = 0.0;
    double std = 0.0;
};

struct McSummary {
    std::vector<QuantitySummary> quantities;
    int resamples = 0;
    int failures = 0;
};

using ScanPipeline = std::function<std::vector<double>(const std::vector<ScanRecord>&)>;

/// Resamples every count from Poisson(observed) and reruns the pipeline.
/// Resample r draws from its own stream seeded by (seed, r). Throws
/// ConvergenceError when more than 10% of the resamples fail.
McSummary mc_uncertainty(const std::vector<ScanRecord>& scans, const ScanPipeline& pipeline, int n_resamples,
                         std::uint64_t seed, int threads = 0);

struct EntanglementReport {
    int D = 0;
    Eigen::MatrixXd alpha;
    Eigen::MatrixXd alpha_std;
    std::vector<double> kappa;
    std::vector<double> kappa_std;
    double concurrence = 0.0;
    double concurrence_std = 0.0;
    std::string formula;
    double off_diagonal_mass = 0.0;
    double tau_diag = kDefaultDiagonalTolerance;
    bool diagonal = true;
    int n_resamples = 0;
    int failed_resamples = 0;
    std::uint64_t seed = 0;
};

/// Point estimate from joint probabilities; no uncertainties.
EntanglementReport entanglement_report(const DiscreteJointCoeffs& coeffs,
                                       double tau_diag = kDefaultDiagonalTolerance);

/// Full pipeline on image-plane scans, bootstrap uncertainties included.
EntanglementReport analyze_entanglement(const std::vector<ScanRecord>& scans, const AnalysisPlan& plan);

/// `key = value` lines.
void write_report(std::ostream& os, const EntanglementReport& report);
std::map<std::string, std::string> read_key_values(std::istream& is);

struct FringeMetrics {
    double period = 0.0;
    double visibility = 0.0;
    double envelope_width = 0.0;  // 1/e^2 half-width of the intensity envelope, inf when flat
    double spectral_bin = 0.0;    // frequency resolution, 1 / (N step)
};

/// Throws DataError("no fringes detected") when no spectral line stands above the noise floor.
FringeMetrics fringe_metrics(const ScanRecord& scan);

}  // namespace bpl
