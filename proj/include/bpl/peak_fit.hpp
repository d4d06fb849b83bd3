#pragma once

#include <span>
#include <vector>

#include "bpl/scan_record.hpp"

namespace bpl {

/// Gaussian a * exp(-(x - center)^2 / (2 width^2)); area in counts * meters.
struct PeakFit {
    int index = -1;               // expected center this peak is assigned to
    double expected_center = 0.0;
    double center = 0.0;
    double width = 0.0;
    double amplitude = 0.0;
    double area = 0.0;
    double center_err = 0.0;
    double width_err = 0.0;
    double area_err = 0.0;
    double reduced_chi2 = 0.0;
    bool converged = false;
    bool width_fixed = false;     // under-resolved: only the amplitude was fitted
    bool empty = false;           // window without counts, area reported as 0
    bool tie = false;             // center equidistant to two expected centers
};

struct PeakFitOptions {
    double window_half_width = 0.0;  // +- around each expected center
    double expected_width = 0.0;     // model prediction, used for initialization
    // Free width fits need expected_width >= ratio * step; below that the
    // width is held at the prediction.
    double min_resolved_ratio = 0.5;
};

/// One fit per expected center, in the order given.
std::vector<PeakFit> fit_peaks(const ScanRecord& scan, std::span<const double> expected_centers,
                               const PeakFitOptions& options);

}  // namespace bpl
