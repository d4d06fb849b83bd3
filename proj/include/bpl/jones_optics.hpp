#pragma once

// Jones-calculus model of the parallel beam generator: waveplates and beam
// displacers acting on a pump described by per-path (H, V) amplitudes.

#include <complex>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace bpl {

using cplx = std::complex<double>;
using JonesMatrix = Eigen::Matrix2cd;

enum class Pol { H = 0, V = 1 };

/// Pump field over discrete parallel paths. Path indices are contiguous from 0.
class PolPathField {
public:
    struct Slot {
        cplx h{0.0, 0.0};
        cplx v{0.0, 0.0};
    };

    PolPathField() = default;
    explicit PolPathField(std::vector<Slot> slots);

    /// Single beam on path 0 with unit amplitude in the given polarization.
    static PolPathField single(Pol pol);

    std::size_t num_paths() const noexcept { return slots_.size(); }
    cplx amp(std::size_t path, Pol pol) const;
    const std::vector<Slot>& slots() const noexcept { return slots_; }

    double total_intensity() const noexcept;

private:
    std::vector<Slot> slots_;
};

struct HalfWavePlate {
    double angle = 0.0;  // fast axis from horizontal, radians
    std::optional<std::vector<int>> paths;  // nullopt: every path

    friend bool operator==(const HalfWavePlate&, const HalfWavePlate&) = default;
};

struct QuarterWavePlate {
    double angle = 0.0;
    std::optional<std::vector<int>> paths;

    friend bool operator==(const QuarterWavePlate&, const QuarterWavePlate&) = default;
};

/// Transmits H (o-ray) undeviated and shifts V (e-ray) by one path slot.
struct BeamDisplacer {
    int displacement_sign = +1;
    std::optional<std::vector<int>> paths;

    friend bool operator==(const BeamDisplacer&, const BeamDisplacer&) = default;
};

using OpticalElement = std::variant<HalfWavePlate, QuarterWavePlate, BeamDisplacer>;

JonesMatrix jones_matrix(const OpticalElement& elem);

PolPathField apply_element(const PolPathField& field, const OpticalElement& elem);
PolPathField apply_chain(PolPathField field, std::span<const OpticalElement> chain);

struct PumpAmplitudes {
    Eigen::VectorXcd amplitudes;  // normalized H amplitudes, one per path
    std::vector<double> h_intensity;  // |amp(l, H)|^2 before normalization
    double h_fraction = 0.0;  // SPDC-usable fraction of the pump power
};

/// Only the H component of each pump beam is phase matched.
PumpAmplitudes pump_amplitudes(const PolPathField& field);

/// HWP angle that turns pure H into an H:V intensity split of h_fraction:(1 - h_fraction).
double hwp_angle_for_split(double h_fraction);

/// HWP(theta1) - BD - HWP(theta2).
std::vector<OpticalElement> qubit_recipe(double first_hwp, double second_hwp);

/// HWP(2/3:1/3 split) - BD - HWP(22.5 deg) - BD on the brighter beam - QWP(45 deg).
std::vector<OpticalElement> qutrit_recipe();

}  // namespace bpl
