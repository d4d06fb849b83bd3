#pragma once

// Two-photon path state generated by a multi-beam pump: discrete amplitudes
// plus the Gaussian overlap between neighbouring path modes.

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

namespace bpl {

inline constexpr double kDefaultDiagonalTolerance = 0.05;

struct BiphotonPathState {
    Eigen::VectorXcd amplitudes;  // A_l, unit norm
    double waist = 0.0;           // w0' at the crystal
    double pitch = 0.0;           // d
    Eigen::MatrixXd overlap;      // O_lm = exp(-d^2 (l - m)^2 / (4 w0^2))

    int dimension() const noexcept { return static_cast<int>(amplitudes.size()); }
};

/// Probabilities |alpha_ij|^2: photon 1 in path i, photon 2 in path j.
class DiscreteJointCoeffs {
public:
    DiscreteJointCoeffs() = default;
    /// Throws DataError unless the matrix is square, non-negative and sums to 1 within 1e-9.
    explicit DiscreteJointCoeffs(Eigen::MatrixXd probabilities);

    /// Normalizes a non-negative matrix of weights (e.g. peak areas).
    static DiscreteJointCoeffs from_weights(const Eigen::MatrixXd& weights);

    const Eigen::MatrixXd& matrix() const noexcept { return p_; }
    int dimension() const noexcept { return static_cast<int>(p_.rows()); }
    double operator()(int i, int j) const { return p_(i, j); }
    double off_diagonal_mass() const;

private:
    Eigen::MatrixXd p_;
};

Eigen::MatrixXd overlap_matrix(int dimension, double waist, double pitch);

BiphotonPathState build_state(const Eigen::VectorXcd& amplitudes, double waist, double pitch);

DiscreteJointCoeffs ideal_joint_coeffs(const BiphotonPathState& state);

/// Schmidt coefficients kappa (descending) of a path-correlated state.
/// Throws DataError when the off-diagonal mass exceeds tau_diag.
std::vector<double> schmidt_coefficients(const DiscreteJointCoeffs& coeffs,
                                         double tau_diag = kDefaultDiagonalTolerance);

/// Purity Tr(rho^2) of the Gram-corrected path-basis density matrix.
///
/// The amplitudes sqrt(|alpha_ll|^2) are mapped through the symmetric
/// (Loewdin) square root S = O^{1/2}. Each band of S (fixed path offset
/// m - l) is one Kraus operator of a trace-preserving cross-talk channel;
/// different offsets are distinguishable and add incoherently. O = I leaves
/// the state pure, as does a single fully-overlapped mode.
double state_purity(const DiscreteJointCoeffs& coeffs, const Eigen::MatrixXd& overlap);

/// Columnar text: header lines with waist/pitch, then `path  re  im`.
void write_state(std::ostream& os, const BiphotonPathState& state);
BiphotonPathState read_state(std::istream& is);

/// Columnar text: `i  j  probability [std]`.
void write_coeffs(std::ostream& os, const DiscreteJointCoeffs& coeffs,
                  const Eigen::MatrixXd* stddev = nullptr);
DiscreteJointCoeffs read_coeffs(std::istream& is);

}  // namespace bpl
