#include "bpl/biphoton_state.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <ostream>
#include <string>

#include "bpl/errors.hpp"
#include "text_util.hpp"

namespace bpl {

DiscreteJointCoeffs::DiscreteJointCoeffs(Eigen::MatrixXd probabilities) : p_(std::move(probabilities)) {
    if (p_.rows() != p_.cols() || p_.rows() == 0) {
        throw DataError("joint coefficient matrix must be square and non-empty");
    }
    if ((p_.array() < 0.0).any() || !p_.allFinite()) {
        throw DataError("joint probabilities must be finite and non-negative");
    }
    if (std::abs(p_.sum() - 1.0) > 1e-9) {
        throw DataError("joint probabilities must sum to 1 (got " + text::num(p_.sum(), 12) + ")");
    }
}

DiscreteJointCoeffs DiscreteJointCoeffs::from_weights(const Eigen::MatrixXd& weights) {
    const double total = weights.sum();
    if (!(total > 0.0)) throw DataError("no signal: total weight is zero");
    return DiscreteJointCoeffs(weights / total);
}

double DiscreteJointCoeffs::off_diagonal_mass() const {
    return p_.sum() - p_.diagonal().sum();
}

Eigen::MatrixXd overlap_matrix(int dimension, double waist, double pitch) {
    Eigen::MatrixXd o(dimension, dimension);
    const double scale = pitch * pitch / (4.0 * waist * waist);
    for (int l = 0; l < dimension; ++l) {
        for (int m = 0; m < dimension; ++m) {
            const double dl = static_cast<double>(l - m);
            o(l, m) = std::exp(-scale * dl * dl);
        }
    }
    return o;
}

BiphotonPathState build_state(const Eigen::VectorXcd& amplitudes, double waist, double pitch) {
    if (!(pitch > 0.0)) throw ConfigError("d must be positive");
    if (!(waist > 0.0)) throw ConfigError("w0 must be positive");
    if (amplitudes.size() == 0) throw ConfigError("amplitude vector is empty");
    if (std::abs(amplitudes.squaredNorm() - 1.0) > 1e-9) {
        throw ConfigError("pump amplitudes must be normalized");
    }
    BiphotonPathState s;
    s.amplitudes = amplitudes;
    s.waist = waist;
    s.pitch = pitch;
    s.overlap = overlap_matrix(static_cast<int>(amplitudes.size()), waist, pitch);
    return s;
}

DiscreteJointCoeffs ideal_joint_coeffs(const BiphotonPathState& state) {
    const auto n = state.amplitudes.size();
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index l = 0; l < n; ++l) p(l, l) = std::norm(state.amplitudes(l));
    return DiscreteJointCoeffs(std::move(p));
}

std::vector<double> schmidt_coefficients(const DiscreteJointCoeffs& coeffs, double tau_diag) {
    const double off = coeffs.off_diagonal_mass();
    if (off > tau_diag) {
        throw DataError("state not path-correlated; Schmidt form invalid (off-diagonal mass " +
                        text::num(off, 6) + " > " + text::num(tau_diag, 6) + ")");
    }
    const Eigen::VectorXd diag = coeffs.matrix().diagonal();
    const double total = diag.sum();
    if (!(total > 0.0)) throw DataError("no diagonal probability mass");
    std::vector<double> kappa(static_cast<std::size_t>(diag.size()));
    for (Eigen::Index l = 0; l < diag.size(); ++l) {
        kappa[static_cast<std::size_t>(l)] = std::sqrt(diag(l) / total);
    }
    std::sort(kappa.begin(), kappa.end(), std::greater<>());
    return kappa;
}

namespace {

// Each band of the symmetric square root O^{1/2} is one Kraus operator.
double cross_talk_purity(const Eigen::VectorXd& psi, const Eigen::MatrixXd& overlap) {
    const int n = static_cast<int>(psi.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(overlap);
    const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd root = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();

    Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(n, n);
    for (int shift = -(n - 1); shift <= n - 1; ++shift) {
        Eigen::VectorXd branch = Eigen::VectorXd::Zero(n);
        for (int l = 0; l < n; ++l) {
            const int m = l + shift;
            if (m < 0 || m >= n) continue;
            branch(m) += root(m, l) * psi(l);
        }
        rho += branch * branch.transpose();
    }
    const double tr = rho.trace();
    return (rho * rho).trace() / (tr * tr);
}

}  // namespace

double state_purity(const DiscreteJointCoeffs& coeffs, const Eigen::MatrixXd& overlap) {
    const int n = coeffs.dimension();
    if (overlap.rows() != n || overlap.cols() != n) {
        throw DataError("overlap matrix dimension does not match the coefficients");
    }
    Eigen::VectorXd p = coeffs.matrix().diagonal();
    const double total = p.sum();
    if (!(total > 0.0)) throw DataError("no diagonal probability mass");
    p /= total;

    // Paths with unit overlap carry the same mode: merge them into one level
    // whose pair amplitude is the coherent sum.
    std::vector<int> rep;
    std::vector<double> amp;
    for (int l = 0; l < n; ++l) {
        std::size_t c = 0;
        while (c < rep.size() && overlap(rep[c], l) < 1.0 - 1e-12) ++c;
        if (c == rep.size()) {
            rep.push_back(l);
            amp.push_back(0.0);
        }
        amp[c] += std::sqrt(p(l));
    }
    const int m_eff = static_cast<int>(rep.size());
    Eigen::VectorXd psi(m_eff);
    Eigen::MatrixXd reduced(m_eff, m_eff);
    for (int a = 0; a < m_eff; ++a) {
        psi(a) = amp[a];
        for (int b = 0; b < m_eff; ++b) reduced(a, b) = overlap(rep[a], rep[b]);
    }
    return cross_talk_purity(psi, reduced);
}

void write_state(std::ostream& os, const BiphotonPathState& state) {
    os << "# waist_m: " << text::num(state.waist) << '\n';
    os << "# pitch_m: " << text::num(state.pitch) << '\n';
    os << "# path\tre\tim\n";
    for (Eigen::Index l = 0; l < state.amplitudes.size(); ++l) {
        os << l << '\t' << text::num(state.amplitudes(l).real()) << '\t'
           << text::num(state.amplitudes(l).imag()) << '\n';
    }
}

namespace {

// Header lines of the form "# key: value".
bool header_value(std::string_view line, std::string_view key, std::string& value) {
    line = text::trim(line);
    if (line.empty() || line.front() != '#') return false;
    line = text::trim(line.substr(1));
    const auto colon = line.find(':');
    if (colon == std::string_view::npos || text::trim(line.substr(0, colon)) != key) return false;
    value = std::string(text::trim(line.substr(colon + 1)));
    return true;
}

}  // namespace

BiphotonPathState read_state(std::istream& is) {
    std::optional<double> waist, pitch;
    std::vector<std::pair<long, std::complex<double>>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string v;
        if (header_value(line, "waist_m", v)) { waist = text::parse_double(v); continue; }
        if (header_value(line, "pitch_m", v)) { pitch = text::parse_double(v); continue; }
        const auto t = text::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto cols = text::split_ws(t);
        const auto idx = cols.size() == 3 ? text::parse_int<long>(cols[0]) : std::nullopt;
        const auto re = cols.size() == 3 ? text::parse_double(cols[1]) : std::nullopt;
        const auto im = cols.size() == 3 ? text::parse_double(cols[2]) : std::nullopt;
        if (!idx || !re || !im) throw DataError("state file line " + std::to_string(lineno) + ": expected `path re im`");
        rows.emplace_back(*idx, std::complex<double>{*re, *im});
    }
    if (!waist || !pitch) throw DataError("state file lacks waist_m / pitch_m header");
    Eigen::VectorXcd a(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].first != static_cast<long>(i)) throw DataError("state file path indices must be 0..D-1 in order");
        a(static_cast<Eigen::Index>(i)) = rows[i].second;
    }
    return build_state(a, *waist, *pitch);
}

void write_coeffs(std::ostream& os, const DiscreteJointCoeffs& coeffs, const Eigen::MatrixXd* stddev) {
    os << (stddev ? "# i\tj\tprobability\tstd\n" : "# i\tj\tprobability\n");
    const auto& p = coeffs.matrix();
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
            os << i << '\t' << j << '\t' << text::num(p(i, j));
            if (stddev) os << '\t' << text::num((*stddev)(i, j));
            os << '\n';
        }
    }
}

DiscreteJointCoeffs read_coeffs(std::istream& is) {
    std::vector<std::tuple<long, long, double>> rows;
    long n = 0;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto t = text::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto cols = text::split_ws(t);
        if (cols.size() < 3) throw DataError("coefficient file line " + std::to_string(lineno) + ": expected `i j p`");
        const auto i = text::parse_int<long>(cols[0]);
        const auto j = text::parse_int<long>(cols[1]);
        const auto p = text::parse_double(cols[2]);
        if (!i || !j || !p || *i < 0 || *j < 0) {
            throw DataError("coefficient file line " + std::to_string(lineno) + ": malformed row");
        }
        rows.emplace_back(*i, *j, *p);
        n = std::max({n, *i + 1, *j + 1});
    }
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (const auto& [i, j, p] : rows) m(i, j) = p;
    return DiscreteJointCoeffs(std::move(m));
}

}  // namespace bpl
