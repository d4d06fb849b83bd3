#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace bpl::quad {

struct Rule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

// Golub-Welsch.
inline Rule gauss_legendre(int n) {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        const double b = i / std::sqrt(4.0 * i * i - 1.0);
        j(i, i - 1) = b;
        j(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(j);
    Rule r;
    for (int i = 0; i < n; ++i) {
        r.nodes.push_back(eig.eigenvalues()(i));
        const double v = eig.eigenvectors()(0, i);
        r.weights.push_back(2.0 * v * v);
    }
    return r;
}

inline const Rule& gl16() {
    static const Rule r = gauss_legendre(16);
    return r;
}

/// Composite Gauss-Legendre over [a, b] with `panels` equal panels.
template <typename F>
double integrate(F&& f, double a, double b, int panels = 8, const Rule& rule = gl16()) {
    if (!(b > a)) return 0.0;
    const double h = (b - a) / panels;
    double sum = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        const double mid = lo + 0.5 * h;
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
            sum += rule.weights[k] * f(mid + 0.5 * h * rule.nodes[k]);
        }
    }
    return 0.5 * h * sum;
}

}  // namespace bpl::quad
