#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace aoi_copilot {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

/// Thrown when a caller breaks an operation's precondition (dimension
/// mismatch, non-increasing time stamp, ...).
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical routine cannot produce a result (Riccati
/// iteration did not converge, Gram matrix singular, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string &message) {
    if (!condition) { throw ContractViolation(message); }
}

inline Vector standard_normal(Rng &rng, Index n) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(n);
    for (Index i = 0; i < n; ++i) { z[i] = normal(rng); }
    return z;
}

/// Symmetric square root S of a PSD matrix (S * S = M). Small negative
/// eigenvalues from roundoff are clamped to zero.
inline Matrix symmetric_sqrt(const Matrix &m) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
    Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

inline double min_eigenvalue(const Matrix &symmetric) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

inline bool is_symmetric_psd(const Matrix &m, double tol = 1e-9) {
    if (m.rows() != m.cols()) { return false; }
    if (m.size() == 0) { return true; }
    if (!m.allFinite() || (m - m.transpose()).cwiseAbs().maxCoeff() > tol) { return false; }
    return min_eigenvalue(0.5 * (m + m.transpose())) >= -tol;
}

}  // namespace aoi_copilot
