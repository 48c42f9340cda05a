#pragma once

#include <cmath>
#include <limits>
#include <random>

#include "common.hpp"

namespace aoi_copilot {

/// Block-fading realization for one system and slot: diagonal real gains
/// over D parallel orthogonal subchannels (phase assumed compensated).
struct ChannelDraw {
    Vector gains;
    double n0 = 1.0;

    [[nodiscard]] Matrix matrix() const { return gains.asDiagonal(); }
    [[nodiscard]] double gain_energy() const { return gains.squaredNorm(); }  // ||H||_F^2
};

struct MmseResult {
    Vector x_bar;
    Matrix V;
    double trV = 0.0;
};

struct RadioParams {
    double p_max = 10.0;
    double snr_th = 4.0;  // linear, 6 dB
    double n0 = 1.0;
    Matrix sigma_x = Matrix::Identity(4, 4);
};

/// Rayleigh magnitudes with E[h^2] = 1 (|h| with |h|^2 ~ Exp(1)).
inline ChannelDraw draw_channel(Rng &rng, Index dim, double n0 = 1.0) {
    require(dim >= 1, "draw_channel: dimension must be at least 1");
    require(n0 > 0.0, "draw_channel: noise level must be positive");
    std::exponential_distribution<double> energy(1.0);
    ChannelDraw draw{Vector(dim), n0};
    for (Index d = 0; d < dim; ++d) { draw.gains[d] = std::sqrt(energy(rng)); }
    return draw;
}

/// P ||H||_F^2 / N0.
inline double snr(double power, const Matrix &H, double n0) {
    require(power >= 0.0, "snr: power must be non-negative");
    return power * H.squaredNorm() / n0;
}

inline double snr(double power, const ChannelDraw &channel) {
    require(power >= 0.0, "snr: power must be non-negative");
    return power * channel.gain_energy() / channel.n0;
}

inline bool success(double snr_value, double snr_th) { return snr_value >= snr_th; }

/// y = sqrt(P) H x + n with the noise realization supplied by the caller.
inline Vector transmit(const Vector &x, double power, const Matrix &H, const Vector &noise) {
    require(power >= 0.0, "transmit: power must be non-negative");
    require(H.rows() == noise.size() && H.cols() == x.size(), "transmit: dimension mismatch");
    return std::sqrt(power) * (H * x) + noise;
}

/// y = sqrt(P) H x + n, n ~ N(0, N0 I).
inline Vector transmit(const Vector &x, double power, const Matrix &H, double n0, Rng &rng) {
    return transmit(x, power, H, std::sqrt(n0) * standard_normal(rng, H.rows()));
}

/// Linear-Gaussian conditional mean of x given y and its error covariance
///   V = Sx - P Sx H' (P H Sx H' + N0 I)^-1 H Sx.
inline MmseResult mmse_estimate(const Vector &y, double power, const Matrix &H, double n0,
                                const Matrix &sigma_x) {
    require(power >= 0.0, "mmse_estimate: power must be non-negative");
    require(sigma_x.rows() == H.cols() && sigma_x.cols() == H.cols(),
            "mmse_estimate: prior covariance dimension mismatch");
    require(y.size() == H.rows(), "mmse_estimate: observation dimension mismatch");

    const Index m = H.rows();
    const Matrix sxht = sigma_x * H.transpose();
    const Matrix innovation = power * H * sxht + n0 * Matrix::Identity(m, m);
    Eigen::LDLT<Matrix> ldlt(innovation);
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < std::numeric_limits<double>::epsilon()) {
        throw ContractViolation("mmse_estimate: singular innovation covariance");
    }
    MmseResult out;
    out.x_bar = std::sqrt(power) * sxht * ldlt.solve(y);
    Matrix V = sigma_x - power * sxht * ldlt.solve(sxht.transpose());
    out.V = 0.5 * (V + V.transpose());
    out.trV = out.V.trace();
    return out;
}

/// Error covariance trace only; V does not depend on y.
inline double mmse_error_trace(double power, const Matrix &H, double n0, const Matrix &sigma_x) {
    return mmse_estimate(Vector::Zero(H.rows()), power, H, n0, sigma_x).trV;
}

}  // namespace aoi_copilot
