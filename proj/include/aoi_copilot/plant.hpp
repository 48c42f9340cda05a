#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>

#include "common.hpp"

namespace aoi_copilot {

/// Quadratic cost weights for LQR synthesis.
struct LqrWeights {
    Matrix state_cost;  // D x D, PSD
    Matrix input_cost;  // p x p, PD
};

struct PlantState {
    Vector x;
    std::int64_t k = 0;
};

/// One LTI control loop: x' = A x + B u + w, w ~ N(0, W), u = -Phi x_est.
struct PlantModel {
    Matrix A;
    Matrix B;
    Matrix W;
    Matrix Phi;
    Matrix noise_factor;  // symmetric square root of W

    [[nodiscard]] Index state_dim() const { return A.rows(); }
    [[nodiscard]] Index input_dim() const { return B.cols(); }
    [[nodiscard]] Matrix closed_loop() const { return A - B * Phi; }
};

/// Eigenvalue-based spectral radius of a square matrix.
inline double spectral_radius(const Matrix &m) {
    require(m.rows() == m.cols(), "spectral_radius: matrix must be square");
    if (m.size() == 0) { return 0.0; }
    Eigen::EigenSolver<Matrix> eig(m, false);
    return eig.eigenvalues().cwiseAbs().maxCoeff();
}

struct RiccatiSolution {
    Matrix P;
    Matrix Phi;
    int iterations = 0;
};

/// Discrete algebraic Riccati equation by value iteration from P0 = Qw:
///   P <- A'PA - A'PB (R + B'PB)^-1 B'PA + Q
/// Stops when ||P_next - P||_F <= rel_tol * ||P_next||_F.
inline RiccatiSolution solve_dare(const Matrix &A, const Matrix &B, const LqrWeights &weights,
                                  int max_iters = 10000, double rel_tol = 1e-10) {
    const Index d = A.rows();
    const Index p = B.cols();
    require(A.cols() == d, "solve_dare: A must be square");
    require(B.rows() == d, "solve_dare: B must have as many rows as A");
    require(weights.state_cost.rows() == d && weights.state_cost.cols() == d,
            "solve_dare: state cost must be D x D");
    require(weights.input_cost.rows() == p && weights.input_cost.cols() == p,
            "solve_dare: input cost must be p x p");

    const Matrix &Q = weights.state_cost;
    const Matrix &R = weights.input_cost;
    Matrix P = Q;
    for (int it = 1; it <= max_iters; ++it) {
        const Matrix BtP = B.transpose() * P;
        const Matrix gain = (R + BtP * B).ldlt().solve(BtP * A);
        Matrix next = A.transpose() * P * A - A.transpose() * P * B * gain + Q;
        next = 0.5 * (next + next.transpose());
        if (!next.allFinite()) { break; }
        const double change = (next - P).norm();
        P = std::move(next);
        if (change <= rel_tol * P.norm()) {
            const Matrix BtPn = B.transpose() * P;
            return {P, (R + BtPn * B).ldlt().solve(BtPn * A), it};
        }
    }
    throw NumericalError("Riccati iteration did not converge within " + std::to_string(max_iters) +
                         " iterations");
}

/// LQR feedback gain; throws NumericalError if the iteration fails or the
/// resulting closed loop is not Schur stable.
inline Matrix lqr_gain(const Matrix &A, const Matrix &B, const LqrWeights &weights) {
    RiccatiSolution sol = solve_dare(A, B, weights);
    if (spectral_radius(A - B * sol.Phi) >= 1.0) {
        throw NumericalError("LQR synthesis produced an unstable closed loop");
    }
    return sol.Phi;
}

inline PlantModel make_plant(Matrix A, Matrix B, Matrix W, const LqrWeights &weights) {
    const Index d = A.rows();
    require(A.cols() == d, "make_plant: A must be square");
    require(B.rows() == d, "make_plant: B row count must equal state dimension");
    require(W.rows() == d && W.cols() == d, "make_plant: W must be D x D");
    require(is_symmetric_psd(W), "make_plant: plant-noise covariance must be symmetric PSD");

    PlantModel model;
    model.Phi = lqr_gain(A, B, weights);
    model.noise_factor = symmetric_sqrt(W);
    model.A = std::move(A);
    model.B = std::move(B);
    model.W = std::move(W);
    return model;
}

inline PlantState step(const PlantModel &model, const PlantState &state, const Vector &u,
                       const Vector &w) {
    require(state.x.size() == model.state_dim(), "step: state dimension mismatch");
    require(u.size() == model.input_dim(), "step: input dimension mismatch");
    require(w.size() == model.state_dim(), "step: noise dimension mismatch");
    return {model.A * state.x + model.B * u + w, state.k + 1};
}

/// Zero-mean Gaussian draw with covariance factor * factor'.
inline Vector draw_gaussian(Rng &rng, const Matrix &factor) {
    return factor * standard_normal(rng, factor.cols());
}

inline Vector draw_plant_noise(Rng &rng, const PlantModel &model) {
    return draw_gaussian(rng, model.noise_factor);
}

inline Vector draw_plant_noise(Rng &rng, const Matrix &W) {
    require(is_symmetric_psd(W), "draw_plant_noise: covariance must be symmetric PSD");
    return draw_gaussian(rng, symmetric_sqrt(W));
}

/// u = -Phi x_bar when the state was delivered this slot, -Phi x_hat otherwise.
inline Vector control_input(const PlantModel &model, bool delivered, const Vector &x_bar,
                            const Vector &x_hat) {
    return -(model.Phi * (delivered ? x_bar : x_hat));
}

/// Index of the pendulum angle in the cart-pole state
/// (cart position, cart velocity, angle, angular velocity).
inline constexpr Index kPendulumAngleIndex = 2;

inline constexpr double kDefaultPlantNoiseVar = 0.01;
inline constexpr double kSlotSeconds = 0.01;

inline Matrix pendulum_A() {
    Matrix A(4, 4);
    A << 1, 0, 0, 0,
         0, 2.055, -0.722, 4.828,
         0, 0.023, 0.91, 0.037,
         0, 0.677, -0.453, 2.055;
    return A;
}

inline Matrix pendulum_B() {
    Matrix B(4, 1);
    B << 0.034, 0.168, 0.019, 0.105;
    return B;
}

/// Discretized inverted pendulum on a cart (10 ms sampling), LQR with
/// Qw = I, Rw = 1 and plant noise W = noise_var * I.
inline PlantModel make_pendulum(double noise_var = kDefaultPlantNoiseVar) {
    require(noise_var >= 0.0, "make_pendulum: noise variance must be non-negative");
    LqrWeights weights{Matrix::Identity(4, 4), Matrix::Identity(1, 1)};
    return make_plant(pendulum_A(), pendulum_B(), noise_var * Matrix::Identity(4, 4), weights);
}

}  // namespace aoi_copilot
