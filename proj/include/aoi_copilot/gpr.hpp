#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>

#include "common.hpp"

namespace aoi_copilot {

/// SE-kernel hyperparameters. Output scale h, time length-scale lambda (in
/// slots), and a diagonal jitter added to the training Gram matrix.
struct GprHyperparams {
    double h = 1.0;
    double lambda = 20.0;
    double jitter = 1e-6;

    static GprHyperparams with_default_jitter(double h, double lambda) {
        return {h, lambda, 1e-6 * h * h};
    }
};

inline constexpr std::size_t kDefaultGprWindow = 64;

inline double se_kernel(double t1, double t2, const GprHyperparams &hp) {
    const double r = (t1 - t2) / hp.lambda;
    return hp.h * hp.h * std::exp(-r * r);
}

struct GprSample {
    std::int64_t t;
    Vector value;
};

/// Sliding window of received (slot, estimate) pairs with strictly
/// increasing time stamps. The oldest entry is evicted past w_max.
class GprDatabase {
public:
    explicit GprDatabase(Index dim, std::size_t w_max = kDefaultGprWindow)
        : dim_(dim), w_max_(w_max) {
        require(dim >= 1, "GprDatabase: output dimension must be at least 1");
        require(w_max >= 1, "GprDatabase: window must hold at least one entry");
    }

    void push(std::int64_t t, const Vector &value) {
        require(value.size() == dim_, "GprDatabase::push: value dimension mismatch");
        require(entries_.empty() || t > entries_.back().t,
                "GprDatabase::push: time stamps must be strictly increasing");
        entries_.push_back({t, value});
        if (entries_.size() > w_max_) { entries_.pop_front(); }
    }

    [[nodiscard]] Index dim() const { return dim_; }
    [[nodiscard]] std::size_t w_max() const { return w_max_; }
    [[nodiscard]] std::size_t size() const { return entries_.size(); }
    [[nodiscard]] bool empty() const { return entries_.empty(); }
    [[nodiscard]] const std::deque<GprSample> &entries() const { return entries_; }
    [[nodiscard]] std::optional<std::int64_t> last_time() const {
        if (entries_.empty()) { return std::nullopt; }
        return entries_.back().t;
    }

private:
    Index dim_;
    std::size_t w_max_;
    std::deque<GprSample> entries_;
};

struct GprPrediction {
    Vector x_hat;
    Matrix K_star;
    double kappa = 0.0;  // K_star = kappa * I
    double trK = 0.0;
};

namespace detail {

inline GprPrediction prior(Index dim, const GprHyperparams &hp) {
    const double k0 = hp.h * hp.h;
    return {Vector::Zero(dim), k0 * Matrix::Identity(dim, dim), k0, k0 * static_cast<double>(dim)};
}

inline GprPrediction make_prediction(Vector mean, double kappa_raw, const GprHyperparams &hp) {
    const Index dim = mean.size();
    const double kappa = std::clamp(kappa_raw, 0.0, hp.h * hp.h);
    return {std::move(mean), kappa * Matrix::Identity(dim, dim), kappa,
            kappa * static_cast<double>(dim)};
}

inline Matrix gram(const GprDatabase &db, const GprHyperparams &hp) {
    const auto &e = db.entries();
    const Index n = static_cast<Index>(e.size());
    Matrix G(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j <= i; ++j) {
            G(i, j) = G(j, i) = se_kernel(static_cast<double>(e[i].t), static_cast<double>(e[j].t), hp);
        }
        G(i, i) += hp.jitter;
    }
    return G;
}

inline Vector cross_cov(const GprDatabase &db, std::int64_t k_test, const GprHyperparams &hp) {
    const auto &e = db.entries();
    Vector ks(static_cast<Index>(e.size()));
    for (Index i = 0; i < ks.size(); ++i) {
        ks[i] = se_kernel(static_cast<double>(k_test), static_cast<double>(e[i].t), hp);
    }
    return ks;
}

inline Matrix targets(const GprDatabase &db) {
    const auto &e = db.entries();
    Matrix F(static_cast<Index>(e.size()), db.dim());
    for (Index i = 0; i < F.rows(); ++i) { F.row(i) = e[i].value.transpose(); }
    return F;
}

inline Eigen::LLT<Matrix> factor_gram(const Matrix &G) {
    Eigen::LLT<Matrix> llt(G);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("GPR Gram matrix is numerically singular; configure jitter > 0");
    }
    return llt;
}

}  // namespace detail

/// Posterior of the multi-output GP at slot k_test. With identity output
/// correlation the block system factorizes into D scalar GPs sharing one
/// time Gram matrix G:
///   x_hat_d = k*' G^-1 f_d,  kappa = k(k,k) - k*' G^-1 k*,  K* = kappa I.
inline GprPrediction predict(const GprDatabase &db, std::int64_t k_test, const GprHyperparams &hp) {
    if (db.empty()) { return detail::prior(db.dim(), hp); }
    const auto llt = detail::factor_gram(detail::gram(db, hp));
    const Vector ks = detail::cross_cov(db, k_test, hp);
    const Vector weights = llt.solve(ks);
    Vector mean = detail::targets(db).transpose() * weights;
    const double k0 = se_kernel(static_cast<double>(k_test), static_cast<double>(k_test), hp);
    return detail::make_prediction(std::move(mean), k0 - ks.dot(weights), hp);
}

/// Same posterior evaluated with the explicit ND x ND block matrices of the
/// separable kernel (time kernel (x) identity). O((n D)^3); used to check
/// predict().
inline GprPrediction predict_dense(const GprDatabase &db, std::int64_t k_test,
                                   const GprHyperparams &hp) {
    if (db.empty()) { return detail::prior(db.dim(), hp); }
    const Index dim = db.dim();
    const Index n = static_cast<Index>(db.size());
    const Matrix eye = Matrix::Identity(dim, dim);
    const Matrix G = detail::gram(db, hp);
    const Vector ks = detail::cross_cov(db, k_test, hp);

    Matrix K_nn(n * dim, n * dim);
    Matrix K_kn(dim, n * dim);
    Vector f(n * dim);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) { K_nn.block(i * dim, j * dim, dim, dim) = G(i, j) * eye; }
        K_kn.block(0, i * dim, dim, dim) = ks[i] * eye;
        f.segment(i * dim, dim) = db.entries()[static_cast<std::size_t>(i)].value;
    }
    Eigen::LLT<Matrix> llt(K_nn);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("GPR block Gram matrix is numerically singular; configure jitter > 0");
    }
    Vector mean = K_kn * llt.solve(f);
    const double k0 = se_kernel(static_cast<double>(k_test), static_cast<double>(k_test), hp);
    Matrix K_star = k0 * eye - K_kn * llt.solve(K_kn.transpose());
    K_star = 0.5 * (K_star + K_star.transpose());
    // Under identity coregionalization K_star is kappa * I; report the mean
    // diagonal so the clamp matches predict().
    return detail::make_prediction(std::move(mean), K_star.trace() / static_cast<double>(dim), hp);
}

/// GPR predictor owned by one loop. Keeps the Cholesky factor of the Gram
/// matrix and G^-1 F between pushes so each prediction costs O(n^2).
class GprPredictor {
public:
    GprPredictor(Index dim, std::size_t w_max, GprHyperparams hp) : db_(dim, w_max), hp_(hp) {}

    void push(std::int64_t t, const Vector &value) {
        db_.push(t, value);
        llt_ = detail::factor_gram(detail::gram(db_, hp_));
        alpha_ = llt_.solve(detail::targets(db_));
    }

    [[nodiscard]] GprPrediction predict(std::int64_t k_test) const {
        if (db_.empty()) { return detail::prior(db_.dim(), hp_); }
        const Vector ks = detail::cross_cov(db_, k_test, hp_);
        Vector mean = alpha_.transpose() * ks;
        const Vector half = llt_.matrixL().solve(ks);
        const double k0 = se_kernel(static_cast<double>(k_test), static_cast<double>(k_test), hp_);
        return detail::make_prediction(std::move(mean), k0 - half.squaredNorm(), hp_);
    }

    [[nodiscard]] const GprDatabase &database() const { return db_; }
    [[nodiscard]] const GprHyperparams &hyperparams() const { return hp_; }

private:
    GprDatabase db_;
    GprHyperparams hp_;
    Eigen::LLT<Matrix> llt_;
    Matrix alpha_;
};

}  // namespace aoi_copilot
