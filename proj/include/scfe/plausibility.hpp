#pragma once

#include "scfe/classifier.hpp"
#include "scfe/numerics.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace scfe {

struct ValueGrad {
    double value = 0.0;
    Vector grad;
};

/// Differentiable density surrogate q(x) for one target class.
class DensityTerm {
public:
    virtual ~DensityTerm() = default;
    virtual ValueGrad value_grad(const Vector& x) const = 0;
    double value(const Vector& x) const { return value_grad(x).value; }
};

/// Rows of `points` whose label equals `cls` and that `model` classifies as `cls`.
Matrix correctly_classified(const Matrix& points, const Labels& labels, int cls,
                            const ClassifierModel& model);

/// n^(-1/(d+4)) * std.
double scott_bandwidth(std::size_t n, std::size_t d, double std_dev);

// ---------------------------------------------------------------------------
// Gaussian kernel density estimate, unnormalized kernel exp(-|x - x_i|^2 / 2 sigma^2).

class KdeModel : public DensityTerm {
public:
    KdeModel(Matrix points, double bandwidth);
    KdeModel(Matrix points, Vector weights, double bandwidth);

    ValueGrad value_grad(const Vector& x) const override;

    const Matrix& points() const { return points_; }
    const Vector& weights() const { return weights_; }
    double bandwidth() const { return bandwidth_; }

private:
    Matrix points_;
    Vector weights_;
    double bandwidth_;
};

struct BandwidthRule {
    // Non-positive means Scott's rule on the fitted points.
    double fixed = 0.0;
};

/// Fits on the rows of `points`; the caller applies any class filter.
KdeModel kde_fit(const Matrix& points, BandwidthRule rule = {});

// ---------------------------------------------------------------------------

struct GmmComponent {
    double prior = 0.0;
    Vector mean;
    Eigen::MatrixXd cov;
};

struct GmmFitOptions {
    int components = 5;
    int max_iter = 100;
    double tol = 1e-6;
    double ridge = 1e-6;
};

class GmmModel : public DensityTerm {
public:
    GmmModel() = default;
    explicit GmmModel(std::vector<GmmComponent> components);

    ValueGrad value_grad(const Vector& x) const override;
    /// log of the mixture density.
    double log_density(const Vector& x) const;
    double mean_log_likelihood(const Matrix& data) const;

    const std::vector<GmmComponent>& components() const { return components_; }
    /// Log-likelihood after every EM iteration (empty for hand-built models).
    const std::vector<double>& log_likelihood_trace() const { return trace_; }
    void set_trace(std::vector<double> trace) { trace_ = std::move(trace); }
    /// Per-component log(pi_i) + log N(x | mu_i, Sigma_i).
    Vector component_log_terms(const Vector& x) const;

private:
    struct Cached {
        Eigen::MatrixXd precision;
        Eigen::MatrixXd chol_l;  // lower Cholesky factor of the covariance
        double log_norm = 0.0;   // log of the Gaussian normalizing constant
    };
    std::vector<GmmComponent> components_;
    std::vector<Cached> cache_;
    std::vector<double> trace_;
};

/// EM with k-means++ seeding. The log-likelihood trace is recorded on the model.
GmmModel gmm_fit_em(const Matrix& points, const GmmFitOptions& opts, Rng& rng);

// ---------------------------------------------------------------------------
// Density gravity: density-weighted convex combination of the k nearest
// target-class points of a factual.

struct GravityPoint {
    Vector point;
    std::vector<std::size_t> neighbors;  // rows of the class point set
    Vector weights;                      // normalized local densities
};

class GravityModel {
public:
    GravityModel(Matrix class_points, std::size_t k);

    GravityPoint gravity_point(const Vector& x_factual) const;
    /// k-local density of row i within the class point set.
    double local_density(std::size_t i) const { return density_[i]; }

    const Matrix& points() const { return points_; }
    std::size_t k() const { return k_; }

private:
    Matrix points_;
    std::size_t k_;
    std::vector<double> density_;
};

/// q(x) = -|x - G|, with gradient -(x - G)/|x - G| (zero at x = G).
class GravityTerm : public DensityTerm {
public:
    explicit GravityTerm(Vector gravity) : gravity_(std::move(gravity)) {}
    ValueGrad value_grad(const Vector& x) const override;
    const Vector& gravity() const { return gravity_; }

private:
    Vector gravity_;
};

/// Indices of the k rows of `points` nearest to `x` (Euclidean), ties to the lower index.
std::vector<std::size_t> nearest_rows(const Matrix& points, const Vector& x, std::size_t k,
                                      std::optional<std::size_t> exclude = std::nullopt);

} // namespace scfe
