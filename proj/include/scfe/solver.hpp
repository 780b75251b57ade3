#pragma once

#include "scfe/classifier.hpp"
#include "scfe/numerics.hpp"
#include "scfe/plausibility.hpp"
#include "scfe/proximal.hpp"

#include <vector>

namespace scfe {

enum class InitMode { factual, zero };

struct SolverConfig {
    double gamma = 1.0;  // classifier loss weight
    double tau = 0.0;    // plausibility weight
    SparsityMode sparsity = ConstraintMode{1};
    int iterations = 200;
    double step0 = 0.1;
    InitMode init = InitMode::factual;
    double cutoff = 0.0;  // hinge cut-off c
    bool record_trajectory = false;
};

void validate(const SolverConfig& cfg, Eigen::Index dims);

struct CfeResult {
    Vector x_cf;
    int target = 0;
    bool valid = false;
    int theta0 = 0;
    double theta2 = 0.0;
    double loss = 0.0;       // classifier loss at x_cf
    double objective = 0.0;  // h(x_cf) + sparsity penalty
    std::vector<Vector> trajectory;  // x^0 .. x^T when recorded

    // Hyperparameters that produced this point.
    double gamma = 0.0;
    double tau = 0.0;
    double beta = 0.0;
    std::size_t m = 0;
    std::size_t k = 0;  // gravity neighbours, 0 when unused
};

/// Momentum weights alpha_1..alpha_T from b_t = (1 + sqrt(1 + 4 b_{t-1}^2)) / 2, b_0 = 0,
/// alpha_t = (b_t - 1) / b_{t+1}.
std::vector<double> extrapolation_sequence(int iterations);

/// Step sizes sigma_1..sigma_T with sigma_{t+1} = sigma_t sqrt(1 - t/T).
std::vector<double> step_schedule(double step0, int iterations);

/// Smooth part h(x) = |x - x_f|^2 + gamma L(x) - tau q(x). `density` may be null.
struct SmoothObjective {
    const Vector& x_factual;
    const ClassifierModel& classifier;
    LossConfig loss;
    const DensityTerm* density = nullptr;
    double gamma = 0.0;
    double tau = 0.0;

    double value(const Vector& x) const;
    Vector gradient(const Vector& x) const;
};

Vector grad_h(const Vector& x, const Vector& x_factual, int target,
              const ClassifierModel& classifier, const DensityTerm* density, double gamma,
              double tau, double cutoff = 0.0);

/// Accelerated proximal gradient over h + g with a fixed iteration budget.
CfeResult apg_solve(const Vector& x_factual, int target, const ClassifierModel& classifier,
                    const DensityTerm* density, const SolverConfig& cfg, const Box& box);

/// beta * theta_p(x, x_f) in penalty mode, 0 in constraint mode.
double sparsity_penalty(const SparsityMode& mode, const Vector& x, const Vector& x_factual);

} // namespace scfe
