#include "scfe/solver.hpp"

#include "scfe/error.hpp"
#include "scfe/metrics.hpp"

#include <cmath>

namespace scfe {

void validate(const SolverConfig& cfg, Eigen::Index dims) {
    if (cfg.iterations < 1) {
        throw InvalidArgument("solver: iterations must be at least 1");
    }
    if (!(cfg.step0 > 0.0) || !std::isfinite(cfg.step0)) {
        throw InvalidArgument("solver: initial step must be positive");
    }
    if (!(cfg.gamma >= 0.0) || !(cfg.tau >= 0.0)) {
        throw InvalidArgument("solver: gamma and tau must be nonnegative");
    }
    if (const auto* pen = std::get_if<PenaltyMode>(&cfg.sparsity)) {
        if (!(pen->beta >= 0.0) || !std::isfinite(pen->beta)) {
            throw InvalidArgument("solver: beta must be finite and nonnegative");
        }
    } else if (std::get<ConstraintMode>(cfg.sparsity).m > static_cast<std::size_t>(dims)) {
        throw InvalidArgument("solver: sparsity bound m exceeds the number of features");
    }
}

std::vector<double> extrapolation_sequence(int iterations) {
    if (iterations < 1) {
        throw InvalidArgument("extrapolation_sequence: need at least one iteration");
    }
    // b[t] for t = 0..T+1
    std::vector<double> b(static_cast<std::size_t>(iterations) + 2);
    b[0] = 0.0;
    for (std::size_t t = 1; t < b.size(); ++t) {
        b[t] = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * b[t - 1] * b[t - 1]));
    }
    std::vector<double> alpha(static_cast<std::size_t>(iterations));
    for (std::size_t t = 1; t <= alpha.size(); ++t) {
        alpha[t - 1] = (b[t] - 1.0) / b[t + 1];
    }
    return alpha;
}

std::vector<double> step_schedule(double step0, int iterations) {
    if (!(step0 > 0.0)) {
        throw InvalidArgument("step_schedule: initial step must be positive");
    }
    if (iterations < 1) {
        throw InvalidArgument("step_schedule: need at least one iteration");
    }
    std::vector<double> sigma(static_cast<std::size_t>(iterations));
    double current = step0;
    const double t_max = iterations;
    for (int t = 0; t < iterations; ++t) {
        current *= std::sqrt(1.0 - t / t_max);
        sigma[static_cast<std::size_t>(t)] = current;
    }
    return sigma;
}

double SmoothObjective::value(const Vector& x) const {
    double h = (x - x_factual).squaredNorm();
    if (gamma != 0.0) {
        h += gamma * cfe_loss(classifier, x, loss);
    }
    if (tau != 0.0 && density != nullptr) {
        h -= tau * density->value(x);
    }
    return h;
}

Vector SmoothObjective::gradient(const Vector& x) const {
    Vector g = 2.0 * (x - x_factual);
    if (gamma != 0.0) {
        g += gamma * input_gradient(classifier, x, loss);
    }
    if (tau != 0.0 && density != nullptr) {
        g -= tau * density->value_grad(x).grad;
    }
    return g;
}

Vector grad_h(const Vector& x, const Vector& x_factual, int target,
              const ClassifierModel& classifier, const DensityTerm* density, double gamma,
              double tau, double cutoff) {
    if (x.size() != x_factual.size()) {
        throw InvalidArgument("grad_h: dimension mismatch");
    }
    const SmoothObjective h{x_factual, classifier, loss_config_for(classifier, target, cutoff),
                            density, gamma, tau};
    return h.gradient(x);
}

double sparsity_penalty(const SparsityMode& mode, const Vector& x, const Vector& x_factual) {
    const auto* pen = std::get_if<PenaltyMode>(&mode);
    if (pen == nullptr || pen->beta == 0.0) {
        return 0.0;
    }
    return pen->beta * theta_p(x, x_factual, penalty_exponent(pen->norm));
}

CfeResult apg_solve(const Vector& x_factual, int target, const ClassifierModel& classifier,
                    const DensityTerm* density, const SolverConfig& cfg, const Box& box) {
    const Eigen::Index d = x_factual.size();
    if (d != classifier.input_dims() || d != box.dims()) {
        throw InvalidArgument("apg_solve: dimension mismatch");
    }
    validate(cfg, d);
    if (!box.contains(x_factual)) {
        throw InvalidArgument("apg_solve: factual point outside the feasible box");
    }

    const SmoothObjective h{x_factual, classifier, loss_config_for(classifier, target, cfg.cutoff),
                            density, cfg.gamma, cfg.tau};
    const std::vector<double> alpha = extrapolation_sequence(cfg.iterations);
    const std::vector<double> sigma = step_schedule(cfg.step0, cfg.iterations);

    Vector x = cfg.init == InitMode::factual ? x_factual : project_box(Vector::Zero(d), box);
    Vector z = x;

    CfeResult result;
    if (cfg.record_trajectory) {
        result.trajectory.reserve(static_cast<std::size_t>(cfg.iterations) + 1);
        result.trajectory.push_back(x);
    }
    for (int t = 0; t < cfg.iterations; ++t) {
        const auto i = static_cast<std::size_t>(t);
        const Vector r = h.gradient(z);
        if (!r.allFinite()) {
            throw NumericError("apg_solve: non-finite gradient at iteration " + std::to_string(t));
        }
        const Vector s = z - sigma[i] * r;
        Vector x_next = apply_prox(cfg.sparsity, s, x_factual, sigma[i], box);
        z = x_next + alpha[i] * (x_next - x);
        x = std::move(x_next);
        if (cfg.record_trajectory) {
            result.trajectory.push_back(x);
        }
    }

    result.x_cf = x;
    result.target = target;
    result.valid = classifier.predict(x) == target;
    result.theta0 = theta0(x, x_factual);
    result.theta2 = (x - x_factual).norm();
    result.loss = cfe_loss(classifier, x, h.loss);
    result.objective = h.value(x) + sparsity_penalty(cfg.sparsity, x, x_factual);
    result.gamma = cfg.gamma;
    result.tau = cfg.tau;
    if (const auto* pen = std::get_if<PenaltyMode>(&cfg.sparsity)) {
        result.beta = pen->beta;
    } else {
        result.m = std::get<ConstraintMode>(cfg.sparsity).m;
    }
    return result;
}

} // namespace scfe
