#pragma once

#include "scfe/numerics.hpp"

#include <variant>
#include <vector>

namespace scfe {

/// Per-feature feasible interval [lower_i, upper_i].
class Box {
public:
    Box() = default;
    Box(Vector lower, Vector upper);

    static Box unit(Eigen::Index d);

    const Vector& lower() const { return lower_; }
    const Vector& upper() const { return upper_; }
    Eigen::Index dims() const { return lower_.size(); }

    bool contains(const Vector& x, double tol = 0.0) const;
    /// Pins the listed features to their factual values (immutable features).
    Box with_fixed(const Vector& x_factual, const std::vector<std::size_t>& features) const;

private:
    Vector lower_;
    Vector upper_;
};

enum class PenaltyNorm { l0, l_half, l1 };

struct PenaltyMode {
    PenaltyNorm norm = PenaltyNorm::l1;
    double beta = 0.0;
};

struct ConstraintMode {
    std::size_t m = 1;
};

using SparsityMode = std::variant<PenaltyMode, ConstraintMode>;

double penalty_exponent(PenaltyNorm norm);
PenaltyNorm penalty_norm_from_exponent(double p);

/// Coordinatewise clamp onto the box.
Vector project_box(const Vector& s, const Box& box);

// Each operator below returns the exact minimizer of
//   1/2 |z - s|^2 + lambda * penalty(z - x_f)   subject to z in box.

Vector prox_l1_box(const Vector& s, const Vector& x_factual, double lambda, const Box& box);
Vector prox_l0_penalty_box(const Vector& s, const Vector& x_factual, double lambda, const Box& box);
Vector prox_l_half_box(const Vector& s, const Vector& x_factual, double lambda, const Box& box);

/// Unconstrained half-thresholding of a scalar: argmin_w 1/2 (w - a)^2 + lambda sqrt|w|.
double half_threshold(double a, double lambda);
/// Magnitude below which half_threshold returns 0: (54^(1/3) / 4) (2 lambda)^(2/3).
double half_threshold_level(double lambda);

/// Euclidean projection of s onto {z : |supp(z - x_f)| <= m} intersected with the box.
Vector project_l0ball_box(const Vector& s, const Vector& x_factual, std::size_t m, const Box& box);

/// prox of step * g for the given sparsity mode (penalty lambda = beta * step).
Vector apply_prox(const SparsityMode& mode, const Vector& s, const Vector& x_factual, double step,
                  const Box& box);

} // namespace scfe
