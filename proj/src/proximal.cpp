#include "scfe/proximal.hpp"

#include "scfe/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

namespace scfe {

Box::Box(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() != upper_.size()) {
        throw InvalidArgument("Box: bound size mismatch");
    }
    for (Eigen::Index i = 0; i < lower_.size(); ++i) {
        if (!(lower_(i) <= upper_(i))) {
            throw InvalidArgument("Box: lower > upper for feature " + std::to_string(i));
        }
    }
}

Box Box::unit(Eigen::Index d) { return Box(Vector::Zero(d), Vector::Ones(d)); }

bool Box::contains(const Vector& x, double tol) const {
    if (x.size() != dims()) {
        return false;
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x(i) < lower_(i) - tol || x(i) > upper_(i) + tol) {
            return false;
        }
    }
    return true;
}

Box Box::with_fixed(const Vector& x_factual, const std::vector<std::size_t>& features) const {
    Vector lo = lower_;
    Vector hi = upper_;
    for (auto f : features) {
        if (f >= static_cast<std::size_t>(dims())) {
            throw InvalidArgument("Box::with_fixed: feature index " + std::to_string(f) +
                                  " out of range");
        }
        const auto i = static_cast<Eigen::Index>(f);
        lo(i) = x_factual(i);
        hi(i) = x_factual(i);
    }
    return Box(lo, hi);
}

double penalty_exponent(PenaltyNorm norm) {
    switch (norm) {
    case PenaltyNorm::l0:
        return 0.0;
    case PenaltyNorm::l_half:
        return 0.5;
    case PenaltyNorm::l1:
        return 1.0;
    }
    return 1.0;
}

PenaltyNorm penalty_norm_from_exponent(double p) {
    if (p == 0.0) {
        return PenaltyNorm::l0;
    }
    if (p == 0.5) {
        return PenaltyNorm::l_half;
    }
    if (p == 1.0) {
        return PenaltyNorm::l1;
    }
    throw InvalidArgument("sparsity exponent must be 0, 0.5 or 1");
}

namespace {

void check_shapes(const Vector& s, const Vector& x_factual, const Box& box) {
    if (s.size() != x_factual.size() || s.size() != box.dims()) {
        throw InvalidArgument("prox: dimension mismatch");
    }
}

void check_lambda(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InvalidArgument("prox: lambda must be finite and nonnegative");
    }
}

} // namespace

Vector project_box(const Vector& s, const Box& box) {
    if (s.size() != box.dims()) {
        throw InvalidArgument("project_box: dimension mismatch");
    }
    return s.cwiseMax(box.lower()).cwiseMin(box.upper());
}

Vector prox_l1_box(const Vector& s, const Vector& x_factual, double lambda, const Box& box) {
    check_shapes(s, x_factual, box);
    check_lambda(lambda);
    Vector z(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        const double w = s(i) - x_factual(i);
        const double shrunk = std::copysign(std::max(std::abs(w) - lambda, 0.0), w);
        z(i) = std::clamp(x_factual(i) + shrunk, box.lower()(i), box.upper()(i));
    }
    return z;
}

Vector prox_l0_penalty_box(const Vector& s, const Vector& x_factual, double lambda, const Box& box) {
    check_shapes(s, x_factual, box);
    check_lambda(lambda);
    Vector z(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        const double moved = std::clamp(s(i), box.lower()(i), box.upper()(i));
        const double keep_cost = 0.5 * (x_factual(i) - s(i)) * (x_factual(i) - s(i));
        const double move_cost =
            0.5 * (moved - s(i)) * (moved - s(i)) + (moved != x_factual(i) ? lambda : 0.0);
        z(i) = move_cost < keep_cost ? moved : x_factual(i);
    }
    return z;
}

double half_threshold_level(double lambda) {
    return std::cbrt(54.0) / 4.0 * std::pow(2.0 * lambda, 2.0 / 3.0);
}

double half_threshold(double a, double lambda) {
    if (lambda == 0.0) {
        return a;
    }
    const double mag = std::abs(a);
    if (mag <= half_threshold_level(lambda)) {
        return 0.0;
    }
    const double arg = std::min(1.0, lambda / 4.0 * std::pow(mag / 3.0, -1.5));
    const double phi = std::acos(arg);
    return 2.0 / 3.0 * a * (1.0 + std::cos(2.0 * std::numbers::pi / 3.0 - 2.0 * phi / 3.0));
}

Vector prox_l_half_box(const Vector& s, const Vector& x_factual, double lambda, const Box& box) {
    check_shapes(s, x_factual, box);
    check_lambda(lambda);
    Vector z(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        const double lo = box.lower()(i);
        const double hi = box.upper()(i);
        const double xf = x_factual(i);
        auto objective = [&](double v) {
            return 0.5 * (v - s(i)) * (v - s(i)) + lambda * std::sqrt(std::abs(v - xf));
        };
        const std::array<double, 4> candidates{
            std::clamp(xf + half_threshold(s(i) - xf, lambda), lo, hi), lo, hi, xf};
        double best = candidates[0];
        double best_val = objective(best);
        for (std::size_t c = 1; c < candidates.size(); ++c) {
            const double val = objective(candidates[c]);
            if (val < best_val) {
                best_val = val;
                best = candidates[c];
            }
        }
        z(i) = best;
    }
    return z;
}

Vector project_l0ball_box(const Vector& s, const Vector& x_factual, std::size_t m, const Box& box) {
    check_shapes(s, x_factual, box);
    const auto d = static_cast<std::size_t>(s.size());
    if (m > d) {
        throw InvalidArgument("project_l0ball_box: m=" + std::to_string(m) + " exceeds d=" +
                              std::to_string(d));
    }
    if (!box.contains(x_factual)) {
        throw InvalidArgument("project_l0ball_box: factual point outside the box");
    }
    const Vector clamped = project_box(s, box);
    // Gain of moving coordinate i from x_f to its clamped value.
    std::vector<double> gain(d);
    for (std::size_t i = 0; i < d; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        const double w = s(k) - x_factual(k);
        const double z = clamped(k) - x_factual(k);
        gain[i] = w * w - (w - z) * (w - z);
    }
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(gain[a]) > std::abs(gain[b]); });

    Vector out = x_factual;
    for (std::size_t j = 0; j < m; ++j) {
        const auto k = static_cast<Eigen::Index>(order[j]);
        out(k) = clamped(k);
    }
    return out;
}

Vector apply_prox(const SparsityMode& mode, const Vector& s, const Vector& x_factual, double step,
                  const Box& box) {
    if (const auto* pen = std::get_if<PenaltyMode>(&mode)) {
        const double lambda = pen->beta * step;
        switch (pen->norm) {
        case PenaltyNorm::l0:
            return prox_l0_penalty_box(s, x_factual, lambda, box);
        case PenaltyNorm::l_half:
            return prox_l_half_box(s, x_factual, lambda, box);
        case PenaltyNorm::l1:
            return prox_l1_box(s, x_factual, lambda, box);
        }
    }
    return project_l0ball_box(s, x_factual, std::get<ConstraintMode>(mode).m, box);
}

} // namespace scfe
