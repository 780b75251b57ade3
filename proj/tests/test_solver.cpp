#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"
#include "scfe/error.hpp"
#include "scfe/metrics.hpp"
#include "scfe/solver.hpp"

#include <cmath>

using namespace scfe;

namespace {

ClassifierModel linear2d() {
    // logits (0, x0 - x1): class 1 when x0 > x1
    Eigen::MatrixXd w(2, 2);
    w << 0, 0, 1, -1;
    return ClassifierModel({DenseLayer{w, Vector::Zero(2), Activation::identity}});
}

} // namespace

TEST_CASE("extrapolation sequence") {
    const auto a = extrapolation_sequence(200);
    REQUIRE(a.size() == 200);
    CHECK(a[0] == 0.0);
    // b_2 = golden ratio, b_3 = (1 + sqrt(1 + 4 b_2^2)) / 2.
    CHECK(a[1] == doctest::Approx(0.28175352512532087).epsilon(1e-14));
    for (std::size_t t = 1; t < a.size(); ++t) {
        CHECK(a[t] > a[t - 1]);
        CHECK(a[t] < 1.0);
    }
    CHECK_THROWS_AS(extrapolation_sequence(0), InvalidArgument);
}

TEST_CASE("step schedule") {
    const auto s = step_schedule(0.1, 200);
    REQUIRE(s.size() == 200);
    CHECK(s[0] == 0.1);
    CHECK(s[100] / s[99] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
    for (std::size_t t = 1; t < s.size(); ++t) {
        CHECK(s[t] <= s[t - 1]);
    }
    CHECK(s.back() > 0.0);
    CHECK_THROWS_AS(step_schedule(0.0, 10), InvalidArgument);
}

TEST_CASE("grad_h reduces to the proximity term") {
    const auto clf = linear2d();
    Vector x(2), xf(2);
    x << 0.7, 0.1;
    xf << 0.2, 0.4;
    CHECK((grad_h(x, xf, 0, clf, nullptr, 0.0, 0.0) - 2.0 * (x - xf)).norm() == 0.0);
    CHECK(grad_h(xf, xf, 0, clf, nullptr, 0.0, 0.0).isZero(0.0));
}

TEST_CASE("grad_h matches central differences of the assembled objective") {
    Rng rng(44);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto clf = make_mlp(3, 20, 2, 3, rng);
        Matrix pts(10, 3);
        for (Eigen::Index r = 0; r < 10; ++r) {
            pts.row(r) = oracle::random_vector(rng, 3, 0.0, 1.0).transpose();
        }
        const KdeModel kde(pts, 0.3);
        const Vector xf = oracle::random_vector(rng, 3, 0.0, 1.0);
        const Vector x = oracle::random_vector(rng, 3, 0.0, 1.0);
        const int target = static_cast<int>(rng.below(3));
        const SmoothObjective h{xf, clf, loss_config_for(clf, target, 1e6), &kde, 2.5, 0.7};
        const auto f = [&](const Vector& v) { return h.value(v); };
        const Vector fd = oracle::central_difference(f, x, 1e-5);
        const Vector fd2 = oracle::central_difference(f, x, 2e-5);
        if ((fd - fd2).norm() > 1e-6 * std::max(1.0, fd.norm())) {
            continue;
        }
        ++checked;
        CHECK(oracle::relative_error(grad_h(x, xf, target, clf, &kde, 2.5, 0.7, 1e6), fd) < 1e-4);
    }
    CHECK(checked >= 80);
}

TEST_CASE("pure proximity with zero penalty keeps the factual point") {
    Rng rng(9);
    const auto clf = make_mlp(4, 20, 2, 3, rng);
    const Vector xf = oracle::random_vector(rng, 4, 0.0, 1.0);
    SolverConfig cfg;
    cfg.gamma = 0.0;
    cfg.sparsity = PenaltyMode{PenaltyNorm::l1, 0.0};
    for (int iters : {1, 7, 200}) {
        cfg.iterations = iters;
        const CfeResult r = apg_solve(xf, 1, clf, nullptr, cfg, Box::unit(4));
        CHECK(r.x_cf == xf);
        CHECK(r.theta0 == 0);
    }
}

TEST_CASE("pure proximity with an inactive ball converges to the factual point") {
    Rng rng(10);
    const auto clf = make_mlp(4, 20, 2, 3, rng);
    SolverConfig cfg;
    cfg.gamma = 0.0;
    cfg.sparsity = ConstraintMode{4};
    for (int n = 0; n < 20; ++n) {
        const Vector xf = oracle::random_vector(rng, 4, 0.0, 1.0);
        const CfeResult r = apg_solve(xf, 0, clf, nullptr, cfg, Box::unit(4));
        CHECK((r.x_cf - xf).norm() < 1e-6);
    }
}

TEST_CASE("zero initialization starts from the projected origin") {
    const auto clf = linear2d();
    Vector lo(2), hi(2), xf(2);
    lo << 0.2, 0.3;
    hi << 1.0, 1.0;
    xf << 0.6, 0.7;
    SolverConfig cfg;
    cfg.gamma = 0.0;
    cfg.init = InitMode::zero;
    cfg.iterations = 5;
    cfg.record_trajectory = true;
    cfg.sparsity = ConstraintMode{2};
    const CfeResult r = apg_solve(xf, 1, clf, nullptr, cfg, Box(lo, hi));
    CHECK(r.trajectory.front() == lo);
    CHECK(r.trajectory.size() == 6);
}

TEST_CASE("descent sanity for pure proximity") {
    Rng rng(13);
    const auto clf = make_mlp(5, 20, 2, 2, rng);
    SolverConfig cfg;
    cfg.gamma = 0.0;
    cfg.step0 = 0.5;
    cfg.sparsity = PenaltyMode{PenaltyNorm::l1, 0.0};
    cfg.record_trajectory = true;
    for (int n = 0; n < 100; ++n) {
        const Vector xf = oracle::random_vector(rng, 5, 0.0, 1.0);
        const CfeResult r = apg_solve(xf, 0, clf, nullptr, cfg, Box::unit(5));
        for (std::size_t t = 1; t < r.trajectory.size(); ++t) {
            CHECK((r.trajectory[t] - xf).squaredNorm() <= (r.trajectory[t - 1] - xf).squaredNorm());
        }
    }
}

TEST_CASE("iterates stay feasible and sparse in constraint mode") {
    Rng rng(14);
    const auto clf = make_mlp(6, 20, 2, 3, rng);
    SolverConfig cfg;
    cfg.gamma = 50.0;
    cfg.sparsity = ConstraintMode{2};
    cfg.record_trajectory = true;
    const Box box = Box::unit(6);
    for (int n = 0; n < 20; ++n) {
        const Vector xf = oracle::random_vector(rng, 6, 0.0, 1.0);
        const int target = (clf.predict(xf) + 1) % 3;
        const CfeResult r = apg_solve(xf, target, clf, nullptr, cfg, box);
        REQUIRE(r.trajectory.size() == 201);
        for (const auto& x : r.trajectory) {
            CHECK(box.contains(x));
            CHECK(theta0(x, xf, 0.0) <= 2);
        }
        CHECK(r.valid == (clf.predict(r.x_cf) == target));
    }
}

TEST_CASE("solve is deterministic") {
    Rng rng(15);
    const auto clf = make_mlp(3, 20, 2, 2, rng);
    const Vector xf = oracle::random_vector(rng, 3, 0.0, 1.0);
    SolverConfig cfg;
    cfg.gamma = 10.0;
    cfg.sparsity = PenaltyMode{PenaltyNorm::l_half, 0.3};
    cfg.record_trajectory = true;
    const auto a = apg_solve(xf, 1 - clf.predict(xf), clf, nullptr, cfg, Box::unit(3));
    const auto b = apg_solve(xf, 1 - clf.predict(xf), clf, nullptr, cfg, Box::unit(3));
    REQUIRE(a.trajectory.size() == b.trajectory.size());
    for (std::size_t t = 0; t < a.trajectory.size(); ++t) {
        CHECK(a.trajectory[t] == b.trajectory[t]);
    }
}

TEST_CASE("linear classifier solve crosses the boundary") {
    const auto clf = linear2d();
    Vector xf(2);
    xf << 0.3, 0.6;
    SolverConfig cfg;
    cfg.gamma = 10.0;
    cfg.sparsity = ConstraintMode{2};
    const CfeResult r = apg_solve(xf, 1, clf, nullptr, cfg, Box::unit(2));
    CHECK(r.valid);
    CHECK(r.x_cf(0) > r.x_cf(1));
}

TEST_CASE("solver errors") {
    const auto clf = linear2d();
    SolverConfig cfg;
    cfg.iterations = 0;
    CHECK_THROWS_AS(apg_solve(Vector::Zero(2), 1, clf, nullptr, cfg, Box::unit(2)), InvalidArgument);
    cfg = SolverConfig{};
    cfg.sparsity = ConstraintMode{3};
    CHECK_THROWS_AS(apg_solve(Vector::Zero(2), 1, clf, nullptr, cfg, Box::unit(2)), InvalidArgument);
    cfg = SolverConfig{};
    CHECK_THROWS_AS(apg_solve(Vector::Constant(2, 2.0), 1, clf, nullptr, cfg, Box::unit(2)),
                    InvalidArgument);

    // A density with a non-finite gradient is reported as a numeric failure.
    struct Broken : DensityTerm {
        ValueGrad value_grad(const Vector& x) const override {
            return {0.0, Vector::Constant(x.size(), std::nan(""))};
        }
    } broken;
    cfg.tau = 1.0;
    CHECK_THROWS_WITH_AS(apg_solve(Vector::Zero(2), 1, clf, &broken, cfg, Box::unit(2)),
                         doctest::Contains("iteration 0"), NumericError);
}
