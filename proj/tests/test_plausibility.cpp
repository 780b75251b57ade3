#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"
#include "scfe/error.hpp"
#include "scfe/plausibility.hpp"

#include <numbers>

using namespace scfe;

namespace {

Matrix blob(Rng& rng, int n, double cx, double cy, double sd) {
    Matrix m(n, 2);
    for (int i = 0; i < n; ++i) {
        m(i, 0) = cx + sd * rng.normal();
        m(i, 1) = cy + sd * rng.normal();
    }
    return m;
}

void check_fd(const DensityTerm& term, const Vector& x, double tol) {
    const auto f = [&](const Vector& v) { return term.value(v); };
    const Vector fd = oracle::central_difference(f, x, 1e-6);
    const Vector g = term.value_grad(x).grad;
    CHECK(oracle::relative_error(g, fd, 1e-12) < tol);
}

} // namespace

TEST_CASE("kde weights are uniform") {
    Matrix pts(2, 2);
    pts << 0, 0, 1, 1;
    const KdeModel kde = kde_fit(pts, BandwidthRule{1.0});
    CHECK(kde.weights()(0) == doctest::Approx(0.5));
    CHECK(kde.weights()(1) == doctest::Approx(0.5));
    CHECK(kde.bandwidth() == 1.0);
}

TEST_CASE("kde fit keeps only correctly classified class members") {
    // Identity classifier on 2 features: predicts the larger coordinate.
    const ClassifierModel clf({DenseLayer{Eigen::MatrixXd::Identity(2, 2), Vector::Zero(2),
                                          Activation::identity}});
    Matrix pts(5, 2);
    pts << 0, 1,  // class 1, predicted 1
        0, 2,     // class 1, predicted 1
        3, 1,     // class 1, predicted 0
        0, 5,     // class 1, predicted 1
        4, 0;     // class 1, predicted 0
    const Labels y{1, 1, 1, 1, 1};
    const Matrix kept = correctly_classified(pts, y, 1, clf);
    CHECK(kept.rows() == 3);
    CHECK(kde_fit(kept).points().rows() == 3);
}

TEST_CASE("kde fit needs two points") {
    CHECK_THROWS_AS(kde_fit(Matrix::Zero(1, 2)), InvalidArgument);
}

TEST_CASE("scott bandwidth") {
    CHECK(scott_bandwidth(100, 2, 1.0) == doctest::Approx(0.4641588833612779).epsilon(1e-12));
}

TEST_CASE("kde peak and symmetry") {
    Matrix one(1, 2);
    one << 0.3, 0.7;
    const KdeModel single(one, 0.2);
    const ValueGrad at = single.value_grad(one.row(0).transpose());
    CHECK(at.value == doctest::Approx(1.0));
    CHECK(at.grad.isZero(0.0));

    Matrix two(2, 2);
    two << -1, 0, 1, 0;
    const KdeModel pair(two, 0.5);
    CHECK(pair.value_grad(Vector::Zero(2)).grad.norm() < 1e-15);
}

TEST_CASE("kde gradient matches central differences") {
    Rng rng(17);
    const KdeModel kde(blob(rng, 30, 0.5, 0.5, 0.1), 0.08);
    for (int i = 0; i < 100; ++i) {
        check_fd(kde, oracle::random_vector(rng, 2, 0.2, 0.8), 1e-6);
    }
}

TEST_CASE("gmm single isotropic component at its mean") {
    const GmmModel g({{1.0, Vector::Zero(2), Eigen::MatrixXd::Identity(2, 2)}});
    const ValueGrad vg = g.value_grad(Vector::Zero(2));
    CHECK(vg.value == doctest::Approx(1.0 / (2.0 * std::numbers::pi)).epsilon(1e-14));
    CHECK(vg.grad.norm() < 1e-15);
    Vector d(2);
    d << 0.3, -0.2;
    CHECK(g.value(d) == doctest::Approx(g.value(-d)).epsilon(1e-14));
}

TEST_CASE("gmm gradient matches central differences") {
    Rng rng(3);
    Eigen::MatrixXd c1(2, 2), c2(2, 2);
    c1 << 0.04, 0.01, 0.01, 0.02;
    c2 << 0.01, -0.004, -0.004, 0.03;
    Vector m1(2), m2(2);
    m1 << 0.3, 0.4;
    m2 << 0.7, 0.6;
    const GmmModel g({{0.4, m1, c1}, {0.6, m2, c2}});
    for (int i = 0; i < 100; ++i) {
        check_fd(g, oracle::random_vector(rng, 2, 0.1, 0.9), 1e-6);
    }
}

TEST_CASE("gmm EM with one component reaches sample mean and covariance") {
    Rng rng(21);
    const Matrix pts = blob(rng, 200, 1.0, -1.0, 0.3);
    Rng em_rng(1);
    const GmmModel g = gmm_fit_em(pts, GmmFitOptions{1, 100, 1e-10, 1e-6}, em_rng);
    const Vector mean = pts.colwise().mean().transpose();
    const Matrix centered = pts.rowwise() - mean.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / 200.0 +
                                1e-6 * Eigen::MatrixXd::Identity(2, 2);
    CHECK((g.components()[0].mean - mean).norm() < 1e-12);
    CHECK((g.components()[0].cov - cov).norm() < 1e-12);
}

TEST_CASE("gmm EM separates two blobs and its log-likelihood never decreases") {
    Rng rng(8);
    Matrix pts(300, 2);
    pts << blob(rng, 150, 0.2, 0.2, 0.05), blob(rng, 150, 0.8, 0.7, 0.05);
    Rng em_rng(4);
    const GmmModel g = gmm_fit_em(pts, GmmFitOptions{2, 200, 1e-9, 1e-6}, em_rng);
    Vector c1(2), c2(2);
    c1 << 0.2, 0.2;
    c2 << 0.8, 0.7;
    const auto& comps = g.components();
    const double d_direct = (comps[0].mean - c1).norm() + (comps[1].mean - c2).norm();
    const double d_swapped = (comps[0].mean - c2).norm() + (comps[1].mean - c1).norm();
    const bool direct = d_direct < d_swapped;
    CHECK((comps[direct ? 0 : 1].mean - c1).norm() < 0.1);
    CHECK((comps[direct ? 1 : 0].mean - c2).norm() < 0.1);

    const auto& trace = g.log_likelihood_trace();
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i) {
        CHECK(trace[i] >= trace[i - 1] - 1e-9);
    }
    double prior_sum = 0.0;
    for (const auto& c : comps) {
        prior_sum += c.prior;
        Eigen::LLT<Eigen::MatrixXd> llt(c.cov);
        CHECK(llt.info() == Eigen::Success);
    }
    CHECK(prior_sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gmm EM rejects too few points") {
    Rng rng(1);
    CHECK_THROWS_AS(gmm_fit_em(Matrix::Zero(3, 2), GmmFitOptions{5}, rng), InvalidArgument);
}

TEST_CASE("gravity with k=1 is the nearest class point") {
    Matrix pts(3, 2);
    pts << 0, 0, 1, 0, 5, 5;
    const GravityModel gm(pts, 1);
    Vector xf(2);
    xf << 0.9, 0.2;
    const GravityPoint g = gm.gravity_point(xf);
    CHECK(g.point == pts.row(1).transpose());
    CHECK(g.weights(0) == 1.0);
}

TEST_CASE("gravity with two equidistant neighbours in a uniform lattice is their midpoint") {
    // Square lattice: every point has the same local density.
    Matrix pts(16, 2);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            pts.row(4 * i + j) << i, j;
        }
    }
    // Wrap-free density differs on the border, so pick two interior neighbours.
    const GravityModel gm(pts, 2);
    Vector xf(2);
    xf << 1.5, 1.0 + 1e-9;  // closest to (1,1) and (2,1)
    const GravityPoint g = gm.gravity_point(xf);
    CHECK(gm.local_density(g.neighbors[0]) == doctest::Approx(gm.local_density(g.neighbors[1])));
    CHECK(g.point(0) == doctest::Approx(1.5));
    CHECK(g.point(1) == doctest::Approx(1.0));
}

TEST_CASE("gravity matches a direct evaluation of the definition") {
    Matrix pts(8, 2);
    pts << 0.1, 0.2, 0.4, 0.1, 0.35, 0.5, 0.8, 0.9, 0.6, 0.55, 0.2, 0.7, 0.95, 0.3, 0.5, 0.25;
    Vector xf(2);
    xf << 0.45, 0.35;
    const GravityModel gm(pts, 3);
    const GravityPoint g = gm.gravity_point(xf);
    CHECK((g.point - oracle::direct_gravity(pts, 3, xf)).norm() < 1e-10);
    CHECK(g.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(g.weights.minCoeff() >= 0.0);
}

TEST_CASE("gravity rejects k above the class population") {
    CHECK_THROWS_AS(GravityModel(Matrix::Zero(2, 2), 3), InvalidArgument);
}

TEST_CASE("gravity term value and gradient") {
    Vector g(2);
    g << 0.5, 0.5;
    const GravityTerm term(g);
    const ValueGrad at = term.value_grad(g);
    CHECK(at.value == 0.0);
    CHECK(at.grad.isZero(0.0));

    Vector e1(2);
    e1 << 1.0, 0.0;
    const ValueGrad off = term.value_grad(g + e1);
    CHECK(off.value == doctest::Approx(-1.0));
    CHECK((off.grad + e1).norm() < 1e-15);

    Rng rng(6);
    for (int i = 0; i < 100; ++i) {
        const Vector x = oracle::random_vector(rng, 2, -1.0, 2.0);
        if ((x - g).norm() < 1e-3) {
            continue;
        }
        check_fd(term, x, 1e-6);
    }
}
