#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"
#include "scfe/error.hpp"
#include "scfe/metrics.hpp"

#include <limits>
#include <sstream>

using namespace scfe;

namespace {

Matrix grid(int side, double spacing = 1.0) {
    Matrix g(side * side, 2);
    for (int i = 0; i < side; ++i) {
        for (int j = 0; j < side; ++j) {
            g.row(i * side + j) << i * spacing, j * spacing;
        }
    }
    return g;
}

CfeResult result_at(const Vector& x, bool valid) {
    CfeResult r;
    r.x_cf = x;
    r.valid = valid;
    return r;
}

} // namespace

TEST_CASE("theta_p examples") {
    Vector a(2), b(2);
    a << 0, 0;
    b << 3, 4;
    CHECK(theta_p(a, b, 2.0) == 5.0);
    CHECK(theta_p(a, b, 1.0) == 7.0);
    CHECK(theta_p(a, b, std::numeric_limits<double>::infinity()) == 4.0);
    CHECK(theta_p(a, b, 0.5) == doctest::Approx(std::pow(std::sqrt(3.0) + 2.0, 2)));
    CHECK(theta0(a, a) == 0);
    Vector c(2), d(2);
    c << 1, 1 + 1e-12;
    d << 1, 1;
    CHECK(theta0(c, d) == 0);
    CHECK_THROWS_AS(theta_p(a, Vector::Zero(3), 2.0), InvalidArgument);
    CHECK_THROWS_AS(theta_p(a, b, 3.0), InvalidArgument);
}

TEST_CASE("theta_p axioms on random triples") {
    Rng rng(1);
    const double inf = std::numeric_limits<double>::infinity();
    for (int n = 0; n < 200; ++n) {
        const Vector x = oracle::random_normal(rng, 4);
        const Vector y = oracle::random_normal(rng, 4);
        const Vector z = oracle::random_normal(rng, 4);
        for (double p : {0.0, 0.5, 1.0, 2.0, inf}) {
            CHECK(theta_p(x, y, p) >= 0.0);
            CHECK(theta_p(x, x, p) == 0.0);
            CHECK(theta_p(x, y, p) == doctest::Approx(theta_p(y, x, p)).epsilon(1e-14));
        }
        for (double p : {1.0, 2.0, inf}) {
            CHECK(theta_p(x, z, p) <= theta_p(x, y, p) + theta_p(y, z, p) + 1e-12);
        }
    }
}

TEST_CASE("lof of a point duplicated k+1 times is 1") {
    Matrix ref(25, 2);
    Rng rng(3);
    for (Eigen::Index r = 0; r < 25; ++r) {
        const Vector v = r < 21 ? Vector(Vector::Constant(2, 0.5))
                                : oracle::random_vector(rng, 2, 0.0, 1.0);
        ref.row(r) = v.transpose();
    }
    const LofIndex index(ref, 20);
    CHECK(index.lof(Vector::Constant(2, 0.5)) == 1.0);
}

TEST_CASE("lof on a regular grid") {
    const LofIndex index(grid(10), 4);
    for (int i = 2; i < 8; ++i) {
        for (int j = 2; j < 8; ++j) {
            Vector x(2);
            x << i, j;
            const double l = index.lof(x);
            CHECK(l >= 0.9);
            CHECK(l <= 1.1);
        }
    }
    Vector far(2);
    far << 19, 4.5;
    CHECK(index.lof(far) > 1.5);
}

TEST_CASE("lof agrees with a literal transcription of the definition") {
    Rng rng(8);
    Matrix ref(60, 3);
    for (Eigen::Index r = 0; r < 60; ++r) {
        ref.row(r) = oracle::random_vector(rng, 3, 0.0, 1.0).transpose();
    }
    const LofIndex index(ref, 20);
    for (int n = 0; n < 30; ++n) {
        const Vector q = oracle::random_vector(rng, 3, -0.2, 1.2);
        CHECK(std::abs(index.lof(q) - oracle::naive_lof(ref, 20, 2.0, q)) < 1e-10);
    }
    const LofIndex l1(ref, 5, 1.0);
    const Vector q = oracle::random_vector(rng, 3, 0.0, 1.0);
    CHECK(std::abs(l1.lof(q) - oracle::naive_lof(ref, 5, 1.0, q)) < 1e-10);
}

TEST_CASE("lof index validation") {
    CHECK_THROWS_AS(LofIndex(grid(2), 4), InvalidArgument);
    CHECK_THROWS_AS(LofIndex(grid(4), 0), InvalidArgument);
    CHECK_THROWS_AS(LofIndex(grid(4), 3, 0.5), InvalidArgument);
    const LofIndex index(grid(4), 3);
    CHECK_THROWS_AS(index.lof(Vector::Zero(3)), InvalidArgument);
}

TEST_CASE("validity rate") {
    CHECK(validity_rate(std::vector<bool>(10, true)) == 100.0);
    CHECK(validity_rate(std::vector<bool>(10, false)) == 0.0);
    std::vector<bool> flags(100, false);
    std::fill(flags.begin(), flags.begin() + 94, true);
    CHECK(validity_rate(flags) == 94.0);
}

TEST_CASE("aggregate report statistics") {
    const LofIndex index(grid(5), 3);
    const Vector xf = Vector::Zero(2);
    Vector a(2), b(2), c(2);
    a << 1, 0;
    b << 0, 3;
    c << 9, 9;

    const auto single = aggregate_report({result_at(a, true)}, {xf}, index);
    CHECK(single.theta2.std == 0.0);
    CHECK(single.theta0.std == 0.0);
    CHECK(single.lof.std == 0.0);

    const auto two = aggregate_report({result_at(a, true), result_at(b, true), result_at(c, false)},
                                      {xf, xf, xf}, index);
    CHECK(two.theta2.mean == 2.0);
    CHECK(two.theta2.std == 1.0);
    CHECK(two.theta0.mean == 1.0);
    CHECK(two.validity == doctest::Approx(200.0 / 3.0));
    CHECK(two.valid_count == 2);
    CHECK(two.instances.size() == 3);

    CHECK_THROWS_AS(aggregate_report({}, {}, index), InvalidArgument);
}

TEST_CASE("report csv layout") {
    std::ostringstream os;
    write_report_header(os);
    MetricsReport r;
    r.method = "scfe";
    r.dataset = "toy";
    r.validity = 100.0;
    r.theta0 = {1.0, 0.0};
    write_report_row(os, r);
    const std::string text = os.str();
    CHECK(text.rfind(std::string(kReportHeader) + "\n", 0) == 0);
    CHECK(text.find("scfe,toy,100,0,0,1,0,0,0,0\n") != std::string::npos);
}
