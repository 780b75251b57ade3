#include "scfe/numerics.hpp"

#include "scfe/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace scfe {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::size_t Rng::below(std::size_t n) {
    if (n == 0) {
        throw InvalidArgument("Rng::below: n must be positive");
    }
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r = next_u64();
    while (r >= limit) {
        r = next_u64();
    }
    return static_cast<std::size_t>(r % bound);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

Rng Rng::fork(std::uint64_t tag) const {
    return Rng(splitmix64(seed_ ^ splitmix64(tag + 0x51ED270B27A3C1F5ULL)));
}

// ---------------------------------------------------------------------------

MinMaxScaler::MinMaxScaler(Vector min, Vector max) : min_(std::move(min)), max_(std::move(max)) {
    if (min_.size() != max_.size()) {
        throw InvalidArgument("MinMaxScaler: min/max size mismatch");
    }
    for (Eigen::Index i = 0; i < min_.size(); ++i) {
        if (!(max_(i) >= min_(i))) {
            throw InvalidArgument("MinMaxScaler: max < min for feature " + std::to_string(i));
        }
    }
}

MinMaxScaler MinMaxScaler::fit(const Matrix& data) {
    if (data.rows() == 0 || data.cols() == 0) {
        throw InvalidArgument("minmax fit: empty matrix");
    }
    return MinMaxScaler(data.colwise().minCoeff().transpose(), data.colwise().maxCoeff().transpose());
}

Vector MinMaxScaler::transform(const Vector& x) const {
    if (x.size() != dims()) {
        throw InvalidArgument("minmax transform: dimension mismatch");
    }
    Vector out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double range = max_(i) - min_(i);
        out(i) = range > 0.0 ? std::clamp((x(i) - min_(i)) / range, 0.0, 1.0) : 0.0;
    }
    return out;
}

Matrix MinMaxScaler::transform(const Matrix& data) const {
    if (data.cols() != dims()) {
        throw InvalidArgument("minmax transform: dimension mismatch");
    }
    Matrix out(data.rows(), data.cols());
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
        out.row(r) = transform(Vector(data.row(r).transpose())).transpose();
    }
    return out;
}

Matrix MinMaxScaler::inverse_transform(const Matrix& data) const {
    if (data.cols() != dims()) {
        throw InvalidArgument("minmax inverse_transform: dimension mismatch");
    }
    Matrix out(data.rows(), data.cols());
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
        for (Eigen::Index c = 0; c < data.cols(); ++c) {
            out(r, c) = min_(c) + data(r, c) * (max_(c) - min_(c));
        }
    }
    return out;
}

std::pair<MinMaxScaler, Matrix> minmax_fit_transform(const Matrix& data) {
    MinMaxScaler scaler = MinMaxScaler::fit(data);
    Matrix scaled = scaler.transform(data);
    return {std::move(scaler), std::move(scaled)};
}

// ---------------------------------------------------------------------------

EigenDecomposition jacobi_eigen(const Eigen::MatrixXd& symmetric, int max_sweeps, double tol) {
    const Eigen::Index n = symmetric.rows();
    if (symmetric.cols() != n) {
        throw InvalidArgument("jacobi_eigen: matrix not square");
    }
    Eigen::MatrixXd a = 0.5 * (symmetric + symmetric.transpose());
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);

    const double scale = std::max(a.norm(), 1e-300);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                off += a(p, q) * a(p, q);
            }
        }
        if (std::sqrt(off) <= tol * scale) {
            break;
        }
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) {
                    continue;
                }
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

    EigenDecomposition out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        out.values(j) = a(order[static_cast<std::size_t>(j)], order[static_cast<std::size_t>(j)]);
        out.vectors.col(j) = v.col(order[static_cast<std::size_t>(j)]);
    }
    return out;
}

Vector PcaModel::explained_variance_ratio() const {
    if (total_variance <= 0.0) {
        return Vector::Zero(explained_variance.size());
    }
    return explained_variance / total_variance;
}

PcaModel pca_fit(const Matrix& data, Eigen::Index r) {
    const Eigen::Index n = data.rows();
    const Eigen::Index d = data.cols();
    if (r < 0 || r > d) {
        throw InvalidArgument("pca_fit: requested " + std::to_string(r) + " components for " +
                              std::to_string(d) + " features");
    }
    if (n < r + 1 || n < 2) {
        throw InvalidArgument("pca_fit: need at least r+1 samples");
    }
    PcaModel model;
    model.mean = data.colwise().mean().transpose();
    const Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

    EigenDecomposition eig = jacobi_eigen(cov);
    model.total_variance = std::max(0.0, eig.values.sum());
    model.components = eig.vectors.leftCols(r);
    model.explained_variance = eig.values.head(r).cwiseMax(0.0);
    for (Eigen::Index j = 0; j < r; ++j) {
        Eigen::Index arg = 0;
        model.components.col(j).cwiseAbs().maxCoeff(&arg);
        if (model.components(arg, j) < 0.0) {
            model.components.col(j) *= -1.0;
        }
    }
    return model;
}

Matrix pca_transform(const PcaModel& model, const Matrix& data) {
    if (data.cols() != model.input_dims()) {
        throw InvalidArgument("pca_transform: dimension mismatch");
    }
    return (data.rowwise() - model.mean.transpose()) * model.components;
}

Matrix pca_inverse_transform(const PcaModel& model, const Matrix& projected) {
    if (projected.cols() != model.output_dims()) {
        throw InvalidArgument("pca_inverse_transform: dimension mismatch");
    }
    Matrix out = projected * model.components.transpose();
    out.rowwise() += model.mean.transpose();
    return out;
}

// ---------------------------------------------------------------------------

Matrix select_rows(const Matrix& data, const std::vector<std::size_t>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), data.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

Split seeded_shuffle_split(const Matrix& data, const Labels& labels, std::size_t n_test, Rng& rng) {
    const auto n = static_cast<std::size_t>(data.rows());
    if (labels.size() != n) {
        throw InvalidArgument("split: label count does not match rows");
    }
    if (n_test >= n) {
        throw InvalidArgument("split: n_test (" + std::to_string(n_test) +
                              ") must be smaller than the number of rows (" + std::to_string(n) + ")");
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);

    Split out;
    out.test_index.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train_index.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
    out.train_x = select_rows(data, out.train_index);
    out.test_x = select_rows(data, out.test_index);
    for (auto i : out.train_index) {
        out.train_y.push_back(labels[i]);
    }
    for (auto i : out.test_index) {
        out.test_y.push_back(labels[i]);
    }
    return out;
}

bool all_finite(const Vector& v) { return v.allFinite(); }

} // namespace scfe
