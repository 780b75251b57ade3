#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace scfe {

using Vector = Eigen::VectorXd;
// Row-major sample layout: one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Labels = std::vector<int>;

/// Seeded pseudo-random stream.
///
/// Backed by std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Floating-point draws are derived here rather than through the
/// <random> distributions, which are implementation-defined, so a seed gives
/// the same values on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);
    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::size_t below(std::size_t n);
    /// Standard normal via Box-Muller (cached second variate).
    double normal();

    /// Independent child stream keyed by `tag`; does not advance this stream.
    Rng fork(std::uint64_t tag) const;

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

class MinMaxScaler {
public:
    MinMaxScaler() = default;
    MinMaxScaler(Vector min, Vector max);

    static MinMaxScaler fit(const Matrix& data);

    /// Maps into [0,1]; values outside the fitted range are clamped.
    Matrix transform(const Matrix& data) const;
    Vector transform(const Vector& x) const;
    Matrix inverse_transform(const Matrix& data) const;

    const Vector& min() const { return min_; }
    const Vector& max() const { return max_; }
    Eigen::Index dims() const { return min_.size(); }

private:
    Vector min_;
    Vector max_;
};

std::pair<MinMaxScaler, Matrix> minmax_fit_transform(const Matrix& data);

struct EigenDecomposition {
    Vector values;  // descending
    Eigen::MatrixXd vectors;  // column j pairs with values(j)
};

/// Cyclic Jacobi rotations on a symmetric matrix.
EigenDecomposition jacobi_eigen(const Eigen::MatrixXd& symmetric, int max_sweeps = 100,
                                double tol = 1e-14);

struct PcaModel {
    Vector mean;
    Eigen::MatrixXd components;  // d x r, orthonormal columns
    Vector explained_variance;   // descending, length r
    double total_variance = 0.0;

    Eigen::Index input_dims() const { return mean.size(); }
    Eigen::Index output_dims() const { return components.cols(); }
    Vector explained_variance_ratio() const;
};

/// Leading r eigenvectors of the sample covariance. Each component's
/// largest-magnitude entry is made positive.
PcaModel pca_fit(const Matrix& data, Eigen::Index r);
Matrix pca_transform(const PcaModel& model, const Matrix& data);
Matrix pca_inverse_transform(const PcaModel& model, const Matrix& projected);

struct Split {
    Matrix train_x;
    Labels train_y;
    Matrix test_x;
    Labels test_y;
    std::vector<std::size_t> train_index;  // rows of the input
    std::vector<std::size_t> test_index;
};

Split seeded_shuffle_split(const Matrix& data, const Labels& labels, std::size_t n_test, Rng& rng);

Matrix select_rows(const Matrix& data, const std::vector<std::size_t>& rows);

bool all_finite(const Vector& v);

} // namespace scfe
