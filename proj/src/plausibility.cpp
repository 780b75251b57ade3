#include "scfe/plausibility.hpp"

#include "scfe/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace scfe {

Matrix correctly_classified(const Matrix& points, const Labels& labels, int cls,
                            const ClassifierModel& model) {
    if (static_cast<std::size_t>(points.rows()) != labels.size()) {
        throw InvalidArgument("correctly_classified: label count does not match rows");
    }
    std::vector<std::size_t> keep;
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
        if (labels[static_cast<std::size_t>(r)] == cls &&
            model.predict(Vector(points.row(r).transpose())) == cls) {
            keep.push_back(static_cast<std::size_t>(r));
        }
    }
    return select_rows(points, keep);
}

double scott_bandwidth(std::size_t n, std::size_t d, double std_dev) {
    return std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(d) + 4.0)) * std_dev;
}

// ---------------------------------------------------------------------------

KdeModel::KdeModel(Matrix points, double bandwidth)
    : KdeModel(points, Vector::Constant(points.rows(), 1.0 / static_cast<double>(points.rows())),
               bandwidth) {}

KdeModel::KdeModel(Matrix points, Vector weights, double bandwidth)
    : points_(std::move(points)), weights_(std::move(weights)), bandwidth_(bandwidth) {
    if (points_.rows() == 0) {
        throw InvalidArgument("KdeModel: no reference points");
    }
    if (weights_.size() != points_.rows()) {
        throw InvalidArgument("KdeModel: weight count does not match points");
    }
    if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_)) {
        throw InvalidArgument("KdeModel: bandwidth must be positive");
    }
    if ((weights_.array() < 0.0).any() || std::abs(weights_.sum() - 1.0) > 1e-12) {
        throw InvalidArgument("KdeModel: weights must be nonnegative and sum to 1");
    }
}

ValueGrad KdeModel::value_grad(const Vector& x) const {
    if (x.size() != points_.cols()) {
        throw InvalidArgument("kde_value_grad: dimension mismatch");
    }
    const double inv2s2 = 1.0 / (2.0 * bandwidth_ * bandwidth_);
    ValueGrad out;
    out.grad = Vector::Zero(x.size());
    for (Eigen::Index i = 0; i < points_.rows(); ++i) {
        const Vector diff = points_.row(i).transpose() - x;
        const double k = weights_(i) * std::exp(-diff.squaredNorm() * inv2s2);
        out.value += k;
        out.grad += k * diff;
    }
    out.grad /= bandwidth_ * bandwidth_;
    return out;
}

KdeModel kde_fit(const Matrix& points, BandwidthRule rule) {
    if (points.rows() < 2) {
        throw InvalidArgument("kde_fit: need at least 2 points, got " + std::to_string(points.rows()));
    }
    double bw = rule.fixed;
    if (!(bw > 0.0)) {
        // Root-mean per-feature sample variance as the isotropic scale.
        const Eigen::RowVectorXd mean = points.colwise().mean();
        const double var = (points.rowwise() - mean).squaredNorm() /
                           static_cast<double>((points.rows() - 1) * points.cols());
        bw = scott_bandwidth(static_cast<std::size_t>(points.rows()),
                             static_cast<std::size_t>(points.cols()), std::sqrt(var));
        if (!(bw > 0.0)) {
            throw InvalidArgument("kde_fit: degenerate points give zero bandwidth");
        }
    }
    return KdeModel(points, bw);
}

// ---------------------------------------------------------------------------

GmmModel::GmmModel(std::vector<GmmComponent> components) : components_(std::move(components)) {
    if (components_.empty()) {
        throw InvalidArgument("GmmModel: no components");
    }
    const Eigen::Index d = components_.front().mean.size();
    double total = 0.0;
    for (const auto& c : components_) {
        if (c.mean.size() != d || c.cov.rows() != d || c.cov.cols() != d) {
            throw InvalidArgument("GmmModel: inconsistent component shapes");
        }
        if (!(c.prior >= 0.0)) {
            throw InvalidArgument("GmmModel: negative prior");
        }
        total += c.prior;
        Eigen::LLT<Eigen::MatrixXd> llt(c.cov);
        if (llt.info() != Eigen::Success) {
            throw NumericError("GmmModel: covariance not positive definite");
        }
        Cached cached;
        cached.chol_l = llt.matrixL();
        cached.precision = llt.solve(Eigen::MatrixXd::Identity(d, d));
        const double logdet = 2.0 * cached.chol_l.diagonal().array().log().sum();
        cached.log_norm =
            -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + logdet);
        cache_.push_back(std::move(cached));
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw InvalidArgument("GmmModel: priors must sum to 1");
    }
}

Vector GmmModel::component_log_terms(const Vector& x) const {
    Vector out(static_cast<Eigen::Index>(components_.size()));
    for (std::size_t i = 0; i < components_.size(); ++i) {
        const Vector diff = x - components_[i].mean;
        const Vector y = cache_[i].chol_l.triangularView<Eigen::Lower>().solve(diff);
        out(static_cast<Eigen::Index>(i)) = std::log(components_[i].prior) + cache_[i].log_norm -
                                            0.5 * y.squaredNorm();
    }
    return out;
}

double GmmModel::log_density(const Vector& x) const {
    const Vector terms = component_log_terms(x);
    const double mx = terms.maxCoeff();
    if (!std::isfinite(mx)) {
        return mx;
    }
    return mx + std::log((terms.array() - mx).exp().sum());
}

double GmmModel::mean_log_likelihood(const Matrix& data) const {
    double total = 0.0;
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
        total += log_density(data.row(r).transpose());
    }
    return total / static_cast<double>(data.rows());
}

ValueGrad GmmModel::value_grad(const Vector& x) const {
    if (components_.empty() || x.size() != components_.front().mean.size()) {
        throw InvalidArgument("gmm_value_grad: dimension mismatch");
    }
    const Vector terms = component_log_terms(x);
    ValueGrad out;
    out.grad = Vector::Zero(x.size());
    for (std::size_t i = 0; i < components_.size(); ++i) {
        const double w = std::exp(terms(static_cast<Eigen::Index>(i)));
        out.value += w;
        out.grad += w * (cache_[i].precision * (components_[i].mean - x));
    }
    return out;
}

namespace {

// k-means++ seeding: first center uniform, then proportional to squared distance.
std::vector<Vector> kmeanspp(const Matrix& points, int k, Rng& rng) {
    const Eigen::Index n = points.rows();
    std::vector<Vector> centers;
    centers.push_back(points.row(static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(n)))).transpose());
    Vector d2(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        d2(r) = (points.row(r).transpose() - centers[0]).squaredNorm();
    }
    while (static_cast<int>(centers.size()) < k) {
        const double total = d2.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            double u = rng.uniform() * total;
            pick = n - 1;
            for (Eigen::Index r = 0; r < n; ++r) {
                u -= d2(r);
                if (u < 0.0) {
                    pick = r;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(n)));
        }
        centers.push_back(points.row(pick).transpose());
        for (Eigen::Index r = 0; r < n; ++r) {
            d2(r) = std::min(d2(r), (points.row(r).transpose() - centers.back()).squaredNorm());
        }
    }
    return centers;
}

} // namespace

GmmModel gmm_fit_em(const Matrix& points, const GmmFitOptions& opts, Rng& rng) {
    const Eigen::Index n = points.rows();
    const Eigen::Index d = points.cols();
    const int m = opts.components;
    if (m <= 0) {
        throw InvalidArgument("gmm_fit_em: component count must be positive");
    }
    if (n < m) {
        throw InvalidArgument("gmm_fit_em: " + std::to_string(n) + " points for " +
                              std::to_string(m) + " components");
    }
    const Eigen::MatrixXd ridge = opts.ridge * Eigen::MatrixXd::Identity(d, d);

    const Eigen::RowVectorXd global_mean = points.colwise().mean();
    const Matrix centered = points.rowwise() - global_mean;
    const Eigen::MatrixXd global_cov =
        centered.transpose() * centered / static_cast<double>(n) + ridge;

    std::vector<GmmComponent> comps;
    for (const auto& c : kmeanspp(points, m, rng)) {
        comps.push_back({1.0 / m, c, global_cov});
    }
    GmmModel model(comps);
    std::vector<double> trace;
    Eigen::MatrixXd resp(n, m);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        // E-step: responsibilities and the log-likelihood of the current parameters.
        double ll = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
            const Vector lt = model.component_log_terms(points.row(r).transpose());
            const double mx = lt.maxCoeff();
            const double lse = mx + std::log((lt.array() - mx).exp().sum());
            ll += lse;
            resp.row(r) = (lt.array() - lse).exp().matrix().transpose();
        }
        ll /= static_cast<double>(n);
        trace.push_back(ll);
        if (!std::isfinite(ll)) {
            throw NumericError("gmm_fit_em: non-finite log-likelihood at iteration " +
                               std::to_string(iter));
        }
        if (iter > 0 && ll - prev_ll < opts.tol) {
            break;
        }
        prev_ll = ll;

        // M-step.
        std::vector<GmmComponent> next = comps;
        for (int i = 0; i < m; ++i) {
            const double nk = resp.col(i).sum();
            auto& c = next[static_cast<std::size_t>(i)];
            if (nk <= 1e-12) {
                continue;  // starved component keeps its parameters
            }
            c.prior = nk / static_cast<double>(n);
            c.mean = (points.transpose() * resp.col(i)) / nk;
            const Matrix diff = points.rowwise() - c.mean.transpose();
            c.cov = diff.transpose() * resp.col(i).asDiagonal() * diff / nk + ridge;
        }
        double total = 0.0;
        for (const auto& c : next) {
            total += c.prior;
        }
        for (auto& c : next) {
            c.prior /= total;
        }
        comps = std::move(next);
        model = GmmModel(comps);
    }
    model.set_trace(std::move(trace));
    return model;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> nearest_rows(const Matrix& points, const Vector& x, std::size_t k,
                                      std::optional<std::size_t> exclude) {
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
        if (exclude && *exclude == static_cast<std::size_t>(r)) {
            continue;
        }
        dist.emplace_back((points.row(r).transpose() - x).norm(), static_cast<std::size_t>(r));
    }
    if (k > dist.size()) {
        throw InvalidArgument("nearest_rows: k=" + std::to_string(k) + " exceeds " +
                              std::to_string(dist.size()) + " candidates");
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i) {
        out[i] = dist[i].second;
    }
    return out;
}

GravityModel::GravityModel(Matrix class_points, std::size_t k)
    : points_(std::move(class_points)), k_(k) {
    const auto n = static_cast<std::size_t>(points_.rows());
    if (k_ == 0) {
        throw InvalidArgument("GravityModel: k must be positive");
    }
    if (k_ > n) {
        throw InvalidArgument("GravityModel: k=" + std::to_string(k_) +
                              " larger than class population " + std::to_string(n));
    }
    // Local density of each class point among the others; a lone point has no neighbors.
    density_.resize(n);
    const std::size_t kk = std::min(k_, n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        if (kk == 0) {
            density_[i] = std::numeric_limits<double>::infinity();
            continue;
        }
        const Vector xi = points_.row(static_cast<Eigen::Index>(i)).transpose();
        double sum = 0.0;
        for (auto j : nearest_rows(points_, xi, kk, i)) {
            sum += (points_.row(static_cast<Eigen::Index>(j)).transpose() - xi).norm();
        }
        density_[i] = sum > 0.0 ? static_cast<double>(kk) / sum
                                : std::numeric_limits<double>::infinity();
    }
}

GravityPoint GravityModel::gravity_point(const Vector& x_factual) const {
    if (x_factual.size() != points_.cols()) {
        throw InvalidArgument("gravity_point: dimension mismatch");
    }
    GravityPoint g;
    g.neighbors = nearest_rows(points_, x_factual, k_);
    g.weights = Vector::Zero(static_cast<Eigen::Index>(k_));

    std::size_t infinite = 0;
    for (auto j : g.neighbors) {
        infinite += std::isinf(density_[j]) ? 1 : 0;
    }
    for (std::size_t i = 0; i < k_; ++i) {
        const double rho = density_[g.neighbors[i]];
        if (infinite > 0) {
            g.weights(static_cast<Eigen::Index>(i)) = std::isinf(rho) ? 1.0 : 0.0;
        } else {
            g.weights(static_cast<Eigen::Index>(i)) = rho;
        }
    }
    g.weights /= g.weights.sum();
    g.point = Vector::Zero(points_.cols());
    for (std::size_t i = 0; i < k_; ++i) {
        g.point += g.weights(static_cast<Eigen::Index>(i)) *
                   points_.row(static_cast<Eigen::Index>(g.neighbors[i])).transpose();
    }
    return g;
}

ValueGrad GravityTerm::value_grad(const Vector& x) const {
    if (x.size() != gravity_.size()) {
        throw InvalidArgument("gravity_value_grad: dimension mismatch");
    }
    const Vector diff = x - gravity_;
    const double dist = diff.norm();
    ValueGrad out;
    out.value = -dist;
    out.grad = dist > 0.0 ? Vector(-diff / dist) : Vector::Zero(x.size());
    return out;
}

} // namespace scfe
