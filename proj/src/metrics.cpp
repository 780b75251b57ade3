#include "scfe/metrics.hpp"

#include "scfe/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace scfe {

int theta0(const Vector& x, const Vector& y, double eps) {
    if (x.size() != y.size()) {
        throw InvalidArgument("theta_0: dimension mismatch");
    }
    int count = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        count += std::abs(x(i) - y(i)) > eps ? 1 : 0;
    }
    return count;
}

double theta_p(const Vector& x, const Vector& y, double p) {
    if (x.size() != y.size()) {
        throw InvalidArgument("theta_p: dimension mismatch");
    }
    if (p == 0.0) {
        return theta0(x, y);
    }
    const Eigen::ArrayXd diff = (x - y).array().abs();
    if (std::isinf(p)) {
        return diff.size() == 0 ? 0.0 : diff.maxCoeff();
    }
    if (p == 1.0) {
        return diff.sum();
    }
    if (p == 2.0) {
        return std::sqrt(diff.square().sum());
    }
    if (p == 0.5) {
        const double root_sum = diff.sqrt().sum();
        return root_sum * root_sum;
    }
    throw InvalidArgument("theta_p: unsupported order p=" + std::to_string(p));
}

// ---------------------------------------------------------------------------

double lrd_ratio(double numerator, double denominator) {
    if (std::isinf(numerator) && std::isinf(denominator)) {
        return 1.0;
    }
    return numerator / denominator;
}

LofIndex::LofIndex(Matrix reference, std::size_t k, double p)
    : reference_(std::move(reference)), k_(k), p_(p) {
    const auto n = static_cast<std::size_t>(reference_.rows());
    if (k_ == 0 || k_ >= n) {
        throw InvalidArgument("LofIndex: need 0 < k < n (k=" + std::to_string(k_) +
                              ", n=" + std::to_string(n) + ")");
    }
    if (!(p_ == 1.0 || p_ == 2.0 || std::isinf(p_))) {
        throw InvalidArgument("LofIndex: distance order must be 1, 2 or infinity");
    }
    std::vector<std::vector<std::size_t>> nbrs(n);
    k_distance_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vector xi = reference_.row(static_cast<Eigen::Index>(i)).transpose();
        nbrs[i] = neighbours(xi, i);
        k_distance_[i] =
            theta_p(xi, reference_.row(static_cast<Eigen::Index>(nbrs[i].back())).transpose(), p_);
    }
    lrd_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vector xi = reference_.row(static_cast<Eigen::Index>(i)).transpose();
        double sum = 0.0;
        for (auto j : nbrs[i]) {
            sum += std::max(theta_p(xi, reference_.row(static_cast<Eigen::Index>(j)).transpose(), p_),
                            k_distance_[j]);
        }
        lrd_[i] = sum > 0.0 ? static_cast<double>(k_) / sum : std::numeric_limits<double>::infinity();
    }
}

std::vector<std::size_t> LofIndex::neighbours(const Vector& x,
                                              std::optional<std::size_t> exclude) const {
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(static_cast<std::size_t>(reference_.rows()));
    for (Eigen::Index r = 0; r < reference_.rows(); ++r) {
        if (exclude && *exclude == static_cast<std::size_t>(r)) {
            continue;
        }
        dist.emplace_back(theta_p(x, reference_.row(r).transpose(), p_), static_cast<std::size_t>(r));
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
    std::vector<std::size_t> out(k_);
    for (std::size_t i = 0; i < k_; ++i) {
        out[i] = dist[i].second;
    }
    return out;
}

double LofIndex::local_reachability_density(const Vector& x) const {
    if (x.size() != reference_.cols()) {
        throw InvalidArgument("lof: dimension mismatch");
    }
    double sum = 0.0;
    for (auto j : neighbours(x, std::nullopt)) {
        sum += std::max(theta_p(x, reference_.row(static_cast<Eigen::Index>(j)).transpose(), p_),
                        k_distance_[j]);
    }
    return sum > 0.0 ? static_cast<double>(k_) / sum : std::numeric_limits<double>::infinity();
}

double LofIndex::lof(const Vector& x) const {
    if (x.size() != reference_.cols()) {
        throw InvalidArgument("lof: dimension mismatch");
    }
    const double own = local_reachability_density(x);
    double total = 0.0;
    for (auto j : neighbours(x, std::nullopt)) {
        total += lrd_ratio(lrd_[j], own);
    }
    return total / static_cast<double>(k_);
}

// ---------------------------------------------------------------------------

bool validity(const ClassifierModel& model, const Vector& x_cf, int target) {
    return model.predict(x_cf) == target;
}

double validity_rate(const std::vector<bool>& flags) {
    if (flags.empty()) {
        return 0.0;
    }
    const auto hits = std::count(flags.begin(), flags.end(), true);
    return 100.0 * static_cast<double>(hits) / static_cast<double>(flags.size());
}

MetricSummary summarize(const std::vector<double>& values) {
    MetricSummary s;
    if (values.empty()) {
        s.mean = std::numeric_limits<double>::quiet_NaN();
        s.std = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    s.mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) {
        sq += (v - s.mean) * (v - s.mean);
    }
    s.std = std::sqrt(sq / static_cast<double>(values.size()));
    return s;
}

InstanceMetrics instance_metrics(const CfeResult& result, const Vector& x_factual,
                                 const LofIndex& index) {
    InstanceMetrics m;
    m.valid = result.valid;
    m.theta0 = theta0(result.x_cf, x_factual);
    m.theta2 = theta_p(result.x_cf, x_factual, 2.0);
    m.lof = index.lof(result.x_cf);
    return m;
}

MetricsReport aggregate_report(const std::vector<CfeResult>& results,
                               const std::vector<Vector>& factuals, const LofIndex& index) {
    if (results.empty()) {
        throw InvalidArgument("aggregate_report: empty batch");
    }
    if (results.size() != factuals.size()) {
        throw InvalidArgument("aggregate_report: results and factuals differ in length");
    }
    MetricsReport report;
    std::vector<bool> flags;
    std::vector<double> t2;
    std::vector<double> t0;
    std::vector<double> lofs;
    for (std::size_t i = 0; i < results.size(); ++i) {
        InstanceMetrics m = instance_metrics(results[i], factuals[i], index);
        flags.push_back(m.valid);
        if (m.valid) {
            t2.push_back(m.theta2);
            t0.push_back(static_cast<double>(m.theta0));
            lofs.push_back(m.lof);
        }
        report.instances.push_back(m);
    }
    report.validity = validity_rate(flags);
    report.valid_count = t2.size();
    report.theta2 = summarize(t2);
    report.theta0 = summarize(t0);
    report.lof = summarize(lofs);
    return report;
}

void write_report_header(std::ostream& os) { os << kReportHeader << '\n'; }

void write_report_row(std::ostream& os, const MetricsReport& r) {
    const auto old_flags = os.flags();
    const auto old_prec = os.precision();
    os << std::setprecision(10) << r.method << ',' << r.dataset << ',' << r.validity << ','
       << r.theta2.mean << ',' << r.theta2.std << ',' << r.theta0.mean << ',' << r.theta0.std
       << ',' << r.lof.mean << ',' << r.lof.std << ',' << r.seconds_per_100 << '\n';
    os.flags(old_flags);
    os.precision(old_prec);
}

} // namespace scfe
