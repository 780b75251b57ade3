#pragma once

#include "scfe/classifier.hpp"
#include "scfe/numerics.hpp"
#include "scfe/solver.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace scfe {

/// Differences at or below this magnitude do not count toward theta_0.
inline constexpr double kSparsityEps = 1e-8;

/// theta_p(x, x') = |x - x'|_p. p = 0 counts changed coordinates; p may be
/// 0, 0.5, 1, 2 or infinity (std::numeric_limits<double>::infinity()).
double theta_p(const Vector& x, const Vector& y, double p);
int theta0(const Vector& x, const Vector& y, double eps = kSparsityEps);

/// Local outlier factor against a fixed reference set. Queries use the
/// novelty convention: neighbours come from the reference set only.
class LofIndex {
public:
    LofIndex(Matrix reference, std::size_t k = 20, double p = 2.0);

    double lof(const Vector& x) const;
    double local_reachability_density(const Vector& x) const;

    std::size_t k() const { return k_; }
    double p() const { return p_; }
    const Matrix& reference() const { return reference_; }
    double k_distance(std::size_t i) const { return k_distance_[i]; }
    double lrd(std::size_t i) const { return lrd_[i]; }

private:
    Matrix reference_;
    std::size_t k_;
    double p_;
    std::vector<double> k_distance_;
    std::vector<double> lrd_;

    std::vector<std::size_t> neighbours(const Vector& x, std::optional<std::size_t> exclude) const;
};

/// ratio lrd(a) / lrd(b) with inf/inf = 1.
double lrd_ratio(double numerator, double denominator);

bool validity(const ClassifierModel& model, const Vector& x_cf, int target);
double validity_rate(const std::vector<bool>& flags);

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;  // population
};

MetricSummary summarize(const std::vector<double>& values);

struct InstanceMetrics {
    bool valid = false;
    int theta0 = 0;
    double theta2 = 0.0;
    double lof = 0.0;
};

struct MetricsReport {
    std::string method;
    std::string dataset;
    double validity = 0.0;  // percent
    MetricSummary theta2;   // over valid results
    MetricSummary theta0;
    MetricSummary lof;
    double seconds_per_100 = 0.0;
    std::vector<InstanceMetrics> instances;
    std::size_t valid_count = 0;
};

InstanceMetrics instance_metrics(const CfeResult& result, const Vector& x_factual,
                                 const LofIndex& index);

/// Validity over every result; theta/LOF statistics over valid results only.
MetricsReport aggregate_report(const std::vector<CfeResult>& results,
                               const std::vector<Vector>& factuals, const LofIndex& index);

inline constexpr const char* kReportHeader =
    "method,dataset,validity,theta2_mean,theta2_std,theta0_mean,theta0_std,lof_mean,lof_std,"
    "seconds_per_100";

void write_report_header(std::ostream& os);
void write_report_row(std::ostream& os, const MetricsReport& report);

} // namespace scfe
