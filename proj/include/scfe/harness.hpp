#pragma once

// Datasets, hyperparameter search and the three experiments (metrics
// benchmark, robustness curves, synthetic 2-D demo).

#include "scfe/classifier.hpp"
#include "scfe/metrics.hpp"
#include "scfe/numerics.hpp"
#include "scfe/plausibility.hpp"
#include "scfe/proximal.hpp"
#include "scfe/solver.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace scfe {

// ---------------------------------------------------------------------------
// Data

struct DatasetTable {
    std::string name;
    Matrix features;  // min-max scaled into [0,1]
    Labels labels;
    std::vector<std::string> feature_names;
    MinMaxScaler scaler;
    std::optional<PcaModel> pca;
    Box box;

    int num_classes() const;
};

struct CsvOptions {
    std::string label_column = "label";
    /// "" keeps integer labels; "median" thresholds a numeric target at its median.
    std::string binarize;
};

/// Reads a header + numeric CSV. Errors name the offending data row (1-based,
/// header excluded).
DatasetTable load_csv_dataset(const std::string& path, const CsvOptions& opts = {});
DatasetTable parse_csv_dataset(std::istream& in, const std::string& name,
                               const CsvOptions& opts = {});

/// Two Gaussian blobs (class 0 around centers[0], class 1 around centers[1]).
DatasetTable generate_synth2d(std::size_t n_per_class, const std::vector<Vector>& centers,
                              const Eigen::MatrixXd& cov, Rng& rng);

/// Train/test split of a table, an optional PCA fitted on the training rows,
/// and a final min-max map fitted on the training rows (test rows clamped).
struct PreparedData {
    std::string name;
    Matrix train_x;
    Labels train_y;
    Matrix test_x;
    Labels test_y;
    std::vector<std::size_t> test_rows;  // row indices into the source table
    Box box;
    std::vector<std::size_t> immutable;  // features pinned to the factual value
    int num_classes = 0;
    // Pipeline from raw table units to the model space.
    MinMaxScaler raw_scaler;
    std::optional<PcaModel> pca;
    MinMaxScaler scaler;

    Box box_for(const Vector& x_factual) const;
    /// Raw feature values (table units) to the model space, clamped to the box.
    Vector map_raw(const Vector& raw) const;
};

PreparedData prepare_data(const DatasetTable& table, std::size_t n_test, std::size_t pca_dims,
                          const std::vector<std::size_t>& immutable, Rng& rng);

// ---------------------------------------------------------------------------
// Configuration

enum class PlausibilityKind { none, kde, gmm, knn };

std::string to_string(PlausibilityKind kind);
PlausibilityKind plausibility_from_string(const std::string& s);

struct DatasetSpec {
    std::string source = "synthetic";  // "synthetic" or a CSV path
    CsvOptions csv;
    std::size_t synth_per_class = 250;
    double synth_separation = 5.0;  // centers at -/+ (separation, 0)
    double synth_std = 1.0;
    std::size_t n_test = 100;
    std::size_t pca_dims = 0;  // 0 keeps the raw features
    std::vector<std::size_t> immutable;
};

struct ClassifierSpec {
    std::string kind = "mlp";  // "mlp" or "linear"
    Eigen::Index hidden = 20;
    int hidden_layers = 2;
    TrainOptions train;
    std::string model_path;  // load instead of training when set
};

struct PlausibilitySpec {
    PlausibilityKind kind = PlausibilityKind::none;
    double kde_bandwidth = 0.0;  // <= 0: Scott's rule
    GmmFitOptions gmm;
};

struct SearchSpace {
    std::vector<double> beta_grid;
    std::vector<double> tau_grid;
    // Per-kind tau grids; empty falls back to tau_grid. Each q-hat has its own
    // scale (unnormalized KDE, normalized GMM density, negative distance).
    std::vector<double> tau_grid_kde;
    std::vector<double> tau_grid_gmm;
    std::vector<double> tau_grid_knn;
    double log_gamma_lo = -3.0;
    double log_gamma_hi = 3.0;
    int gamma_steps = 10;
    std::vector<std::size_t> k_grid{3, 4, 5};

    static SearchSpace defaults();
    void validate() const;
    /// {0} for none.
    std::vector<double> taus_for(PlausibilityKind kind) const;
};

/// 10^lo .. 10^hi with `points` log-spaced values.
std::vector<double> log_grid(double lo, double hi, int points);

struct ExperimentConfig {
    DatasetSpec dataset;
    ClassifierSpec classifier;
    PlausibilitySpec plausibility;
    SolverConfig solver;
    SearchSpace search = SearchSpace::defaults();
    /// auto | flip | next | runner_up | fixed:<class>
    std::string target = "auto";
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::string out_dir = ".";
    bool timing = false;  // off keeps output bytes independent of wall-clock time
    std::size_t lof_k = 20;
    std::vector<double> radii{0.0, 0.05, 0.1, 0.2};
    std::vector<PlausibilityKind> robustness_kinds{PlausibilityKind::none, PlausibilityKind::kde,
                                                   PlausibilityKind::gmm, PlausibilityKind::knn};
    bool robustness_instances = false;  // also write per-instance distances
    std::size_t demo_instances = 5;
    std::string method;  // report label; empty means "scfe_<plausibility>"
};

// ---------------------------------------------------------------------------
// Models and search

/// Per-class plausibility models fitted on correctly classified training points.
struct PlausibilityModels {
    PlausibilityKind kind = PlausibilityKind::none;
    std::vector<std::shared_ptr<const DensityTerm>> density;   // kde / gmm
    std::vector<std::shared_ptr<const GravityModel>> gravity;  // knn, one per k in k_grid
    std::vector<std::size_t> k_grid;

    /// Density term for one solve; a gravity term is built around x_f.
    std::shared_ptr<const DensityTerm> term(int target, const Vector& x_factual,
                                            std::size_t k) const;
};

PlausibilityModels build_plausibility(const PlausibilitySpec& spec, const PreparedData& data,
                                      const ClassifierModel& model,
                                      const std::vector<std::size_t>& k_grid, Rng& rng);

int choose_target(const std::string& policy, const ClassifierModel& model, const Vector& x);

/// Grid over (beta or m, tau, k) with a log-bisection on gamma per cell. The
/// winner is the valid candidate with the smallest (theta0, theta2); with no
/// valid candidate, the one with the lowest classifier loss.
CfeResult search_hyperparameters(const Vector& x_factual, int target,
                                 const ClassifierModel& classifier,
                                 const PlausibilityModels& plausibility, const SearchSpace& space,
                                 const SolverConfig& solver_template, const Box& box,
                                 std::vector<CfeResult>* evaluated = nullptr);

/// Re-solves with the hyperparameters recorded on `chosen`.
CfeResult resolve_with(const CfeResult& chosen, const Vector& x_factual,
                       const ClassifierModel& classifier, const PlausibilityModels& plausibility,
                       const SolverConfig& solver_template, const Box& box);

// ---------------------------------------------------------------------------
// Experiments

struct Experiment {
    PreparedData data;
    ClassifierModel model;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::shared_ptr<const LofIndex> lof;
};

DatasetTable load_dataset(const DatasetSpec& spec, Rng& rng);
ClassifierModel train_classifier(const ClassifierSpec& spec, const PreparedData& data, Rng& rng,
                                 TrainReport* report = nullptr);
/// Models of `kind` for an experiment, seeded from cfg.seed (shared by every entry point).
PlausibilityModels build_plausibility(const ExperimentConfig& cfg, const Experiment& exp,
                                      PlausibilityKind kind);
/// Data pipeline + classifier (trained, or loaded from classifier.model_path) + LOF index.
Experiment build_experiment(const ExperimentConfig& cfg);

struct BenchmarkOutput {
    MetricsReport report;
    std::vector<CfeResult> results;
    std::vector<Vector> factuals;
    std::vector<std::size_t> rows;
    std::vector<double> seconds;
    std::vector<double> lof;
};

BenchmarkOutput run_benchmark(const ExperimentConfig& cfg, const Experiment& exp,
                              const PlausibilityModels& plausibility);

inline constexpr const char* kResultsHeader =
    "index,target,valid,theta0,theta2,lof,beta,tau,gamma,k,seconds";
void write_results_csv(std::ostream& os, const BenchmarkOutput& out);
/// results.csv and report.csv under `dir`.
void save_benchmark(const std::string& dir, const BenchmarkOutput& out);

struct RobustnessRow {
    double radius = 0.0;
    PlausibilityKind kind = PlausibilityKind::none;
    double input_l2 = 0.0;   // median over instances
    double output_l2 = 0.0;  // median over instances
};

struct RobustnessInstance {
    double radius = 0.0;
    PlausibilityKind kind = PlausibilityKind::none;
    std::size_t row = 0;
    double input_l2 = 0.0;
    double output_l2 = 0.0;
};

struct RobustnessOutput {
    std::vector<RobustnessRow> rows;  // sorted by radius, then kind order
    std::vector<RobustnessInstance> instances;
};

RobustnessOutput run_robustness(const ExperimentConfig& cfg, const Experiment& exp);

inline constexpr const char* kRobustnessHeader = "radius,plausibility,input_l2,output_l2";
void write_robustness_csv(std::ostream& os, const RobustnessOutput& out);
void write_robustness_instances_csv(std::ostream& os, const RobustnessOutput& out);

struct DemoOutput {
    // One trajectory per instance, x^0 .. x^T.
    std::vector<std::vector<Vector>> trajectories;
    std::vector<std::vector<Vector>> baseline;  // same instances, tau = 0
    std::vector<CfeResult> results;
    std::vector<CfeResult> baseline_results;
    Vector boundary_weights;  // w with w . x + b = 0 on the decision boundary
    double boundary_bias = 0.0;
};

/// Requires a 2-feature dataset and a linear 2-class classifier.
DemoOutput run_synth_demo(const ExperimentConfig& cfg, const Experiment& exp,
                          const PlausibilityModels& plausibility);

void write_trajectory_csv(std::ostream& os, const std::vector<std::vector<Vector>>& trajectories);
/// trajectory.csv, trajectory_baseline.csv and boundary.csv under `dir`.
void save_demo(const std::string& dir, const DemoOutput& out);

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads. The first exception
/// (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

} // namespace scfe
