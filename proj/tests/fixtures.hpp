#pragma once

// Shared experiment setups for the harness tests and the acceptance suite.

#include "scfe/harness.hpp"

#include <string>

namespace fixture {

inline std::string data_path(const std::string& file) {
    return std::string(SCFE_DATA_DIR) + "/" + file;
}

// Two unit-variance blobs at -/+(4, 0) with a linear head. Bandwidth, covariance
// floor and per-kind tau are sized so each density basin spans the ~0.3 gap a
// counterfactual has to cross in the scaled [0,1] space.
inline scfe::ExperimentConfig synthetic(std::uint64_t seed = 0) {
    scfe::ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.dataset.source = "synthetic";
    cfg.dataset.synth_separation = 4.0;
    cfg.dataset.synth_per_class = 250;
    cfg.dataset.n_test = 100;
    cfg.classifier.kind = "linear";
    cfg.classifier.train.epochs = 50;
    cfg.classifier.train.lr = 1e-2;
    cfg.solver.sparsity = scfe::ConstraintMode{2};
    cfg.plausibility.kde_bandwidth = 0.2;
    cfg.plausibility.gmm.ridge = 0.04;
    cfg.search.tau_grid_kde = {1.0};
    cfg.search.tau_grid_gmm = {1.0};
    cfg.search.tau_grid_knn = {10.0};
    cfg.radii = {0.0, 0.05, 0.1, 0.2};
    return cfg;
}

// Wine, PCA to 8 components, linear softmax head, one changed feature.
inline scfe::ExperimentConfig wine(std::uint64_t seed = 0) {
    scfe::ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.dataset.source = data_path("wine.csv");
    cfg.dataset.pca_dims = 8;
    cfg.dataset.n_test = 100;
    cfg.classifier.kind = "linear";
    cfg.classifier.train.epochs = 500;
    cfg.classifier.train.lr = 1e-2;
    cfg.solver.sparsity = scfe::ConstraintMode{1};
    cfg.plausibility.kind = scfe::PlausibilityKind::kde;
    cfg.target = "runner_up";
    return cfg;
}

} // namespace fixture
