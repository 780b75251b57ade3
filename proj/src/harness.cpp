#include "scfe/harness.hpp"

#include "scfe/error.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <thread>

namespace scfe {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) {
        return false;
    }
    const char* first = s.data();
    if (*first == '+') {
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

double median(std::vector<double> v) {
    if (v.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::ofstream open_output(const std::string& dir, const std::string& file) {
    std::filesystem::create_directories(dir);
    const auto path = std::filesystem::path(dir) / file;
    std::ofstream os(path);
    if (!os) {
        throw InvalidArgument("cannot write " + path.string());
    }
    return os;
}

} // namespace

// ---------------------------------------------------------------------------
// Data

int DatasetTable::num_classes() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

DatasetTable parse_csv_dataset(std::istream& in, const std::string& name, const CsvOptions& opts) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(name + ": empty file, expected a header row");
    }
    const std::vector<std::string> header = split_fields(line);
    const auto label_it = std::find(header.begin(), header.end(), opts.label_column);
    if (label_it == header.end()) {
        throw ParseError(name + ": label column '" + opts.label_column + "' not found in header");
    }
    const auto label_col = static_cast<std::size_t>(label_it - header.begin());
    if (!opts.binarize.empty() && opts.binarize != "median") {
        throw InvalidArgument("unknown binarize rule '" + opts.binarize + "' (expected median)");
    }

    std::vector<std::vector<double>> rows;
    std::vector<double> raw_labels;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            continue;
        }
        ++row;
        const auto fields = split_fields(line);
        if (fields.size() != header.size()) {
            throw ParseError(name + ": row " + std::to_string(row) + " has " +
                             std::to_string(fields.size()) + " fields, header has " +
                             std::to_string(header.size()));
        }
        std::vector<double> values;
        values.reserve(header.size() - 1);
        for (std::size_t c = 0; c < fields.size(); ++c) {
            double v = 0.0;
            if (!parse_double(fields[c], v)) {
                throw ParseError(name + ": row " + std::to_string(row) + ", column '" + header[c] +
                                 "': non-numeric value '" + fields[c] + "'");
            }
            if (c == label_col) {
                if (opts.binarize.empty() && (v < 0.0 || v != std::floor(v) || v > 1e6)) {
                    throw ParseError(name + ": row " + std::to_string(row) +
                                     ": unknown label value '" + fields[c] +
                                     "' (labels must be integers 0..C-1)");
                }
                raw_labels.push_back(v);
            } else {
                values.push_back(v);
            }
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) {
        throw ParseError(name + ": no data rows");
    }

    DatasetTable t;
    t.name = name;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c != label_col) {
            t.feature_names.push_back(header[c]);
        }
    }
    Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size() - 1));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    if (opts.binarize == "median") {
        const double m = median(raw_labels);
        for (double v : raw_labels) {
            t.labels.push_back(v > m ? 1 : 0);
        }
    } else {
        for (double v : raw_labels) {
            t.labels.push_back(static_cast<int>(v));
        }
        std::vector<bool> seen(static_cast<std::size_t>(t.num_classes()), false);
        for (int y : t.labels) {
            seen[static_cast<std::size_t>(y)] = true;
        }
        for (std::size_t c = 0; c < seen.size(); ++c) {
            if (!seen[c]) {
                throw ParseError(name + ": label values must cover 0..C-1, class " +
                                 std::to_string(c) + " has no rows");
            }
        }
    }
    auto [scaler, scaled] = minmax_fit_transform(x);
    t.scaler = std::move(scaler);
    t.features = std::move(scaled);
    t.box = Box::unit(t.features.cols());
    return t;
}

DatasetTable load_csv_dataset(const std::string& path, const CsvOptions& opts) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidArgument("cannot open dataset file '" + path + "'");
    }
    return parse_csv_dataset(in, std::filesystem::path(path).stem().string(), opts);
}

DatasetTable generate_synth2d(std::size_t n_per_class, const std::vector<Vector>& centers,
                              const Eigen::MatrixXd& cov, Rng& rng) {
    if (n_per_class == 0) {
        throw InvalidArgument("generate_synth2d: n_per_class must be positive");
    }
    if (centers.size() != 2 || centers[0].size() != 2 || centers[1].size() != 2) {
        throw InvalidArgument("generate_synth2d: need two 2-D centers");
    }
    if (cov.rows() != 2 || cov.cols() != 2) {
        throw InvalidArgument("generate_synth2d: covariance must be 2x2");
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw InvalidArgument("generate_synth2d: covariance must be positive definite");
    }
    const Eigen::MatrixXd l = llt.matrixL();
    const auto n = static_cast<Eigen::Index>(n_per_class);
    Matrix x(2 * n, 2);
    DatasetTable t;
    t.name = "synthetic";
    t.feature_names = {"x0", "x1"};
    for (int cls = 0; cls < 2; ++cls) {
        for (Eigen::Index i = 0; i < n; ++i) {
            Vector z(2);
            z(0) = rng.normal();
            z(1) = rng.normal();
            x.row(cls * n + i) = (centers[static_cast<std::size_t>(cls)] + l * z).transpose();
            t.labels.push_back(cls);
        }
    }
    auto [scaler, scaled] = minmax_fit_transform(x);
    t.scaler = std::move(scaler);
    t.features = std::move(scaled);
    t.box = Box::unit(2);
    return t;
}

Box PreparedData::box_for(const Vector& x_factual) const {
    return immutable.empty() ? box : box.with_fixed(x_factual, immutable);
}

Vector PreparedData::map_raw(const Vector& raw) const {
    if (raw.size() != raw_scaler.dims()) {
        throw InvalidArgument("input row has " + std::to_string(raw.size()) + " values, expected " +
                              std::to_string(raw_scaler.dims()));
    }
    Matrix row = raw_scaler.transform(Vector(raw)).transpose();
    if (pca) {
        row = pca_transform(*pca, row);
    }
    return scaler.transform(Vector(row.row(0).transpose()));
}

PreparedData prepare_data(const DatasetTable& table, std::size_t n_test, std::size_t pca_dims,
                          const std::vector<std::size_t>& immutable, Rng& rng) {
    Split split = seeded_shuffle_split(table.features, table.labels, n_test, rng);
    PreparedData d;
    d.name = table.name;
    d.train_y = std::move(split.train_y);
    d.test_y = std::move(split.test_y);
    d.test_rows = std::move(split.test_index);
    Matrix train = std::move(split.train_x);
    Matrix test = std::move(split.test_x);
    if (pca_dims > 0) {
        d.pca = pca_fit(train, static_cast<Eigen::Index>(pca_dims));
        train = pca_transform(*d.pca, train);
        test = pca_transform(*d.pca, test);
    }
    d.raw_scaler = table.scaler;
    d.scaler = MinMaxScaler::fit(train);
    d.train_x = d.scaler.transform(train);
    d.test_x = d.scaler.transform(test);
    d.box = Box::unit(d.train_x.cols());
    for (auto f : immutable) {
        if (f >= static_cast<std::size_t>(d.train_x.cols())) {
            throw InvalidArgument("immutable feature index " + std::to_string(f) + " out of range");
        }
    }
    d.immutable = immutable;
    d.num_classes = table.num_classes();
    return d;
}

// ---------------------------------------------------------------------------
// Configuration

std::string to_string(PlausibilityKind kind) {
    switch (kind) {
    case PlausibilityKind::none:
        return "none";
    case PlausibilityKind::kde:
        return "kde";
    case PlausibilityKind::gmm:
        return "gmm";
    case PlausibilityKind::knn:
        return "knn";
    }
    return "none";
}

PlausibilityKind plausibility_from_string(const std::string& s) {
    for (auto k : {PlausibilityKind::none, PlausibilityKind::kde, PlausibilityKind::gmm,
                   PlausibilityKind::knn}) {
        if (s == to_string(k)) {
            return k;
        }
    }
    throw InvalidArgument("unknown plausibility kind '" + s + "' (none, kde, gmm, knn)");
}

std::vector<double> log_grid(double lo, double hi, int points) {
    if (points < 1) {
        throw InvalidArgument("log_grid: need at least one point");
    }
    std::vector<double> g;
    for (int i = 0; i < points; ++i) {
        const double e = points == 1 ? lo : lo + (hi - lo) * i / (points - 1);
        g.push_back(std::pow(10.0, e));
    }
    return g;
}

SearchSpace SearchSpace::defaults() {
    SearchSpace s;
    s.beta_grid = log_grid(-3.0, 3.0, 7);
    s.tau_grid = log_grid(-3.0, 3.0, 7);
    return s;
}

void SearchSpace::validate() const {
    auto check = [](const std::vector<double>& g, const char* name) {
        if (g.empty()) {
            throw InvalidArgument(std::string("search: ") + name + " grid is empty");
        }
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!(g[i] > 0.0) || !std::isfinite(g[i]) || (i > 0 && !(g[i] > g[i - 1]))) {
                throw InvalidArgument(std::string("search: ") + name +
                                      " grid must be positive and strictly ascending");
            }
        }
    };
    check(beta_grid, "beta");
    check(tau_grid, "tau");
    for (const auto* g : {&tau_grid_kde, &tau_grid_gmm, &tau_grid_knn}) {
        if (!g->empty()) {
            check(*g, "per-kind tau");
        }
    }
    if (!(log_gamma_lo <= log_gamma_hi)) {
        throw InvalidArgument("search: gamma bracket is empty");
    }
    if (gamma_steps < 1) {
        throw InvalidArgument("search: gamma_steps must be at least 1");
    }
    if (k_grid.empty()) {
        throw InvalidArgument("search: k grid is empty");
    }
    for (std::size_t i = 0; i < k_grid.size(); ++i) {
        if (k_grid[i] == 0 || (i > 0 && k_grid[i] <= k_grid[i - 1])) {
            throw InvalidArgument("search: k grid must be positive and strictly ascending");
        }
    }
}

std::vector<double> SearchSpace::taus_for(PlausibilityKind kind) const {
    const std::vector<double>* g = &tau_grid;
    switch (kind) {
    case PlausibilityKind::none:
        return {0.0};
    case PlausibilityKind::kde:
        g = &tau_grid_kde;
        break;
    case PlausibilityKind::gmm:
        g = &tau_grid_gmm;
        break;
    case PlausibilityKind::knn:
        g = &tau_grid_knn;
        break;
    }
    return g->empty() ? tau_grid : *g;
}

// ---------------------------------------------------------------------------
// Models and search

std::shared_ptr<const DensityTerm> PlausibilityModels::term(int target, const Vector& x_factual,
                                                            std::size_t k) const {
    const auto cls = static_cast<std::size_t>(target);
    switch (kind) {
    case PlausibilityKind::none:
        return nullptr;
    case PlausibilityKind::kde:
    case PlausibilityKind::gmm:
        if (cls >= density.size() || !density[cls]) {
            throw InvalidArgument("no " + to_string(kind) + " model for class " +
                                  std::to_string(target) +
                                  " (too few correctly classified training points)");
        }
        return density[cls];
    case PlausibilityKind::knn: {
        const auto it = std::find(k_grid.begin(), k_grid.end(), k);
        if (it == k_grid.end()) {
            throw InvalidArgument("knn plausibility was not built for k=" + std::to_string(k));
        }
        const std::size_t slot = cls * k_grid.size() + static_cast<std::size_t>(it - k_grid.begin());
        if (slot >= gravity.size() || !gravity[slot]) {
            throw InvalidArgument("no knn model for class " + std::to_string(target) +
                                  " with k=" + std::to_string(k));
        }
        return std::make_shared<GravityTerm>(gravity[slot]->gravity_point(x_factual).point);
    }
    }
    return nullptr;
}

PlausibilityModels build_plausibility(const PlausibilitySpec& spec, const PreparedData& data,
                                      const ClassifierModel& model,
                                      const std::vector<std::size_t>& k_grid, Rng& rng) {
    PlausibilityModels pm;
    pm.kind = spec.kind;
    if (spec.kind == PlausibilityKind::none) {
        return pm;
    }
    const auto classes = static_cast<std::size_t>(data.num_classes);
    if (spec.kind == PlausibilityKind::knn) {
        pm.k_grid = k_grid;
        pm.gravity.resize(classes * k_grid.size());
    } else {
        pm.density.resize(classes);
    }
    for (std::size_t c = 0; c < classes; ++c) {
        const Matrix pts =
            correctly_classified(data.train_x, data.train_y, static_cast<int>(c), model);
        switch (spec.kind) {
        case PlausibilityKind::kde:
            if (pts.rows() >= 2) {
                pm.density[c] = std::make_shared<KdeModel>(kde_fit(pts, {spec.kde_bandwidth}));
            }
            break;
        case PlausibilityKind::gmm:
            if (pts.rows() >= spec.gmm.components) {
                Rng class_rng = rng.fork(c);
                pm.density[c] = std::make_shared<GmmModel>(gmm_fit_em(pts, spec.gmm, class_rng));
            }
            break;
        case PlausibilityKind::knn:
            for (std::size_t i = 0; i < k_grid.size(); ++i) {
                if (static_cast<std::size_t>(pts.rows()) > k_grid[i]) {
                    pm.gravity[c * k_grid.size() + i] = std::make_shared<GravityModel>(pts, k_grid[i]);
                }
            }
            break;
        case PlausibilityKind::none:
            break;
        }
    }
    return pm;
}

int choose_target(const std::string& policy, const ClassifierModel& model, const Vector& x) {
    const int classes = model.num_classes();
    const int pred = model.predict(x);
    std::string p = policy;
    if (p == "auto") {
        p = classes == 2 ? "flip" : "runner_up";
    }
    if (p == "flip") {
        if (classes != 2) {
            throw InvalidArgument("target policy 'flip' needs a 2-class model");
        }
        return 1 - pred;
    }
    if (p == "next") {
        return (pred + 1) % classes;
    }
    if (p == "runner_up") {
        if (model.is_binary()) {
            return 1 - pred;
        }
        const Vector logits = model.forward_logits(x);
        int best = -1;
        for (int i = 0; i < classes; ++i) {
            if (i != pred && (best < 0 || logits(i) > logits(best))) {
                best = i;
            }
        }
        return best;
    }
    if (p.rfind("fixed:", 0) == 0) {
        int c = -1;
        const std::string num = p.substr(6);
        const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), c);
        if (ec != std::errc() || ptr != num.data() + num.size() || c < 0 || c >= classes) {
            throw InvalidArgument("target policy '" + policy + "': class out of range");
        }
        return c;
    }
    throw InvalidArgument("unknown target policy '" + policy +
                          "' (auto, flip, next, runner_up, fixed:<class>)");
}

namespace {

bool better_valid(const CfeResult& a, const CfeResult& b) {
    if (a.theta0 != b.theta0) {
        return a.theta0 < b.theta0;
    }
    return a.theta2 < b.theta2;
}

SolverConfig config_for(const SolverConfig& tmpl, double gamma, double tau, double beta,
                        std::size_t m, bool trace) {
    SolverConfig cfg = tmpl;
    cfg.gamma = gamma;
    cfg.tau = tau;
    if (auto* pen = std::get_if<PenaltyMode>(&cfg.sparsity)) {
        pen->beta = beta;
    } else {
        std::get<ConstraintMode>(cfg.sparsity).m = m;
    }
    cfg.record_trajectory = trace;
    return cfg;
}

} // namespace

CfeResult search_hyperparameters(const Vector& x_factual, int target,
                                 const ClassifierModel& classifier,
                                 const PlausibilityModels& plausibility, const SearchSpace& space,
                                 const SolverConfig& solver_template, const Box& box,
                                 std::vector<CfeResult>* evaluated) {
    space.validate();
    validate(solver_template, x_factual.size());

    std::optional<CfeResult> best_valid;
    std::optional<CfeResult> best_invalid;
    auto consider = [&](CfeResult r) {
        if (r.valid) {
            if (!best_valid || better_valid(r, *best_valid)) {
                best_valid = r;
            }
        } else if (!best_invalid || r.loss < best_invalid->loss) {
            best_invalid = r;
        }
        if (evaluated != nullptr) {
            evaluated->push_back(std::move(r));
        }
    };

    // The factual point itself is a zero-change candidate.
    if (classifier.predict(x_factual) == target && box.contains(x_factual)) {
        CfeResult r;
        r.x_cf = x_factual;
        r.target = target;
        r.valid = true;
        r.loss = cfe_loss(classifier, x_factual,
                          loss_config_for(classifier, target, solver_template.cutoff));
        r.objective = 0.0;
        if (const auto* c = std::get_if<ConstraintMode>(&solver_template.sparsity)) {
            r.m = c->m;
        }
        consider(r);
    }

    std::vector<double> betas{0.0};
    std::size_t m = 0;
    if (std::holds_alternative<PenaltyMode>(solver_template.sparsity)) {
        betas = space.beta_grid;
    } else {
        m = std::get<ConstraintMode>(solver_template.sparsity).m;
    }
    const std::vector<double> taus = space.taus_for(plausibility.kind);
    const std::vector<std::size_t> ks =
        plausibility.kind == PlausibilityKind::knn ? space.k_grid : std::vector<std::size_t>{0};

    for (double beta : betas) {
        for (double tau : taus) {
            for (std::size_t k : ks) {
                const auto term = plausibility.term(target, x_factual, k);
                auto solve = [&](double log_gamma) {
                    const SolverConfig cfg =
                        config_for(solver_template, std::pow(10.0, log_gamma), tau, beta, m, false);
                    CfeResult r = apg_solve(x_factual, target, classifier, term.get(), cfg, box);
                    r.k = k;
                    return r;
                };
                // Find a valid upper end: the top of the bracket first, then (if the
                // hinge iterate froze on the wrong side) a downward walk over an even
                // log grid. The rest of the budget bisects below the valid end.
                const double span = space.log_gamma_hi - space.log_gamma_lo;
                const int steps = space.gamma_steps;
                double hi = space.log_gamma_hi;
                int step = 0;
                bool reachable = false;
                while (step < steps && !reachable) {
                    hi = space.log_gamma_hi - (steps > 1 ? span * step / (steps - 1) : 0.0);
                    CfeResult r = solve(hi);
                    reachable = r.valid;
                    consider(std::move(r));
                    ++step;
                }
                if (!reachable) {
                    continue;
                }
                double lo = space.log_gamma_lo;
                for (; step < steps; ++step) {
                    const double mid = 0.5 * (lo + hi);
                    CfeResult r = solve(mid);
                    if (r.valid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    consider(std::move(r));
                }
            }
        }
    }
    if (best_valid) {
        return *best_valid;
    }
    return *best_invalid;
}

CfeResult resolve_with(const CfeResult& chosen, const Vector& x_factual,
                       const ClassifierModel& classifier, const PlausibilityModels& plausibility,
                       const SolverConfig& solver_template, const Box& box) {
    const SolverConfig cfg =
        config_for(solver_template, chosen.gamma, chosen.tau, chosen.beta, chosen.m,
                   solver_template.record_trajectory);
    std::shared_ptr<const DensityTerm> term;
    if (chosen.tau > 0.0) {
        term = plausibility.term(chosen.target, x_factual, chosen.k);
    }
    CfeResult r = apg_solve(x_factual, chosen.target, classifier, term.get(), cfg, box);
    r.k = chosen.k;
    return r;
}

// ---------------------------------------------------------------------------
// Experiments

DatasetTable load_dataset(const DatasetSpec& spec, Rng& rng) {
    if (spec.source == "synthetic") {
        const double s = spec.synth_separation;
        Vector c0(2), c1(2);
        c0 << -s, 0.0;
        c1 << s, 0.0;
        const Eigen::MatrixXd cov =
            spec.synth_std * spec.synth_std * Eigen::MatrixXd::Identity(2, 2);
        return generate_synth2d(spec.synth_per_class, {c0, c1}, cov, rng);
    }
    return load_csv_dataset(spec.source, spec.csv);
}

ClassifierModel train_classifier(const ClassifierSpec& spec, const PreparedData& data, Rng& rng,
                                 TrainReport* report) {
    const Eigen::Index d = data.train_x.cols();
    const Eigen::Index classes = std::max(2, data.num_classes);
    Rng init_rng = rng.fork(1);
    Rng train_rng = rng.fork(2);
    ClassifierModel model;
    if (spec.kind == "mlp") {
        model = make_mlp(d, spec.hidden, spec.hidden_layers, classes, init_rng);
    } else if (spec.kind == "linear") {
        model = make_linear(d, classes, init_rng);
    } else {
        throw InvalidArgument("unknown classifier kind '" + spec.kind + "' (mlp, linear)");
    }
    TrainReport r =
        train_adam(model, data.train_x, data.train_y, spec.train, train_rng, &data.test_x, &data.test_y);
    if (report != nullptr) {
        *report = std::move(r);
    }
    return model;
}

Experiment build_experiment(const ExperimentConfig& cfg) {
    const Rng master(cfg.seed);
    Rng data_rng = master.fork(1);
    Rng split_rng = master.fork(2);
    Rng model_rng = master.fork(3);

    const DatasetTable table = load_dataset(cfg.dataset, data_rng);
    Experiment exp;
    exp.data = prepare_data(table, cfg.dataset.n_test, cfg.dataset.pca_dims,
                            cfg.dataset.immutable, split_rng);
    if (cfg.classifier.model_path.empty()) {
        exp.model = train_classifier(cfg.classifier, exp.data, model_rng);
    } else {
        exp.model = load_model(cfg.classifier.model_path);
        if (exp.model.input_dims() != exp.data.train_x.cols() ||
            exp.model.num_classes() < exp.data.num_classes) {
            throw InvalidArgument("model '" + cfg.classifier.model_path + "' expects " +
                                  std::to_string(exp.model.input_dims()) + " features and " +
                                  std::to_string(exp.model.num_classes()) +
                                  " classes; the prepared data has " +
                                  std::to_string(exp.data.train_x.cols()) + " and " +
                                  std::to_string(exp.data.num_classes));
        }
    }
    exp.train_accuracy = accuracy(exp.model, exp.data.train_x, exp.data.train_y);
    exp.test_accuracy = accuracy(exp.model, exp.data.test_x, exp.data.test_y);
    exp.lof = std::make_shared<LofIndex>(exp.data.train_x, cfg.lof_k, 2.0);
    return exp;
}

PlausibilityModels build_plausibility(const ExperimentConfig& cfg, const Experiment& exp,
                                      PlausibilityKind kind) {
    PlausibilitySpec spec = cfg.plausibility;
    spec.kind = kind;
    Rng rng = Rng(cfg.seed).fork(5);
    return build_plausibility(spec, exp.data, exp.model, cfg.search.k_grid, rng);
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, n));
    std::vector<std::exception_ptr> errors(n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
                break;
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::atomic<bool> failed{false};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                while (!failed.load()) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n) {
                        return;
                    }
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                        failed.store(true);
                    }
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

BenchmarkOutput run_benchmark(const ExperimentConfig& cfg, const Experiment& exp,
                              const PlausibilityModels& plausibility) {
    const PreparedData& data = exp.data;
    const auto n = static_cast<std::size_t>(data.test_x.rows());
    BenchmarkOutput out;
    out.results.resize(n);
    out.seconds.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        out.factuals.push_back(data.test_x.row(static_cast<Eigen::Index>(i)).transpose());
        out.rows.push_back(data.test_rows[i]);
    }
    parallel_for(n, cfg.jobs, [&](std::size_t i) {
        const auto start = std::chrono::steady_clock::now();
        const Vector& xf = out.factuals[i];
        const int target = choose_target(cfg.target, exp.model, xf);
        out.results[i] = search_hyperparameters(xf, target, exp.model, plausibility, cfg.search,
                                                cfg.solver, data.box_for(xf));
        if (cfg.timing) {
            out.seconds[i] =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        }
    });
    out.report = aggregate_report(out.results, out.factuals, *exp.lof);
    out.report.method = cfg.method.empty() ? "scfe_" + to_string(plausibility.kind) : cfg.method;
    out.report.dataset = data.name;
    double total = 0.0;
    for (double s : out.seconds) {
        total += s;
    }
    out.report.seconds_per_100 = n == 0 ? 0.0 : 100.0 * total / static_cast<double>(n);
    for (const auto& m : out.report.instances) {
        out.lof.push_back(m.lof);
    }
    return out;
}

void write_results_csv(std::ostream& os, const BenchmarkOutput& out) {
    const auto old_prec = os.precision();
    os << std::setprecision(10) << kResultsHeader << '\n';
    for (std::size_t i = 0; i < out.results.size(); ++i) {
        const CfeResult& r = out.results[i];
        os << out.rows[i] << ',' << r.target << ',' << (r.valid ? 1 : 0) << ',' << r.theta0 << ','
           << r.theta2 << ',' << out.lof[i] << ',' << r.beta << ',' << r.tau << ',' << r.gamma
           << ',' << r.k << ',' << out.seconds[i] << '\n';
    }
    os.precision(old_prec);
}

void save_benchmark(const std::string& dir, const BenchmarkOutput& out) {
    auto results = open_output(dir, "results.csv");
    write_results_csv(results, out);
    auto report = open_output(dir, "report.csv");
    write_report_header(report);
    write_report_row(report, out.report);
}

RobustnessOutput run_robustness(const ExperimentConfig& cfg, const Experiment& exp) {
    for (double r : cfg.radii) {
        if (!(r >= 0.0) || !std::isfinite(r)) {
            throw InvalidArgument("robustness radii must be finite and nonnegative");
        }
    }
    std::vector<double> radii = cfg.radii;
    std::sort(radii.begin(), radii.end());

    const Rng master(cfg.seed);
    const PreparedData& data = exp.data;
    const auto n = static_cast<std::size_t>(data.test_x.rows());
    const auto d = data.test_x.cols();

    // One seeded direction per instance, shared by every radius and kind.
    std::vector<Vector> directions;
    const Rng dir_rng = master.fork(6);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng = dir_rng.fork(i);
        Vector u(d);
        do {
            for (Eigen::Index j = 0; j < d; ++j) {
                u(j) = rng.normal();
            }
        } while (u.norm() == 0.0);
        directions.push_back(u / u.norm());
    }

    RobustnessOutput out;
    // distances[kind][radius][instance]
    std::vector<std::vector<std::vector<std::pair<double, double>>>> dist(cfg.robustness_kinds.size());
    for (std::size_t ki = 0; ki < cfg.robustness_kinds.size(); ++ki) {
        const PlausibilityModels pm = build_plausibility(cfg, exp, cfg.robustness_kinds[ki]);
        const BenchmarkOutput base = run_benchmark(cfg, exp, pm);
        dist[ki].assign(radii.size(), std::vector<std::pair<double, double>>(n));
        parallel_for(n, cfg.jobs, [&](std::size_t i) {
            const Vector& xf = base.factuals[i];
            for (std::size_t ri = 0; ri < radii.size(); ++ri) {
                const Vector moved = project_box(xf + radii[ri] * directions[i], data.box);
                const CfeResult r = resolve_with(base.results[i], moved, exp.model, pm, cfg.solver,
                                                 data.box_for(moved));
                dist[ki][ri][i] = {(moved - xf).norm(), (r.x_cf - base.results[i].x_cf).norm()};
            }
        });
    }
    for (std::size_t ri = 0; ri < radii.size(); ++ri) {
        for (std::size_t ki = 0; ki < cfg.robustness_kinds.size(); ++ki) {
            std::vector<double> in;
            std::vector<double> outd;
            for (std::size_t i = 0; i < n; ++i) {
                const auto [a, b] = dist[ki][ri][i];
                in.push_back(a);
                outd.push_back(b);
                out.instances.push_back({radii[ri], cfg.robustness_kinds[ki], data.test_rows[i], a, b});
            }
            out.rows.push_back({radii[ri], cfg.robustness_kinds[ki], median(in), median(outd)});
        }
    }
    return out;
}

void write_robustness_csv(std::ostream& os, const RobustnessOutput& out) {
    const auto old_prec = os.precision();
    os << std::setprecision(10) << kRobustnessHeader << '\n';
    for (const auto& r : out.rows) {
        os << r.radius << ',' << to_string(r.kind) << ',' << r.input_l2 << ',' << r.output_l2 << '\n';
    }
    os.precision(old_prec);
}

void write_robustness_instances_csv(std::ostream& os, const RobustnessOutput& out) {
    const auto old_prec = os.precision();
    os << std::setprecision(10) << "radius,plausibility,index,input_l2,output_l2\n";
    for (const auto& r : out.instances) {
        os << r.radius << ',' << to_string(r.kind) << ',' << r.row << ',' << r.input_l2 << ','
           << r.output_l2 << '\n';
    }
    os.precision(old_prec);
}

DemoOutput run_synth_demo(const ExperimentConfig& cfg, const Experiment& exp,
                          const PlausibilityModels& plausibility) {
    const auto& layers = exp.model.layers();
    if (exp.data.train_x.cols() != 2 || layers.size() != 1) {
        throw InvalidArgument("demo needs 2-D data and a linear classifier (classifier.kind=linear)");
    }
    DemoOutput out;
    const DenseLayer& l = layers.front();
    if (exp.model.is_binary()) {
        out.boundary_weights = l.weights.row(0).transpose();
        out.boundary_bias = l.bias(0);
    } else if (l.outputs() == 2) {
        out.boundary_weights = (l.weights.row(1) - l.weights.row(0)).transpose();
        out.boundary_bias = l.bias(1) - l.bias(0);
    } else {
        throw InvalidArgument("demo needs a 2-class classifier");
    }

    const PlausibilityModels none;
    const auto n = std::min<std::size_t>(cfg.demo_instances,
                                         static_cast<std::size_t>(exp.data.test_x.rows()));
    out.trajectories.resize(n);
    out.baseline.resize(n);
    out.results.resize(n);
    out.baseline_results.resize(n);
    SolverConfig traced = cfg.solver;
    traced.record_trajectory = true;
    parallel_for(n, cfg.jobs, [&](std::size_t i) {
        const Vector xf = exp.data.test_x.row(static_cast<Eigen::Index>(i)).transpose();
        const int target = choose_target(cfg.target, exp.model, xf);
        const Box box = exp.data.box_for(xf);
        auto run = [&](const PlausibilityModels& pm, std::vector<Vector>& traj, CfeResult& res) {
            const CfeResult chosen =
                search_hyperparameters(xf, target, exp.model, pm, cfg.search, cfg.solver, box);
            res = resolve_with(chosen, xf, exp.model, pm, traced, box);
            traj = res.trajectory;
        };
        run(plausibility, out.trajectories[i], out.results[i]);
        run(none, out.baseline[i], out.baseline_results[i]);
    });
    return out;
}

void write_trajectory_csv(std::ostream& os, const std::vector<std::vector<Vector>>& trajectories) {
    const auto old_prec = os.precision();
    os << std::setprecision(10) << "instance,iter";
    const Eigen::Index d =
        trajectories.empty() || trajectories.front().empty() ? 0 : trajectories.front().front().size();
    for (Eigen::Index j = 0; j < d; ++j) {
        os << ",coord" << j;
    }
    os << '\n';
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        for (std::size_t t = 0; t < trajectories[i].size(); ++t) {
            os << i << ',' << t;
            for (Eigen::Index j = 0; j < trajectories[i][t].size(); ++j) {
                os << ',' << trajectories[i][t](j);
            }
            os << '\n';
        }
    }
    os.precision(old_prec);
}

void save_demo(const std::string& dir, const DemoOutput& out) {
    auto traj = open_output(dir, "trajectory.csv");
    write_trajectory_csv(traj, out.trajectories);
    auto base = open_output(dir, "trajectory_baseline.csv");
    write_trajectory_csv(base, out.baseline);
    auto boundary = open_output(dir, "boundary.csv");
    boundary << std::setprecision(17) << "w0,w1,b\n"
             << out.boundary_weights(0) << ',' << out.boundary_weights(1) << ','
             << out.boundary_bias << '\n';
}

} // namespace scfe
