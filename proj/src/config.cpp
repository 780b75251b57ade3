#include "scfe/config.hpp"

#include "scfe/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

namespace scfe {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return {};
    }
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& want) {
    throw InvalidArgument("config key '" + key + "': expected " + want + ", got '" + value + "'");
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const char* first = v.data();
    if (!v.empty() && *first == '+') {
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
        bad_value(key, v, "a number");
    }
    return out;
}

template <class T>
T to_integer(const std::string& key, const std::string& v, T lo) {
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size() || out < lo) {
        bad_value(key, v, "an integer >= " + std::to_string(lo));
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no" || v == "off") {
        return false;
    }
    bad_value(key, v, "true or false");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    if (trim(v).empty()) {
        return out;
    }
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(trim(item));
    }
    return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& s : split_list(v)) {
        out.push_back(to_double(key, s));
    }
    return out;
}

std::vector<std::size_t> to_sizes(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    for (const auto& s : split_list(v)) {
        out.push_back(to_integer<std::size_t>(key, s, 0));
    }
    return out;
}

std::string num(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

template <class T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& f) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out += (i > 0 ? "," : "") + f(v[i]);
    }
    return out;
}

std::string nums(const std::vector<double>& v) {
    return join<double>(v, num);
}

std::string sizes(const std::vector<std::size_t>& v) {
    return join<std::size_t>(v, [](const std::size_t& x) { return std::to_string(x); });
}

std::string sparsity_name(const SparsityMode& mode) {
    if (std::holds_alternative<ConstraintMode>(mode)) {
        return "constraint";
    }
    switch (std::get<PenaltyMode>(mode).norm) {
    case PenaltyNorm::l0:
        return "l0";
    case PenaltyNorm::l_half:
        return "l_half";
    case PenaltyNorm::l1:
        return "l1";
    }
    return "l1";
}

struct KeyDef {
    ConfigKey key;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<KeyDef>& key_defs() {
    using C = ExperimentConfig;
    using S = std::string;
    static const std::vector<KeyDef> defs{
        {{"seed", "master seed; every random stream is forked from it"},
         [](C& c, const S& v) { c.seed = to_integer<std::uint64_t>("seed", v, 0); },
         [](const C& c) { return std::to_string(c.seed); }},
        {{"jobs", "worker threads over test instances"},
         [](C& c, const S& v) { c.jobs = to_integer<std::size_t>("jobs", v, 1); },
         [](const C& c) { return std::to_string(c.jobs); }},
        {{"out_dir", "output directory (fallback: $SCFE_OUT_DIR, then .)"},
         [](C& c, const S& v) { c.out_dir = v; },
         [](const C& c) { return c.out_dir; }},
        {{"timing", "record wall-clock seconds (makes outputs run-dependent)"},
         [](C& c, const S& v) { c.timing = to_bool("timing", v); },
         [](const C& c) { return S(c.timing ? "true" : "false"); }},
        {{"target", "target class policy: auto | flip | next | runner_up | fixed:<class>"},
         [](C& c, const S& v) { c.target = v; },
         [](const C& c) { return c.target; }},
        {{"method", "method label in report.csv (default scfe_<plausibility>)"},
         [](C& c, const S& v) { c.method = v; },
         [](const C& c) { return c.method; }},
        {{"lof_k", "neighbours for the LOF metric"},
         [](C& c, const S& v) { c.lof_k = to_integer<std::size_t>("lof_k", v, 1); },
         [](const C& c) { return std::to_string(c.lof_k); }},

        {{"dataset.source", "'synthetic' or a CSV path"},
         [](C& c, const S& v) { c.dataset.source = v; },
         [](const C& c) { return c.dataset.source; }},
        {{"dataset.label_column", "label column of the CSV"},
         [](C& c, const S& v) { c.dataset.csv.label_column = v; },
         [](const C& c) { return c.dataset.csv.label_column; }},
        {{"dataset.binarize", "'' keeps integer labels, 'median' thresholds at the median"},
         [](C& c, const S& v) { c.dataset.csv.binarize = v; },
         [](const C& c) { return c.dataset.csv.binarize; }},
        {{"dataset.synth_per_class", "synthetic points per class"},
         [](C& c, const S& v) {
             c.dataset.synth_per_class = to_integer<std::size_t>("dataset.synth_per_class", v, 1);
         },
         [](const C& c) { return std::to_string(c.dataset.synth_per_class); }},
        {{"dataset.synth_separation", "synthetic class centers at -/+(s, 0)"},
         [](C& c, const S& v) { c.dataset.synth_separation = to_double("dataset.synth_separation", v); },
         [](const C& c) { return num(c.dataset.synth_separation); }},
        {{"dataset.synth_std", "synthetic per-axis standard deviation"},
         [](C& c, const S& v) { c.dataset.synth_std = to_double("dataset.synth_std", v); },
         [](const C& c) { return num(c.dataset.synth_std); }},
        {{"dataset.n_test", "held-out rows used as factual points"},
         [](C& c, const S& v) { c.dataset.n_test = to_integer<std::size_t>("dataset.n_test", v, 1); },
         [](const C& c) { return std::to_string(c.dataset.n_test); }},
        {{"dataset.pca_dims", "PCA components (0 keeps raw features)"},
         [](C& c, const S& v) { c.dataset.pca_dims = to_integer<std::size_t>("dataset.pca_dims", v, 0); },
         [](const C& c) { return std::to_string(c.dataset.pca_dims); }},
        {{"dataset.immutable", "comma list of feature indices pinned to the factual value"},
         [](C& c, const S& v) { c.dataset.immutable = to_sizes("dataset.immutable", v); },
         [](const C& c) { return sizes(c.dataset.immutable); }},

        {{"classifier.kind", "mlp | linear"},
         [](C& c, const S& v) { c.classifier.kind = v; },
         [](const C& c) { return c.classifier.kind; }},
        {{"classifier.hidden", "neurons per hidden layer"},
         [](C& c, const S& v) { c.classifier.hidden = to_integer<Eigen::Index>("classifier.hidden", v, 1); },
         [](const C& c) { return std::to_string(c.classifier.hidden); }},
        {{"classifier.hidden_layers", "hidden layers of the MLP"},
         [](C& c, const S& v) { c.classifier.hidden_layers = to_integer<int>("classifier.hidden_layers", v, 1); },
         [](const C& c) { return std::to_string(c.classifier.hidden_layers); }},
        {{"classifier.epochs", "Adam epochs"},
         [](C& c, const S& v) { c.classifier.train.epochs = to_integer<int>("classifier.epochs", v, 0); },
         [](const C& c) { return std::to_string(c.classifier.train.epochs); }},
        {{"classifier.batch", "mini-batch size"},
         [](C& c, const S& v) { c.classifier.train.batch = to_integer<std::size_t>("classifier.batch", v, 1); },
         [](const C& c) { return std::to_string(c.classifier.train.batch); }},
        {{"classifier.lr", "Adam learning rate"},
         [](C& c, const S& v) { c.classifier.train.lr = to_double("classifier.lr", v); },
         [](const C& c) { return num(c.classifier.train.lr); }},
        {{"classifier.model", "model file to load instead of training"},
         [](C& c, const S& v) { c.classifier.model_path = v; },
         [](const C& c) { return c.classifier.model_path; }},

        {{"plausibility.kind", "none | kde | gmm | knn"},
         [](C& c, const S& v) { c.plausibility.kind = plausibility_from_string(v); },
         [](const C& c) { return to_string(c.plausibility.kind); }},
        {{"plausibility.kde_bandwidth", "KDE bandwidth (<= 0: Scott's rule)"},
         [](C& c, const S& v) { c.plausibility.kde_bandwidth = to_double("plausibility.kde_bandwidth", v); },
         [](const C& c) { return num(c.plausibility.kde_bandwidth); }},
        {{"plausibility.gmm_components", "GMM components per class"},
         [](C& c, const S& v) { c.plausibility.gmm.components = to_integer<int>("plausibility.gmm_components", v, 1); },
         [](const C& c) { return std::to_string(c.plausibility.gmm.components); }},
        {{"plausibility.gmm_max_iter", "EM iterations"},
         [](C& c, const S& v) { c.plausibility.gmm.max_iter = to_integer<int>("plausibility.gmm_max_iter", v, 1); },
         [](const C& c) { return std::to_string(c.plausibility.gmm.max_iter); }},
        {{"plausibility.gmm_tol", "EM log-likelihood tolerance"},
         [](C& c, const S& v) { c.plausibility.gmm.tol = to_double("plausibility.gmm_tol", v); },
         [](const C& c) { return num(c.plausibility.gmm.tol); }},
        {{"plausibility.gmm_ridge", "diagonal floor added to every GMM covariance"},
         [](C& c, const S& v) { c.plausibility.gmm.ridge = to_double("plausibility.gmm_ridge", v); },
         [](const C& c) { return num(c.plausibility.gmm.ridge); }},

        {{"solver.sparsity", "constraint | l0 | l_half | l1"},
         [](C& c, const S& v) {
             const std::size_t m = std::holds_alternative<ConstraintMode>(c.solver.sparsity)
                                       ? std::get<ConstraintMode>(c.solver.sparsity).m
                                       : 1;
             if (v == "constraint") {
                 c.solver.sparsity = ConstraintMode{m};
             } else if (v == "l0") {
                 c.solver.sparsity = PenaltyMode{PenaltyNorm::l0, 0.0};
             } else if (v == "l_half") {
                 c.solver.sparsity = PenaltyMode{PenaltyNorm::l_half, 0.0};
             } else if (v == "l1") {
                 c.solver.sparsity = PenaltyMode{PenaltyNorm::l1, 0.0};
             } else {
                 bad_value("solver.sparsity", v, "constraint, l0, l_half or l1");
             }
         },
         [](const C& c) { return sparsity_name(c.solver.sparsity); }},
        {{"solver.m", "changed-feature budget in constraint mode"},
         [](C& c, const S& v) {
             if (v.empty()) {
                 return;
             }
             const auto m = to_integer<std::size_t>("solver.m", v, 0);
             if (auto* cm = std::get_if<ConstraintMode>(&c.solver.sparsity)) {
                 cm->m = m;
             } else {
                 throw InvalidArgument("config key 'solver.m' needs solver.sparsity = constraint");
             }
         },
         [](const C& c) {
             const auto* cm = std::get_if<ConstraintMode>(&c.solver.sparsity);
             return cm ? std::to_string(cm->m) : S();
         }},
        {{"solver.iterations", "APG iterations T"},
         [](C& c, const S& v) { c.solver.iterations = to_integer<int>("solver.iterations", v, 1); },
         [](const C& c) { return std::to_string(c.solver.iterations); }},
        {{"solver.step0", "initial step size"},
         [](C& c, const S& v) { c.solver.step0 = to_double("solver.step0", v); },
         [](const C& c) { return num(c.solver.step0); }},
        {{"solver.init", "factual | zero"},
         [](C& c, const S& v) {
             if (v == "factual") {
                 c.solver.init = InitMode::factual;
             } else if (v == "zero") {
                 c.solver.init = InitMode::zero;
             } else {
                 bad_value("solver.init", v, "factual or zero");
             }
         },
         [](const C& c) { return S(c.solver.init == InitMode::factual ? "factual" : "zero"); }},
        {{"solver.cutoff", "hinge cut-off c"},
         [](C& c, const S& v) { c.solver.cutoff = to_double("solver.cutoff", v); },
         [](const C& c) { return num(c.solver.cutoff); }},

        {{"search.beta_grid", "comma list of sparsity weights (penalty modes)"},
         [](C& c, const S& v) { c.search.beta_grid = to_doubles("search.beta_grid", v); },
         [](const C& c) { return nums(c.search.beta_grid); }},
        {{"search.tau_grid", "comma list of plausibility weights"},
         [](C& c, const S& v) { c.search.tau_grid = to_doubles("search.tau_grid", v); },
         [](const C& c) { return nums(c.search.tau_grid); }},
        {{"search.tau_grid_kde", "tau grid for kde (empty: search.tau_grid)"},
         [](C& c, const S& v) { c.search.tau_grid_kde = to_doubles("search.tau_grid_kde", v); },
         [](const C& c) { return nums(c.search.tau_grid_kde); }},
        {{"search.tau_grid_gmm", "tau grid for gmm (empty: search.tau_grid)"},
         [](C& c, const S& v) { c.search.tau_grid_gmm = to_doubles("search.tau_grid_gmm", v); },
         [](const C& c) { return nums(c.search.tau_grid_gmm); }},
        {{"search.tau_grid_knn", "tau grid for knn (empty: search.tau_grid)"},
         [](C& c, const S& v) { c.search.tau_grid_knn = to_doubles("search.tau_grid_knn", v); },
         [](const C& c) { return nums(c.search.tau_grid_knn); }},
        {{"search.log_gamma_lo", "lower end of the log10 gamma bracket"},
         [](C& c, const S& v) { c.search.log_gamma_lo = to_double("search.log_gamma_lo", v); },
         [](const C& c) { return num(c.search.log_gamma_lo); }},
        {{"search.log_gamma_hi", "upper end of the log10 gamma bracket"},
         [](C& c, const S& v) { c.search.log_gamma_hi = to_double("search.log_gamma_hi", v); },
         [](const C& c) { return num(c.search.log_gamma_hi); }},
        {{"search.gamma_steps", "solves per grid cell in the gamma search"},
         [](C& c, const S& v) { c.search.gamma_steps = to_integer<int>("search.gamma_steps", v, 1); },
         [](const C& c) { return std::to_string(c.search.gamma_steps); }},
        {{"search.k_grid", "comma list of gravity neighbour counts (knn)"},
         [](C& c, const S& v) { c.search.k_grid = to_sizes("search.k_grid", v); },
         [](const C& c) { return sizes(c.search.k_grid); }},

        {{"robustness.radii", "comma list of perturbation radii"},
         [](C& c, const S& v) { c.radii = to_doubles("robustness.radii", v); },
         [](const C& c) { return nums(c.radii); }},
        {{"robustness.kinds", "comma list of plausibility kinds to compare"},
         [](C& c, const S& v) {
             c.robustness_kinds.clear();
             for (const auto& k : split_list(v)) {
                 c.robustness_kinds.push_back(plausibility_from_string(k));
             }
         },
         [](const C& c) {
             return join<PlausibilityKind>(c.robustness_kinds,
                                           [](const PlausibilityKind& k) { return to_string(k); });
         }},
        {{"robustness.instances", "also write per-instance distances"},
         [](C& c, const S& v) { c.robustness_instances = to_bool("robustness.instances", v); },
         [](const C& c) { return S(c.robustness_instances ? "true" : "false"); }},
        {{"demo.instances", "factual points traced by the demo"},
         [](C& c, const S& v) { c.demo_instances = to_integer<std::size_t>("demo.instances", v, 1); },
         [](const C& c) { return std::to_string(c.demo_instances); }},
    };
    return defs;
}

} // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> k;
        for (const auto& d : key_defs()) {
            k.push_back(d.key);
        }
        return k;
    }();
    return keys;
}

bool is_config_key(const std::string& name) {
    const auto& defs = key_defs();
    return std::any_of(defs.begin(), defs.end(), [&](const KeyDef& d) { return d.key.name == name; });
}

ConfigValues parse_config(std::istream& in, const std::string& source) {
    ConfigValues values;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') {
            continue;
        }
        const auto eq = t.find('=');
        const std::string where = source + ":" + std::to_string(lineno);
        if (eq == std::string::npos) {
            throw ParseError(where + ": expected key = value, got '" + t + "'");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (!is_config_key(key)) {
            throw ParseError(where + ": unknown key '" + key + "'");
        }
        if (!values.emplace(key, value).second) {
            throw ParseError(where + ": key '" + key + "' set twice");
        }
    }
    return values;
}

ConfigValues load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidArgument("cannot open config file '" + path + "'");
    }
    return parse_config(in, path);
}

ExperimentConfig make_experiment_config(const ConfigValues& values) {
    ExperimentConfig cfg;
    // solver.sparsity before solver.m so the budget lands on the chosen mode.
    for (const auto& d : key_defs()) {
        if (d.key.name == "solver.m") {
            continue;
        }
        if (const auto it = values.find(d.key.name); it != values.end()) {
            d.set(cfg, it->second);
        }
    }
    for (const auto& [key, value] : values) {
        if (!is_config_key(key)) {
            throw InvalidArgument("unknown config key '" + key + "'");
        }
        if (key == "solver.m") {
            const auto& defs = key_defs();
            std::find_if(defs.begin(), defs.end(), [](const KeyDef& d) {
                return d.key.name == "solver.m";
            })->set(cfg, value);
        }
    }
    cfg.search.validate();
    return cfg;
}

void validate_paths(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    if (cfg.dataset.source != "synthetic" && !fs::is_regular_file(cfg.dataset.source)) {
        throw InvalidArgument("dataset file not found: '" + cfg.dataset.source + "'");
    }
    if (!cfg.classifier.model_path.empty() && !fs::is_regular_file(cfg.classifier.model_path)) {
        throw InvalidArgument("model file not found: '" + cfg.classifier.model_path + "'");
    }
    if (fs::exists(cfg.out_dir) && !fs::is_directory(cfg.out_dir)) {
        throw InvalidArgument("output path is not a directory: '" + cfg.out_dir + "'");
    }
}

std::string describe_config(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& d : key_defs()) {
        out += d.key.name + " = " + d.get(cfg) + "\n";
    }
    return out;
}

} // namespace scfe
