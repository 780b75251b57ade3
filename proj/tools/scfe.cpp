// scfe: sparse counterfactual explanations from the command line.
//
//   scfe train|explain|benchmark|robustness|demo [--config PATH] [--seed N] [--jobs N]
//        [--<key> VALUE ...]
//
// Every config key has a flag of the same name; flags override the file,
// the file overrides the defaults. Exit codes: 0 ok, 2 config/input error,
// 3 numeric or other runtime failure.

#include "scfe/config.hpp"
#include "scfe/error.hpp"
#include "scfe/harness.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

using namespace scfe;

namespace {

constexpr int kInputError = 2;
constexpr int kRuntimeError = 3;

struct ExplainArgs {
    std::optional<std::size_t> index;
    std::string input_row;
    std::string csv;
};

std::string model_file(const ExperimentConfig& cfg) {
    return (std::filesystem::path(cfg.out_dir) / "model.txt").string();
}

void write_config_copy(const ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream(std::filesystem::path(cfg.out_dir) / "config.txt") << describe_config(cfg);
}

int cmd_train(ExperimentConfig cfg) {
    cfg.classifier.model_path.clear();
    const Experiment exp = build_experiment(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    const std::string path = model_file(cfg);
    save_model(exp.model, path);
    std::cout << std::fixed << std::setprecision(4) << "accuracy " << exp.test_accuracy
              << " (train " << exp.train_accuracy << ")\nmodel " << path << '\n';
    return 0;
}

Vector parse_row(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos) {
            throw InvalidArgument("--input-row: '" + item + "' is not a number");
        }
        values.push_back(v);
    }
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

int cmd_explain(const ExperimentConfig& cfg, const ExplainArgs& args) {
    if (args.index.has_value() == !args.input_row.empty()) {
        throw InvalidArgument("explain needs exactly one of --index or --input-row");
    }
    const Experiment exp = build_experiment(cfg);
    Vector xf;
    std::string label;
    if (args.index) {
        const auto n = static_cast<std::size_t>(exp.data.test_x.rows());
        if (*args.index >= n) {
            throw InvalidArgument("--index " + std::to_string(*args.index) +
                                  " out of range (test set has " + std::to_string(n) + " rows)");
        }
        xf = exp.data.test_x.row(static_cast<Eigen::Index>(*args.index)).transpose();
        label = std::to_string(exp.data.test_rows[*args.index]);
    } else {
        xf = exp.data.map_raw(parse_row(args.input_row));
        label = "input";
    }
    const PlausibilityModels pm = build_plausibility(cfg, exp, cfg.plausibility.kind);
    const int target = choose_target(cfg.target, exp.model, xf);
    const CfeResult r = search_hyperparameters(xf, target, exp.model, pm, cfg.search, cfg.solver,
                                               exp.data.box_for(xf));

    std::ostringstream os;
    os << std::setprecision(10) << "row,target,valid,theta0,theta2,lof,beta,tau,gamma,k";
    for (Eigen::Index j = 0; j < r.x_cf.size(); ++j) {
        os << ",x" << j;
    }
    os << '\n'
       << label << ',' << r.target << ',' << (r.valid ? 1 : 0) << ',' << r.theta0 << ','
       << r.theta2 << ',' << exp.lof->lof(r.x_cf) << ',' << r.beta << ',' << r.tau << ','
       << r.gamma << ',' << r.k;
    for (Eigen::Index j = 0; j < r.x_cf.size(); ++j) {
        os << ',' << r.x_cf(j);
    }
    os << '\n';
    std::cout << os.str();
    if (!args.csv.empty()) {
        std::ofstream out(args.csv);
        if (!out) {
            throw InvalidArgument("cannot write '" + args.csv + "'");
        }
        out << os.str();
    }
    return 0;
}

int cmd_benchmark(const ExperimentConfig& cfg) {
    const Experiment exp = build_experiment(cfg);
    const BenchmarkOutput out =
        run_benchmark(cfg, exp, build_plausibility(cfg, exp, cfg.plausibility.kind));
    save_benchmark(cfg.out_dir, out);
    write_config_copy(cfg);
    write_report_header(std::cout);
    write_report_row(std::cout, out.report);
    return 0;
}

int cmd_robustness(const ExperimentConfig& cfg) {
    const Experiment exp = build_experiment(cfg);
    const RobustnessOutput out = run_robustness(cfg, exp);
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream csv(std::filesystem::path(cfg.out_dir) / "robustness.csv");
    write_robustness_csv(csv, out);
    if (cfg.robustness_instances) {
        std::ofstream inst(std::filesystem::path(cfg.out_dir) / "robustness_instances.csv");
        write_robustness_instances_csv(inst, out);
    }
    write_config_copy(cfg);
    write_robustness_csv(std::cout, out);
    return 0;
}

int cmd_demo(const ExperimentConfig& cfg) {
    const Experiment exp = build_experiment(cfg);
    const DemoOutput out =
        run_synth_demo(cfg, exp, build_plausibility(cfg, exp, cfg.plausibility.kind));
    save_demo(cfg.out_dir, out);
    write_config_copy(cfg);
    std::size_t valid = 0;
    for (const auto& r : out.results) {
        valid += r.valid ? 1 : 0;
    }
    std::cout << "demo: " << out.trajectories.size() << " trajectories of "
              << cfg.solver.iterations + 1 << " points, " << valid << " valid; wrote "
              << cfg.out_dir << "/{trajectory.csv,trajectory_baseline.csv,boundary.csv}\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse, plausible counterfactual explanations via accelerated proximal gradient."};
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string config_path;
    ConfigValues overrides;
    app.add_option("--config", config_path, "key=value config file");
    for (const auto& key : config_keys()) {
        const std::string name = key.name;
        app.add_option_function<std::string>(
            "--" + name, [&overrides, name](const std::string& v) { overrides[name] = v; },
            key.help);
    }

    ExplainArgs explain_args;
    auto* train = app.add_subcommand("train", "train the classifier and save out_dir/model.txt");
    auto* explain = app.add_subcommand("explain", "counterfactual for one point");
    explain->add_option("--index", explain_args.index, "row of the held-out test set");
    explain->add_option("--input-row", explain_args.input_row,
                        "comma-separated raw feature values (dataset units)");
    explain->add_option("--csv", explain_args.csv, "also write the result row to this file");
    auto* benchmark = app.add_subcommand("benchmark", "metrics over the test set");
    auto* robustness = app.add_subcommand("robustness", "CFE shift under input perturbations");
    auto* demo = app.add_subcommand("demo", "2-D iterate trajectories for plotting");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kInputError;
    }

    try {
        if (!config_path.empty() && !std::filesystem::is_regular_file(config_path)) {
            throw InvalidArgument("config file not found: '" + config_path + "'");
        }
        ConfigValues values = config_path.empty() ? ConfigValues{} : load_config_file(config_path);
        for (const auto& [k, v] : overrides) {
            values[k] = v;
        }
        if (values.find("out_dir") == values.end()) {
            if (const char* env = std::getenv("SCFE_OUT_DIR"); env != nullptr && *env != '\0') {
                values["out_dir"] = env;
            }
        }
        const ExperimentConfig cfg = make_experiment_config(values);
        validate_paths(cfg);

        if (train->parsed()) {
            return cmd_train(cfg);
        }
        if (explain->parsed()) {
            return cmd_explain(cfg, explain_args);
        }
        if (benchmark->parsed()) {
            return cmd_benchmark(cfg);
        }
        if (robustness->parsed()) {
            return cmd_robustness(cfg);
        }
        if (demo->parsed()) {
            return cmd_demo(cfg);
        }
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kRuntimeError;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kInputError;
}
