#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "scfe/config.hpp"
#include "scfe/error.hpp"

#include <filesystem>
#include <functional>
#include <set>
#include <fstream>
#include <sstream>

using namespace scfe;

namespace {

ConfigValues parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in, "test.cfg");
}

template <class E>
std::string message_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const E& e) {
        return e.what();
    }
    return "<no throw>";
}

ExperimentConfig from_text(const std::string& text) { return make_experiment_config(parse(text)); }

} // namespace

TEST_CASE("parser: comments, blanks, whitespace around '='") {
    const auto v = parse("# header\n\n  seed = 7  \nsolver.m=3\n\tdataset.source =  synthetic\n");
    CHECK(v.size() == 3);
    CHECK(v.at("seed") == "7");
    CHECK(v.at("solver.m") == "3");
    CHECK(v.at("dataset.source") == "synthetic");
}

TEST_CASE("parser: errors name the source line") {
    CHECK(message_of<ParseError>([] { parse("seed = 1\nbogus.key = 2\n"); }) ==
          "test.cfg:2: unknown key 'bogus.key'");
    CHECK(message_of<ParseError>([] { parse("seed 1\n"); }) ==
          "test.cfg:1: expected key = value, got 'seed 1'");
    CHECK(message_of<ParseError>([] { parse("seed = 1\n# c\nseed = 2\n"); }) ==
          "test.cfg:3: key 'seed' set twice");
}

TEST_CASE("every documented key is recognised exactly once") {
    std::set<std::string> seen;
    for (const auto& k : config_keys()) {
        CHECK(is_config_key(k.name));
        CHECK_FALSE(k.help.empty());
        CHECK(seen.insert(k.name).second);
    }
    CHECK_FALSE(is_config_key("solver"));
    CHECK_FALSE(is_config_key(""));
}

TEST_CASE("values land on the experiment config") {
    const auto cfg = from_text("seed = 11\njobs = 3\nclassifier.kind = linear\n"
                               "classifier.epochs = 9\nplausibility.kind = gmm\n"
                               "solver.m = 2\nsolver.sparsity = constraint\n"
                               "search.tau_grid = 0.1, 0.5,2\ndataset.immutable = 1,0\n"
                               "robustness.instances = yes\n");
    CHECK(cfg.seed == 11);
    CHECK(cfg.jobs == 3);
    CHECK(cfg.classifier.kind == "linear");
    CHECK(cfg.classifier.train.epochs == 9);
    CHECK(cfg.plausibility.kind == PlausibilityKind::gmm);
    REQUIRE(std::holds_alternative<ConstraintMode>(cfg.solver.sparsity));
    CHECK(std::get<ConstraintMode>(cfg.solver.sparsity).m == 2);
    CHECK(cfg.search.tau_grid == std::vector<double>{0.1, 0.5, 2.0});
    CHECK(cfg.robustness_instances);
}

TEST_CASE("penalty modes reject a feature budget") {
    const auto cfg = from_text("solver.sparsity = l_half\n");
    REQUIRE(std::holds_alternative<PenaltyMode>(cfg.solver.sparsity));
    CHECK(std::get<PenaltyMode>(cfg.solver.sparsity).norm == PenaltyNorm::l_half);
    CHECK_THROWS_AS(from_text("solver.sparsity = l1\nsolver.m = 2\n"), InvalidArgument);
}

TEST_CASE("bad values are InvalidArguments naming the key") {
    CHECK(message_of<InvalidArgument>([] { from_text("seed = -1\n"); }).find("'seed'") !=
          std::string::npos);
    CHECK(message_of<InvalidArgument>([] { from_text("solver.step0 = fast\n"); })
              .find("'solver.step0'") != std::string::npos);
    CHECK_THROWS_AS(from_text("solver.init = random\n"), InvalidArgument);
    CHECK_THROWS_AS(from_text("plausibility.kind = parzen\n"), InvalidArgument);
    CHECK_THROWS_AS(from_text("timing = maybe\n"), InvalidArgument);
    CHECK_THROWS_AS(from_text("search.gamma_steps = 0\n"), InvalidArgument);
    CHECK_THROWS_AS(from_text("search.tau_grid = 1,,2\n"), InvalidArgument);
    CHECK_THROWS_AS(from_text("search.tau_grid = 2,1\n"), InvalidArgument);
    CHECK_THROWS_AS(make_experiment_config({{"not.a.key", "1"}}), InvalidArgument);
}

TEST_CASE("describe_config round-trips") {
    for (const char* text : {"", "solver.sparsity = l0\nsearch.beta_grid = 0.1,1\n",
                             "dataset.source = data/x.csv\ndataset.pca_dims = 4\nsolver.m = 3\n"
                             "search.tau_grid_knn = 5\ntarget = fixed:2\n"}) {
        const auto cfg = from_text(text);
        const std::string once = describe_config(cfg);
        const std::string twice = describe_config(from_text(once));
        CHECK(once == twice);
        CHECK(parse(once).size() == config_keys().size());
    }
}

TEST_CASE("validate_paths checks inputs before work starts") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "scfe_test_config";
    fs::create_directories(dir);
    std::ofstream(dir / "plain.txt") << "x";

    ExperimentConfig cfg;
    cfg.dataset.source = "synthetic";
    CHECK_NOTHROW(validate_paths(cfg));
    cfg.dataset.source = (dir / "missing.csv").string();
    CHECK(message_of<InvalidArgument>([&] { validate_paths(cfg); }).find("missing.csv") !=
          std::string::npos);
    cfg.dataset.source = "synthetic";
    cfg.classifier.model_path = (dir / "nope.txt").string();
    CHECK_THROWS_AS(validate_paths(cfg), InvalidArgument);
    cfg.classifier.model_path.clear();
    cfg.out_dir = (dir / "plain.txt").string();
    CHECK_THROWS_AS(validate_paths(cfg), InvalidArgument);
    fs::remove_all(dir);
}

TEST_CASE("missing config file") {
    CHECK_THROWS_AS(load_config_file("/nonexistent/scfe.cfg"), InvalidArgument);
}
