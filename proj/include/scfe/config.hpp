#pragma once

// Line-oriented key=value configuration for the command-line tool. Sections
// are dotted key prefixes; '#' starts a comment line.

#include "scfe/harness.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace scfe {

struct ConfigKey {
    std::string name;
    std::string help;
};

/// Every recognised key, in documentation order.
const std::vector<ConfigKey>& config_keys();
bool is_config_key(const std::string& name);

using ConfigValues = std::map<std::string, std::string>;

/// Unknown keys, malformed lines and repeated keys are ParseErrors naming the line.
ConfigValues parse_config(std::istream& in, const std::string& source);
ConfigValues load_config_file(const std::string& path);

/// Applies `values` over the defaults. Bad values are InvalidArguments naming the key.
ExperimentConfig make_experiment_config(const ConfigValues& values);

/// Checks referenced input files before any work starts.
void validate_paths(const ExperimentConfig& cfg);

/// key=value lines for every key, reflecting `cfg`.
std::string describe_config(const ExperimentConfig& cfg);

} // namespace scfe
