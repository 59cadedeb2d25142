#pragma once

#include <stdexcept>
#include <string>

#include "gradova/experiments.hpp"
#include "json.hpp"

namespace gradova::cli {

// Configuration problems exit with status 2; the message names the key.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CliConfig {
    uint64_t seed = 7;
    std::string output_dir = "out";
    eval::ExperimentSpec spec;
    int n_runs = 1;
    std::vector<int> batch_sizes = {8, 32, 128};
    eval::OneClassOptions one_class;
};

// Parses a config document; every omitted key takes its documented default.
// Unknown keys are rejected with their full path.
CliConfig parse_config(const nlohmann::json& j);
CliConfig load_config_file(const std::string& path);

// The fully resolved configuration, re-readable as a config.
nlohmann::json config_to_json(const CliConfig& cfg);

// Standalone dataset spec for gen-data: a dataset object plus optional
// "seed" and "test_samples_per_class".
struct GenDataSpec {
    data::SourceSpec idd;
    data::SourceSpec ood;
    bool ood_share_layout = true;
    uint64_t seed = 7;
    int test_samples_per_class = 0;  // 0: same as samples_per_class
};
GenDataSpec parse_gen_data_spec(const nlohmann::json& j);
nlohmann::json gen_data_spec_to_json(const GenDataSpec& spec);

nlohmann::json parse_json_file(const std::string& path);

}  // namespace gradova::cli
