#pragma once

#include <string>

#include "dgmn/model.hpp"
#include "dgmn/train.hpp"

namespace dgmn {

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
};

// flat key=value text with [pipeline], [model] and [train] sections
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string serialize_run_config(const RunConfig& cfg);

// key is "section.key", e.g. "train.learning_rate"
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace dgmn
