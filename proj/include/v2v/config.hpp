#pragma once

#include <string>

#include "v2v/domain.hpp"
#include "v2v/learner.hpp"
#include "v2v/rewards.hpp"

namespace v2v::config {

// Resolved run configuration: simulation, valuation model, reward
// weights and learner hyperparameters. Every field has a default and can
// be overridden from a JSON config file (see docs/config.md).
struct ProjectConfig {
  SimConfig sim;
  ValuationParams valuation;
  rewards::RewardWeights rewards;
  learner::LearnerConfig learner;
};

// Loads a JSON config file and merges it over the defaults. Unknown keys
// are rejected so typos fail loudly.
ProjectConfig load_file(const std::string& path);

ProjectConfig from_json_text(const std::string& text);

// Full resolved config as JSON text, used for run metadata.
std::string to_json_text(const ProjectConfig& cfg);

}  // namespace v2v::config
