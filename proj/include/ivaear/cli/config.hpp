#pragma once

#include "ivaear/auxdata/auxiliary.hpp"
#include "ivaear/field/latent.hpp"
#include "ivaear/model/ivaear.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ivaear::cli {

using Index = Eigen::Index;

/// Everything a command needs besides its input files. Text form is one
/// `key=value` per line with dotted keys; `#` starts a comment. Lists are
/// comma separated.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  field::SimulationSpec simulation;
  auxdata::AuxiliarySpec auxiliary;
  model::TrainingConfig training;
  Index latent_dim = 0;  // 0: use simulation.P
  std::vector<Index> sweep_dims{2, 3, 4, 5, 6};
  double eval_period = 365;
  Index forecast_horizon = 10;
  std::string forecast_mode = "mean";
  Index holdout = 0;  // time points held out at the end of each series
  std::string output_dir = "out";
  Index replicate_count = 5;

  Index model_latent_dim() const { return latent_dim > 0 ? latent_dim : simulation.P; }
  void validate() const;
  bool operator==(const ExperimentConfig& o) const;
};

ExperimentConfig default_config();

/// Sets one key. Unknown keys and malformed values throw ConfigError.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Applies every `key=value` line of `text` on top of `cfg`.
void apply_text(ExperimentConfig& cfg, const std::string& text, const std::string& source = "<config>");
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Every key, in a fixed order; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

/// Simulation spec with its seed taken from the base seed's "simulate" stream.
field::SimulationSpec simulation_spec(const ExperimentConfig& cfg);
model::TrainingConfig training_config(const ExperimentConfig& cfg);

}  // namespace ivaear::cli
