#pragma once

#include "ivaear/cli/config.hpp"
#include "ivaear/eval/metrics.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ivaear::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2, kPartialFailure = 3 };

/// Maps a library exception to the documented exit code.
int exit_code_for(const std::exception& e);

/// Writes data.csv and meta.json into cfg.output_dir.
void cmd_simulate(const ExperimentConfig& cfg);

/// Trains on the rows of `data_path` with t <= max − cfg.holdout; writes
/// model.ckpt and elbo.csv. Auxiliary time range comes from the whole file.
void cmd_train(const ExperimentConfig& cfg, const std::string& data_path, std::ostream* log = nullptr);

/// Writes report.txt and report.csv; data must carry z columns.
eval::EvalReport cmd_evaluate(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                              const std::string& data_path);

struct ReplicateRow {
  Index replicate = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  double mcc = 0;
  double final_elbo = 0;
  std::string error;
};

/// Simulate, train and evaluate for seeds base..base+count−1 on `threads`
/// workers; writes replicates.csv and summary.txt.
std::vector<ReplicateRow> cmd_replicate(const ExperimentConfig& cfg, int threads);

/// Writes sweep.csv (latent_dim, final_elbo) and knee.txt.
model::SweepResult cmd_sweep(const ExperimentConfig& cfg, const std::string& data_path);

struct ForecastMetrics {
  bool has_truth = false;
  double mse = 0, wmse = 0;
  double persistence_mse = 0, persistence_wmse = 0;
};

/// Forecasts cfg.forecast_horizon steps past the history (the file minus
/// cfg.holdout trailing time points). Truth comes from `truth_path` when
/// given, else from the held-out rows. Writes forecast.csv, persistence.csv
/// and metrics.txt.
ForecastMetrics cmd_forecast(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                             const std::string& data_path, const std::optional<std::string>& truth_path,
                             std::ostream* log = nullptr);

/// Full command line entry point; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ivaear::cli
