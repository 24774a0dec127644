#include "ivaear/cli/commands.hpp"

#include "ivaear/data/dataset.hpp"
#include "ivaear/error.hpp"
#include "ivaear/field/simulate.hpp"
#include "ivaear/forecast/forecast.hpp"
#include "ivaear/model/checkpoint.hpp"
#include "ivaear/rng.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace ivaear::cli {

namespace fs = std::filesystem;
using data::format_double;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InvalidArgument*>(&e) ||
      dynamic_cast<const ShapeError*>(&e) || dynamic_cast<const CheckpointFormatError*>(&e) ||
      dynamic_cast<const DegenerateColumn*>(&e) || dynamic_cast<const DegenerateDesign*>(&e)) {
    return kValidation;
  }
  return kRuntime;
}

namespace {

fs::path out_dir(const ExperimentConfig& cfg) {
  fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.output_dir + "': " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}


void check_dims(const ExperimentConfig& cfg, const data::SpatioTemporalDataset& d) {
  if (d.observed_dim() != cfg.simulation.S) {
    throw ConfigError("config-data mismatch: data has " + std::to_string(d.observed_dim()) +
                      " observed columns (x1..x" + std::to_string(d.observed_dim()) + ") but simulation.S=" +
                      std::to_string(cfg.simulation.S));
  }
}

data::SpatioTemporalDataset training_rows(const data::SpatioTemporalDataset& d, Index holdout) {
  if (holdout == 0) return d;
  const auto cut = d.max_time() - holdout;
  auto head = data::head_until(d, cut);
  if (head.rows() == 0) throw InvalidArgument("holdout of " + std::to_string(holdout) + " leaves no rows");
  return head;
}

struct Trained {
  model::TrainResult result;
  auxdata::AuxiliarySpec spec;
};

Trained train_on(const ExperimentConfig& cfg, const data::SpatioTemporalDataset& full, std::ostream* log) {
  // Node range from the training rows: nodes inside a held-out window would
  // get near-zero training variance and explode after standardization.
  const auto train_data = training_rows(full, cfg.holdout);
  const auto spec = auxdata::resolve_time_range(cfg.auxiliary, train_data.times);
  const auto aux = auxdata::build_auxiliary(spec, train_data.coords, train_data.times);
  auto tc = training_config(cfg);
  if (log) {
    tc.on_epoch = [log, &tc](int epoch, double elbo) {
      *log << "epoch " << epoch << "/" << tc.epochs << " mean ELBO " << format_double(elbo) << '\n';
    };
  }
  const auto idx = data::index_locations(train_data);
  for (const auto& rows : idx.rows_by_location) {
    if (static_cast<Index>(rows.size()) <= tc.W) {
      throw InvalidArgument("every location needs more than W=" + std::to_string(tc.W) +
                            " time points for lagged training; found a location with " +
                            std::to_string(rows.size()));
    }
  }
  Trained t{model::fit(train_data, aux, cfg.model_latent_dim(), tc), spec};
  t.result.model.aux_spec = spec;
  return t;
}

std::string elbo_csv(const std::vector<double>& trace) {
  std::string s = "epoch,mean_elbo\n";
  for (std::size_t i = 0; i < trace.size(); ++i) s += std::to_string(i + 1) + "," + format_double(trace[i]) + "\n";
  return s;
}

eval::EvalReport evaluate_model(const ExperimentConfig& cfg, const model::IVaeArModel& m,
                                const data::SpatioTemporalDataset& d) {
  if (!d.z) throw InvalidArgument("evaluate: data has no latent columns (z1..zP)");
  if (!m.aux_spec) throw InvalidArgument("evaluate: checkpoint carries no auxiliary spec");
  if (d.latent_dim() != m.dims.P) {
    throw InvalidArgument("evaluate: data has " + std::to_string(d.latent_dim()) + " latent columns but the model has P=" +
                          std::to_string(m.dims.P));
  }
  const auto aux = auxdata::build_auxiliary(*m.aux_spec, d.coords, d.times);
  const auto z = model::extract_latents(m, d, aux);
  eval::EvalReport r;
  r.seed = cfg.seed;
  r.omega = eval::correlation_matrix(*d.z, z);
  const auto res = eval::mcc(r.omega);
  r.mcc = res.value;
  r.permutation = res.permutation;
  const auto recon = model::decode(m, z);
  std::vector<double> t(d.times.begin(), d.times.end());
  r.per_variable_mse = eval::per_variable_mse(d.x, recon);
  r.wmse = eval::wmse(d.x, recon, eval::deseasonalized_variances(d.x, t, cfg.eval_period));
  return r;
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

void cmd_simulate(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto spec = simulation_spec(cfg);
  const auto sim = field::simulate_dataset(spec);
  const auto dir = out_dir(cfg);
  data::write_csv((dir / "data.csv").string(), sim.dataset);
  auto meta = field::simulation_meta_json(spec, sim);
  write_text(dir / "meta.json", meta);
}

void cmd_train(const ExperimentConfig& cfg, const std::string& data_path, std::ostream* log) {
  cfg.validate();
  const auto full = data::read_csv(data_path);
  check_dims(cfg, full);
  const auto t = train_on(cfg, full, log);
  const auto dir = out_dir(cfg);
  model::checkpoint_save(t.result.model, (dir / "model.ckpt").string());
  write_text(dir / "elbo.csv", elbo_csv(t.result.elbo_trace));
}

eval::EvalReport cmd_evaluate(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                              const std::string& data_path) {
  cfg.validate();
  const auto m = model::checkpoint_load(checkpoint_path);
  const auto d = data::read_csv(data_path);
  auto r = evaluate_model(cfg, m, d);
  const auto dir = out_dir(cfg);
  write_text(dir / "report.txt", r.to_text());
  write_text(dir / "report.csv", r.csv_header() + "\n" + r.csv_row() + "\n");
  return r;
}

std::vector<ReplicateRow> cmd_replicate(const ExperimentConfig& cfg, int threads) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(cfg.replicate_count);
  std::vector<ReplicateRow> rows(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      ReplicateRow& row = rows[i];
      row.replicate = static_cast<Index>(i + 1);
      row.seed = cfg.seed + i;
      try {
        ExperimentConfig c = cfg;
        c.seed = row.seed;
        c.holdout = 0;
        const auto sim = field::simulate_dataset(simulation_spec(c));
        const auto t = train_on(c, sim.dataset, nullptr);
        const auto rep = evaluate_model(c, t.result.model, sim.dataset);
        row.mcc = rep.mcc;
        row.final_elbo = t.result.elbo_trace.back();
        row.ok = true;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  };
  const int nthreads = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int k = 1; k < nthreads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::string csv = "replicate,seed,status,mcc,final_elbo,error\n";
  std::vector<double> mccs;
  std::string seeds;
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    csv += std::to_string(r.replicate) + "," + std::to_string(r.seed) + "," + (r.ok ? "ok" : "failed") + "," +
           (r.ok ? format_double(r.mcc) : "") + "," + (r.ok ? format_double(r.final_elbo) : "") + "," + err + "\n";
    if (r.ok) {
      mccs.push_back(r.mcc);
      seeds += (seeds.empty() ? "" : " ") + std::to_string(r.seed);
    }
  }
  std::string summary = "replicates=" + std::to_string(n) + "\nsucceeded=" + std::to_string(mccs.size()) + "\n";
  if (!mccs.empty()) {
    const double q1 = quantile(mccs, 0.25), med = quantile(mccs, 0.5), q3 = quantile(mccs, 0.75);
    csv += "summary,,," + format_double(med) + ",,median mcc; q1=" + format_double(q1) + " q3=" + format_double(q3) + "\n";
    summary += "mcc_median=" + format_double(med) + "\nmcc_q1=" + format_double(q1) + "\nmcc_q3=" + format_double(q3) +
               "\nseeds=" + seeds + "\n";
  }
  const auto dir = out_dir(cfg);
  write_text(dir / "replicates.csv", csv);
  write_text(dir / "summary.txt", summary);
  return rows;
}

model::SweepResult cmd_sweep(const ExperimentConfig& cfg, const std::string& data_path) {
  cfg.validate();
  const auto full = data::read_csv(data_path);
  check_dims(cfg, full);
  const auto train_data = training_rows(full, cfg.holdout);
  const auto spec = auxdata::resolve_time_range(cfg.auxiliary, train_data.times);
  const auto aux = auxdata::build_auxiliary(spec, train_data.coords, train_data.times);
  const auto res = model::dimension_sweep(train_data, aux, cfg.sweep_dims, training_config(cfg));
  std::string csv = "latent_dim,final_elbo\n";
  for (std::size_t i = 0; i < res.latent_dims.size(); ++i) {
    csv += std::to_string(res.latent_dims[i]) + "," + format_double(res.final_elbo[i]) + "\n";
  }
  const auto dir = out_dir(cfg);
  write_text(dir / "sweep.csv", csv);
  write_text(dir / "knee.txt", "knee=" + (res.knee ? std::to_string(*res.knee) : std::string("none")) + "\n");
  return res;
}

ForecastMetrics cmd_forecast(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                             const std::string& data_path, const std::optional<std::string>& truth_path,
                             std::ostream* log) {
  cfg.validate();
  const auto m = model::checkpoint_load(checkpoint_path);
  const auto full = data::read_csv(data_path);
  const auto history = training_rows(full, cfg.holdout);
  if (history.observed_dim() != m.dims.S) {
    throw InvalidArgument("forecast: data has " + std::to_string(history.observed_dim()) +
                          " observed columns but the model has S=" + std::to_string(m.dims.S));
  }
  const auto mode = cfg.forecast_mode == "sampled" ? forecast::ForecastMode::Sampled : forecast::ForecastMode::Mean;
  const auto req = forecast::make_request(m, history, cfg.forecast_horizon, mode, derive_seed(cfg.seed, "forecast"));
  const auto pred = forecast::forecast(m, req).predictions;
  const auto base = forecast::persistence_baseline(history, cfg.forecast_horizon);

  const auto dir = out_dir(cfg);
  data::write_csv((dir / "forecast.csv").string(), pred);
  data::write_csv((dir / "persistence.csv").string(), base);

  ForecastMetrics fm;
  std::optional<Eigen::MatrixXd> truth;
  if (truth_path) {
    truth = forecast::align_truth(pred, data::read_csv(*truth_path));
  } else if (cfg.holdout > 0) {
    truth = forecast::align_truth(pred, full);
  }
  std::string text = "horizon=" + std::to_string(cfg.forecast_horizon) + "\nmode=" + cfg.forecast_mode + "\n";
  if (truth) {
    std::vector<double> t(history.times.begin(), history.times.end());
    const auto var = eval::deseasonalized_variances(history.x, t, cfg.eval_period);
    fm.has_truth = true;
    fm.mse = eval::per_variable_mse(*truth, pred.x).mean();
    fm.wmse = eval::wmse(*truth, pred.x, var);
    fm.persistence_mse = eval::per_variable_mse(*truth, base.x).mean();
    fm.persistence_wmse = eval::wmse(*truth, base.x, var);
    text += "mse=" + format_double(fm.mse) + "\nwmse=" + format_double(fm.wmse) +
            "\npersistence_mse=" + format_double(fm.persistence_mse) +
            "\npersistence_wmse=" + format_double(fm.persistence_wmse) + "\n";
  } else {
    const std::string notice = "metrics skipped: horizon rows absent from the truth data";
    text += "notice=" + notice + "\n";
    if (log) *log << notice << '\n';
  }
  write_text(dir / "metrics.txt", text);
  return fm;
}

namespace {

int threads_from_env() {
  const char* v = std::getenv("IVAEAR_THREADS");
  if (!v || !*v) return 1;
  try {
    return std::max(1, std::stoi(v));
  } catch (const std::exception&) {
    throw ConfigError(std::string("IVAEAR_THREADS must be a positive integer, got '") + v + "'");
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Identifiable autoregressive VAE for spatio-temporal blind source separation", "ivaear"};
  app.require_subcommand(1);

  std::string config_path, out_path, data_path, checkpoint_path, truth_path;
  std::uint64_t seed = 0;
  std::vector<std::string> sets;
  std::string aux_kind, H, G;
  Index W = -1, horizon = 0, holdout = -1;
  bool verbose = false;

  auto common = [&](CLI::App* c) {
    c->add_option("--config", config_path, "key=value config file");
    c->add_option("--seed", seed, "base seed");
    c->add_option("--out", out_path, "output directory");
    c->add_option("--set", sets, "override one config key, e.g. training.epochs=10");
  };
  auto training_flags = [&](CLI::App* c) {
    c->add_option("--aux", aux_kind, "auxiliary kind: rbf, segmentation or seasonal-rbf");
    c->add_option("--H", H, "spatial resolution levels, e.g. 2,9");
    c->add_option("--G", G, "temporal resolution levels, e.g. 9,17,37");
    c->add_option("--W", W, "model AR order (0 = plain iVAE)");
    c->add_option("--holdout", holdout, "trailing time points excluded from training");
    c->add_flag("--verbose", verbose, "print per-epoch ELBO");
  };

  auto* sim = app.add_subcommand("simulate", "simulate a dataset (data.csv, meta.json)");
  common(sim);
  auto* train = app.add_subcommand("train", "train a model (model.ckpt, elbo.csv)");
  common(train);
  training_flags(train);
  train->add_option("--data", data_path, "dataset CSV")->required();
  auto* evaluate = app.add_subcommand("evaluate", "score recovered latents (report.txt, report.csv)");
  common(evaluate);
  evaluate->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  evaluate->add_option("--data", data_path, "dataset CSV with z columns")->required();
  auto* replicate = app.add_subcommand("replicate", "simulate, train and evaluate over consecutive seeds");
  common(replicate);
  training_flags(replicate);
  auto* sweep = app.add_subcommand("sweep", "train one model per latent dimension and locate the knee");
  common(sweep);
  training_flags(sweep);
  sweep->add_option("--data", data_path, "dataset CSV")->required();
  auto* fc = app.add_subcommand("forecast", "forecast future observations and compare with persistence");
  common(fc);
  fc->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  fc->add_option("--data", data_path, "dataset CSV (history)")->required();
  fc->add_option("--horizon", horizon, "forecast steps");
  fc->add_option("--holdout", holdout, "trailing time points treated as unseen truth");
  fc->add_option("--truth", truth_path, "CSV holding the true future rows");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }

  try {
    ExperimentConfig cfg = config_path.empty() ? default_config() : load_config(config_path);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    auto* sub = app.get_subcommands().front();
    if (sub->count("--seed")) cfg.seed = seed;
    if (!out_path.empty()) cfg.output_dir = out_path;
    if (!aux_kind.empty()) apply_setting(cfg, "auxiliary.kind", aux_kind);
    if (!H.empty()) apply_setting(cfg, "auxiliary.H", H);
    if (!G.empty()) apply_setting(cfg, "auxiliary.G", G);
    if (W >= 0) cfg.training.W = W;
    if (holdout >= 0) cfg.holdout = holdout;
    if (horizon > 0) cfg.forecast_horizon = horizon;
    cfg.validate();

    std::ostream* log = verbose ? &err : nullptr;
    if (sub == sim) {
      cmd_simulate(cfg);
      out << "wrote " << (fs::path(cfg.output_dir) / "data.csv").string() << '\n';
    } else if (sub == train) {
      cmd_train(cfg, data_path, log);
      out << "wrote " << (fs::path(cfg.output_dir) / "model.ckpt").string() << '\n';
    } else if (sub == evaluate) {
      const auto r = cmd_evaluate(cfg, checkpoint_path, data_path);
      out << "mcc=" << format_double(r.mcc) << '\n';
    } else if (sub == replicate) {
      const auto rows = cmd_replicate(cfg, threads_from_env());
      std::vector<double> mccs;
      std::string seeds;
      std::size_t failed = 0;
      for (const auto& r : rows) {
        if (r.ok) {
          mccs.push_back(r.mcc);
          seeds += (seeds.empty() ? "" : ",") + std::to_string(r.seed);
        } else {
          ++failed;
          err << "replicate " << r.replicate << " (seed " << r.seed << ") failed: " << r.error << '\n';
        }
      }
      if (!mccs.empty()) out << "median mcc=" << format_double(quantile(mccs, 0.5)) << " seeds=" << seeds << '\n';
      if (failed > 0) return kPartialFailure;
    } else if (sub == sweep) {
      const auto r = cmd_sweep(cfg, data_path);
      out << "knee=" << (r.knee ? std::to_string(*r.knee) : std::string("none")) << '\n';
    } else if (sub == fc) {
      const auto m = cmd_forecast(cfg, checkpoint_path, data_path,
                                  truth_path.empty() ? std::nullopt : std::optional<std::string>(truth_path), &err);
      if (m.has_truth) {
        out << "wmse=" << format_double(m.wmse) << " persistence_wmse=" << format_double(m.persistence_wmse) << '\n';
      }
    }
    return kOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace ivaear::cli
