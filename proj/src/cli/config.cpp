#include "ivaear/cli/config.hpp"

#include "ivaear/data/dataset.hpp"
#include "ivaear/error.hpp"
#include "ivaear/rng.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace ivaear::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  T out{};
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as a number");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& raw) {
  std::vector<T> out;
  const std::string v = trim(raw);
  if (v.empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, item));
  return out;
}

template <class T>
std::string list(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    if constexpr (std::is_floating_point_v<T>) {
      s += data::format_double(v[i]);
    } else {
      s += std::to_string(v[i]);
    }
  }
  return s;
}

std::string num(double v) { return data::format_double(v); }

struct Key {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

std::vector<double> ranges(const std::vector<field::MaternParams>& v) {
  std::vector<double> out;
  for (const auto& p : v) out.push_back(p.range);
  return out;
}

std::vector<double> shapes(const std::vector<field::MaternParams>& v) {
  std::vector<double> out;
  for (const auto& p : v) out.push_back(p.shape);
  return out;
}

void set_matern(std::vector<field::MaternParams>& v, const std::vector<double>& vals, bool range,
                const std::string& key) {
  if (vals.size() != v.size()) {
    v.resize(vals.size(), field::MaternParams{1.0, 1.0});
  }
  for (std::size_t i = 0; i < vals.size(); ++i) {
    (range ? v[i].range : v[i].shape) = vals[i];
  }
  if (vals.empty()) throw ConfigError("config key '" + key + "': list must not be empty");
}

// Ordered key table; serialization follows this order.
const std::vector<std::pair<std::string, Key>>& keys() {
  using C = ExperimentConfig;
  using S = std::string;
  static const std::vector<std::pair<std::string, Key>> table = {
      {"seed", {[](C& c, const S& v) { c.seed = parse_number<std::uint64_t>("seed", v); },
                [](const C& c) { return std::to_string(c.seed); }}},
      {"output.dir", {[](C& c, const S& v) { c.output_dir = trim(v); }, [](const C& c) { return c.output_dir; }}},
      {"simulation.setting", {[](C& c, const S& v) { c.simulation.setting = parse_number<int>("simulation.setting", v); },
                              [](const C& c) { return std::to_string(c.simulation.setting); }}},
      {"simulation.P", {[](C& c, const S& v) { c.simulation.P = parse_number<Index>("simulation.P", v); },
                        [](const C& c) { return std::to_string(c.simulation.P); }}},
      {"simulation.S", {[](C& c, const S& v) { c.simulation.S = parse_number<Index>("simulation.S", v); },
                        [](const C& c) { return std::to_string(c.simulation.S); }}},
      {"simulation.n_s", {[](C& c, const S& v) { c.simulation.n_s = parse_number<Index>("simulation.n_s", v); },
                          [](const C& c) { return std::to_string(c.simulation.n_s); }}},
      {"simulation.n_t", {[](C& c, const S& v) { c.simulation.n_t = parse_number<Index>("simulation.n_t", v); },
                          [](const C& c) { return std::to_string(c.simulation.n_t); }}},
      {"simulation.R", {[](C& c, const S& v) { c.simulation.R = parse_number<Index>("simulation.R", v); },
                        [](const C& c) { return std::to_string(c.simulation.R); }}},
      {"simulation.L", {[](C& c, const S& v) { c.simulation.L = parse_number<Index>("simulation.L", v); },
                        [](const C& c) { return std::to_string(c.simulation.L); }}},
      {"simulation.burn_in", {[](C& c, const S& v) { c.simulation.burn_in = parse_number<Index>("simulation.burn_in", v); },
                              [](const C& c) { return std::to_string(c.simulation.burn_in); }}},
      {"simulation.sigma_low", {[](C& c, const S& v) { c.simulation.sigma_low = parse_number<double>("simulation.sigma_low", v); },
                                [](const C& c) { return num(c.simulation.sigma_low); }}},
      {"simulation.sigma_high", {[](C& c, const S& v) { c.simulation.sigma_high = parse_number<double>("simulation.sigma_high", v); },
                                 [](const C& c) { return num(c.simulation.sigma_high); }}},
      {"simulation.matern_range",
       {[](C& c, const S& v) { set_matern(c.simulation.matern_params, parse_list<double>("simulation.matern_range", v), true, "simulation.matern_range"); },
        [](const C& c) { return list(ranges(c.simulation.matern_params)); }}},
      {"simulation.matern_shape",
       {[](C& c, const S& v) { set_matern(c.simulation.matern_params, parse_list<double>("simulation.matern_shape", v), false, "simulation.matern_shape"); },
        [](const C& c) { return list(shapes(c.simulation.matern_params)); }}},
      {"simulation.shift_range",
       {[](C& c, const S& v) { set_matern(c.simulation.shift_params, parse_list<double>("simulation.shift_range", v), true, "simulation.shift_range"); },
        [](const C& c) { return list(ranges(c.simulation.shift_params)); }}},
      {"simulation.shift_shape",
       {[](C& c, const S& v) { set_matern(c.simulation.shift_params, parse_list<double>("simulation.shift_shape", v), false, "simulation.shift_shape"); },
        [](const C& c) { return list(shapes(c.simulation.shift_params)); }}},
      {"auxiliary.kind", {[](C& c, const S& v) {
                            try {
                              c.auxiliary.kind = auxdata::aux_kind_from_string(trim(v));
                            } catch (const InvalidArgument& e) {
                              throw ConfigError(std::string("config key 'auxiliary.kind': ") + e.what());
                            }
                          },
                          [](const C& c) { return std::string(auxdata::to_string(c.auxiliary.kind)); }}},
      {"auxiliary.H", {[](C& c, const S& v) { c.auxiliary.spatial_levels = parse_list<Index>("auxiliary.H", v); },
                       [](const C& c) { return list(c.auxiliary.spatial_levels); }}},
      {"auxiliary.G", {[](C& c, const S& v) { c.auxiliary.temporal_levels = parse_list<Index>("auxiliary.G", v); },
                       [](const C& c) { return list(c.auxiliary.temporal_levels); }}},
      {"auxiliary.grid", {[](C& c, const S& v) { c.auxiliary.spatial_grid = parse_number<Index>("auxiliary.grid", v); },
                          [](const C& c) { return std::to_string(c.auxiliary.spatial_grid); }}},
      {"auxiliary.segment_len", {[](C& c, const S& v) { c.auxiliary.temporal_segment_len = parse_number<Index>("auxiliary.segment_len", v); },
                                 [](const C& c) { return std::to_string(c.auxiliary.temporal_segment_len); }}},
      {"auxiliary.period", {[](C& c, const S& v) { c.auxiliary.period = parse_number<Index>("auxiliary.period", v); },
                            [](const C& c) { return std::to_string(c.auxiliary.period); }}},
      {"auxiliary.year_breaks", {[](C& c, const S& v) { c.auxiliary.year_breaks = parse_list<std::int64_t>("auxiliary.year_breaks", v); },
                                 [](const C& c) { return list(c.auxiliary.year_breaks); }}},
      {"auxiliary.time_min", {[](C& c, const S& v) { c.auxiliary.time_min = parse_number<std::int64_t>("auxiliary.time_min", v); },
                              [](const C& c) { return std::to_string(c.auxiliary.time_min); }}},
      {"auxiliary.time_max", {[](C& c, const S& v) { c.auxiliary.time_max = parse_number<std::int64_t>("auxiliary.time_max", v); },
                              [](const C& c) { return std::to_string(c.auxiliary.time_max); }}},
      {"training.latent_dim", {[](C& c, const S& v) { c.latent_dim = parse_number<Index>("training.latent_dim", v); },
                               [](const C& c) { return std::to_string(c.latent_dim); }}},
      {"training.W", {[](C& c, const S& v) { c.training.W = parse_number<Index>("training.W", v); },
                      [](const C& c) { return std::to_string(c.training.W); }}},
      {"training.epochs", {[](C& c, const S& v) { c.training.epochs = parse_number<int>("training.epochs", v); },
                           [](const C& c) { return std::to_string(c.training.epochs); }}},
      {"training.batch_size", {[](C& c, const S& v) { c.training.batch_size = parse_number<Index>("training.batch_size", v); },
                               [](const C& c) { return std::to_string(c.training.batch_size); }}},
      {"training.beta", {[](C& c, const S& v) { c.training.beta = parse_number<double>("training.beta", v); },
                         [](const C& c) { return num(c.training.beta); }}},
      {"training.standardize_x", {[](C& c, const S& v) { c.training.standardize_x = parse_bool("training.standardize_x", v); },
                                  [](const C& c) { return std::string(c.training.standardize_x ? "true" : "false"); }}},
      {"training.hidden", {[](C& c, const S& v) { c.training.hidden = parse_list<Index>("training.hidden", v); },
                           [](const C& c) { return list(c.training.hidden); }}},
      {"training.aux_hidden", {[](C& c, const S& v) { c.training.aux_hidden = parse_list<Index>("training.aux_hidden", v); },
                               [](const C& c) { return list(c.training.aux_hidden); }}},
      {"training.lr", {[](C& c, const S& v) { c.training.adam.base_rate = parse_number<double>("training.lr", v); },
                       [](const C& c) { return num(c.training.adam.base_rate); }}},
      {"training.end_lr", {[](C& c, const S& v) { c.training.adam.end_rate = parse_number<double>("training.end_lr", v); },
                           [](const C& c) { return num(c.training.adam.end_rate); }}},
      {"training.decay_steps", {[](C& c, const S& v) { c.training.adam.decay_steps = parse_number<std::int64_t>("training.decay_steps", v); },
                                [](const C& c) { return std::to_string(c.training.adam.decay_steps); }}},
      {"sweep.latent_dims", {[](C& c, const S& v) { c.sweep_dims = parse_list<Index>("sweep.latent_dims", v); },
                             [](const C& c) { return list(c.sweep_dims); }}},
      {"evaluation.period", {[](C& c, const S& v) { c.eval_period = parse_number<double>("evaluation.period", v); },
                             [](const C& c) { return num(c.eval_period); }}},
      {"forecast.horizon", {[](C& c, const S& v) { c.forecast_horizon = parse_number<Index>("forecast.horizon", v); },
                            [](const C& c) { return std::to_string(c.forecast_horizon); }}},
      {"forecast.mode", {[](C& c, const S& v) { c.forecast_mode = trim(v); }, [](const C& c) { return c.forecast_mode; }}},
      {"forecast.holdout", {[](C& c, const S& v) { c.holdout = parse_number<Index>("forecast.holdout", v); },
                            [](const C& c) { return std::to_string(c.holdout); }}},
      {"replicate.count", {[](C& c, const S& v) { c.replicate_count = parse_number<Index>("replicate.count", v); },
                           [](const C& c) { return std::to_string(c.replicate_count); }}},
  };
  return table;
}

const Key* find_key(const std::string& key) {
  for (const auto& [name, k] : keys()) {
    if (name == key) return &k;
  }
  return nullptr;
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  try {
    simulation.validate();
    auxiliary.validate();
  } catch (const InvalidArgument& e) {
    fail(e.what());
  }
  if (training.epochs < 1) fail("training.epochs must be >= 1");
  if (training.batch_size < 1) fail("training.batch_size must be >= 1");
  if (!(training.beta > 0.0)) fail("training.beta must be positive");
  if (training.W < 0) fail("training.W must be >= 0");
  if (latent_dim < 0) fail("training.latent_dim must be >= 0");
  for (Index h : training.hidden)
    if (h < 1) fail("training.hidden sizes must be >= 1");
  for (Index h : training.aux_hidden)
    if (h < 1) fail("training.aux_hidden sizes must be >= 1");
  if (!(training.adam.base_rate > 0.0) || !(training.adam.end_rate > 0.0)) fail("learning rates must be positive");
  if (training.adam.decay_steps < 1) fail("training.decay_steps must be >= 1");
  if (!(eval_period > 0.0)) fail("evaluation.period must be positive");
  if (forecast_horizon < 1) fail("forecast.horizon must be >= 1");
  if (forecast_mode != "mean" && forecast_mode != "sampled") fail("forecast.mode must be mean or sampled");
  if (holdout < 0) fail("forecast.holdout must be >= 0");
  if (replicate_count < 1) fail("replicate.count must be >= 1");
  if (output_dir.empty()) fail("output.dir must not be empty");
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  return serialize_config(*this) == serialize_config(o);
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.simulation.setting = 5;
  c.simulation.P = 3;
  c.simulation.S = 3;
  c.simulation.n_s = 30;
  c.simulation.n_t = 200;
  return c;
}

void apply_setting(ExperimentConfig& cfg, const std::string& raw_key, const std::string& value) {
  const std::string key = trim(raw_key);
  const Key* k = find_key(key);
  if (!k) throw ConfigError("unknown config key '" + key + "'");
  try {
    k->set(cfg, value);
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind("config key ''", 0) == 0) {
      throw ConfigError("config key '" + key + "'" + msg.substr(std::string("config key ''").size()));
    }
    throw;
  }
}

void apply_text(ExperimentConfig& cfg, const std::string& text, const std::string& source) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key=value");
    }
    try {
      apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  ExperimentConfig cfg = default_config();
  apply_text(cfg, text, source);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [name, k] : keys()) out += name + "=" + k.get(cfg) + "\n";
  return out;
}

field::SimulationSpec simulation_spec(const ExperimentConfig& cfg) {
  field::SimulationSpec s = cfg.simulation;
  s.seed = derive_seed(cfg.seed, "simulate");
  return s;
}

model::TrainingConfig training_config(const ExperimentConfig& cfg) {
  model::TrainingConfig t = cfg.training;
  t.seed = derive_seed(cfg.seed, "train");
  return t;
}

}  // namespace ivaear::cli
