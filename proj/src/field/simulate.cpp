#include "ivaear/field/simulate.hpp"

#include "ivaear/rng.hpp"

#include <json.hpp>

namespace ivaear::field {

SimulatedData simulate_dataset(const SimulationSpec& spec) {
  spec.validate();
  SimulatedData out;
  out.latent = simulate_latents(spec);
  out.mixing = gen_mixing(spec.P, spec.S, spec.L, derive_seed(spec.seed, "mixing"));
  auto& d = out.dataset;
  const Index n = spec.n_s * spec.n_t;
  d.coords.resize(n, 2);
  d.times.resize(static_cast<std::size_t>(n));
  for (Index s = 0; s < spec.n_s; ++s) {
    for (Index t = 1; t <= spec.n_t; ++t) {
      const Index row = out.latent.row(s, t);
      d.coords.row(row) = out.latent.locations.row(s);
      d.times[static_cast<std::size_t>(row)] = t;
    }
  }
  d.x = apply_mixing(out.mixing, out.latent.values);
  d.z = out.latent.values;
  return out;
}

std::string simulation_meta_json(const SimulationSpec& spec, const SimulatedData& sim) {
  using nlohmann::json;
  json comps = json::array();
  for (const auto& c : sim.latent.draws) {
    json j = {{"innovation_matern", {{"range", c.innovation.range}, {"shape", c.innovation.shape}}},
              {"rho", c.rho},
              {"segment_sigma", c.segment_sigma},
              {"scale_denominator", c.scale_denominator}};
    if (spec.nonstationary_ar()) {
      j["shift_matern"] = {{"range", c.shift.range}, {"shape", c.shift.shape}};
      j["b"] = c.b;
    }
    if (!c.d.empty()) j["d"] = c.d;
    if (spec.with_trend()) {
      const auto& p = c.trend;
      j["trend"] = {{"theta_s1", p.theta_s1}, {"theta_s2", p.theta_s2}, {"theta_t", p.theta_t},
                    {"omega_s1", p.omega_s1}, {"omega_s2", p.omega_s2}, {"omega_t", p.omega_t},
                    {"omega_c", p.omega_c},   {"alpha", p.alpha}};
    }
    comps.push_back(std::move(j));
  }
  json mixing = json::array();
  for (std::size_t l = 0; l < sim.mixing.layers.size(); ++l) {
    const auto& b = sim.mixing.layers[l];
    json rows = json::array();
    for (Index i = 0; i < b.rows(); ++i) {
      std::vector<double> r(static_cast<std::size_t>(b.cols()));
      for (Index k = 0; k < b.cols(); ++k) r[static_cast<std::size_t>(k)] = b(i, k);
      rows.push_back(r);
    }
    mixing.push_back({{"activation", nn::to_string(sim.mixing.activations[l])}, {"matrix", rows}});
  }
  json meta = {{"seed", spec.seed}, {"setting", spec.setting}, {"P", spec.P},       {"S", spec.S},
               {"n_s", spec.n_s},   {"n_t", spec.n_t},         {"R", spec.R},       {"L", spec.L},
               {"burn_in", spec.burn_in}, {"components", comps}, {"mixing", mixing}};
  return meta.dump(2) + "\n";
}

}  // namespace ivaear::field
