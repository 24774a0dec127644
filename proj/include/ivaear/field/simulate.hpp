#pragma once

#include "ivaear/data/dataset.hpp"
#include "ivaear/field/latent.hpp"
#include "ivaear/field/mixing.hpp"

#include <string>

namespace ivaear::field {

struct SimulatedData {
  data::SpatioTemporalDataset dataset;  // x = f(z), z attached
  LatentField latent;
  MixingFunction mixing;
};

/// Latent fields from simulate_latents(spec), mixing from the "mixing"
/// sub-stream of spec.seed. Rows are location-major with times 1..n_t.
SimulatedData simulate_dataset(const SimulationSpec& spec);

/// JSON record of the spec, the per-component parameter draws and the mixing
/// matrices.
std::string simulation_meta_json(const SimulationSpec& spec, const SimulatedData& sim);

}  // namespace ivaear::field
