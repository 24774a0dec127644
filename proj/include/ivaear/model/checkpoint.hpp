#pragma once

#include "ivaear/model/ivaear.hpp"

#include <string>

namespace ivaear::model {

inline constexpr char kCheckpointMagic[9] = "IVAEAR01";

/// Binary layout, little-endian:
///   8-byte magic, u64 length + UTF-8 JSON config record,
///   per network (encoder, decoder, auxnet): u64 layer count, then per layer
///   u64 rows, u64 cols, rows·cols f64 weights (row-major), rows f64 biases,
///   trailing u64 FNV-1a checksum of everything before it.
std::string serialize_checkpoint(const IVaeArModel& model);
IVaeArModel deserialize_checkpoint(const std::string& bytes);

void checkpoint_save(const IVaeArModel& model, const std::string& path);
IVaeArModel checkpoint_load(const std::string& path);

}  // namespace ivaear::model
