#pragma once

#include <cstdint>
#include <string>

#include "ontofuse/model.hpp"

namespace ontofuse {

// Single-file model snapshot. Layout: version byte, little-endian u32 header
// length, JSON header (model config, vocab hash, tensor directory with
// name/shape/partition tags), then one row-major float64 payload per tensor
// in directory order. Saves are byte-deterministic for equal models.
inline constexpr unsigned char kCheckpointVersion = 1;

struct Checkpoint {
  MlmModel model;
  std::uint64_t vocab_hash = 0;
};

void save_checkpoint(const std::string& path, MlmModel& model, std::uint64_t vocab_hash);

// Refuses version mismatches and any divergence between the tensor directory
// and the parameter set implied by the stored config.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ontofuse
