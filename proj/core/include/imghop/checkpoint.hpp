#ifndef IMGHOP_CHECKPOINT_HPP
#define IMGHOP_CHECKPOINT_HPP

#include <string>

#include "imghop/training.hpp"

namespace imghop {

inline constexpr int kCheckpointFormatVersion = 1;

// Single-archive checkpoint: a JSON metadata document (specs, hop count,
// loss weights, counters, rng state, format version, array directory)
// followed by raw little-endian float32 parameter and optimizer-moment
// arrays, CRC-protected. Layout details in the README.
void save_checkpoint(const TrainingState& state, const std::string& path);

// Exact inverse of save_checkpoint: parameters, optimizer moments,
// counters and rng state all round-trip bit-for-bit.
TrainingState load_checkpoint(const std::string& path);

}  // namespace imghop

#endif  // IMGHOP_CHECKPOINT_HPP
