#pragma once

#include <cstdint>
#include <filesystem>

#include "gates/trainer.hpp"
#include "gates/vocabulary.hpp"

namespace gates {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Vocabulary vocab;
  TrainState state;

  bool operator==(const Checkpoint&) const = default;
};

/// Little-endian binary record, laid out in docs/formats.md:
/// magic, version, vocabulary, model shape, parameters, reference
/// parameters, optimizer moments, counters, trailing FNV-1a checksum.
/// Written to a temporary sibling and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Vocabulary& vocab, const TrainState& state);

/// Throws DataError on a missing, truncated or corrupt file, a version
/// mismatch or internally inconsistent shapes.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws DataError unless the checkpoint was written for `vocab`.
void require_vocabulary(const Checkpoint& checkpoint, const Vocabulary& vocab);

}  // namespace gates
