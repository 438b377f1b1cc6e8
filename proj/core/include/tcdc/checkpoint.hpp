#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "tcdc/trainer.hpp"

namespace tcdc {

/// Free-form run metadata stored next to the state (delta, stream, flow
/// parameters, ...). Keys must not contain whitespace.
using CheckpointMeta = std::map<std::string, std::string>;

/// Writes dir/manifest.txt plus one VTNS file per parameter and momentum
/// buffer. Doubles use the shortest round-trip form, so a reload is bit-exact.
void save_checkpoint(const NetState& state, const std::filesystem::path& dir, const CheckpointMeta& meta = {});

struct LoadedCheckpoint {
  NetState state;
  CheckpointMeta meta;
};

/// Throws IoError for a missing/malformed manifest, ShapeMismatch when a
/// tensor file disagrees with the recorded layer list.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace tcdc
