#pragma once

#include <filesystem>

#include "tempflow/autodiff/network.hpp"
#include "tempflow/autodiff/param_set.hpp"

namespace tempflow::ad {

// Binary checkpoint layout (all integers uint32 little-endian):
//   magic "TFGRPOCK" (8 bytes) | version | activation | state_dim | time_freqs
//   | n_layer_sizes | layer_sizes[n] | float64 LE values of every entry in
//   declaration order.
// A JSON sidecar "<path>.json" lists entry names, shapes and byte offsets.
inline constexpr char kCheckpointMagic[8] = {'T', 'F', 'G', 'R', 'P', 'O', 'C', 'K'};
inline constexpr unsigned kCheckpointVersion = 1;

struct Checkpoint {
  Network net;
  ParamSet params;
};

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

// Writes checkpoint and sidecar. Throws IoError on failure.
void save_checkpoint(const std::filesystem::path& path, const Network& net, const ParamSet& params);

// Reads a checkpoint; the network is reconstructed from the header.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Reads a checkpoint and requires it to match `expected`; throws LoadError otherwise.
ParamSet load_checkpoint(const std::filesystem::path& path, const Network& expected);

}  // namespace tempflow::ad
