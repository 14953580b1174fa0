#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tempflow/harness/config.hpp"

namespace tempflow::harness {

inline constexpr const char* kVersion = "0.1.0";

struct ManifestFile {
  std::string path;  // relative to the run directory
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string command;
  std::uint64_t config_hash = 0;
  std::string start_time;  // UTC, ISO 8601
  std::map<std::string, std::string> versions;
  std::vector<ManifestFile> files;
};

RunManifest begin_manifest(const std::string& command, const ExperimentConfig& config);
// Records a file that already exists under `run_dir`.
void add_file(RunManifest& manifest, const std::filesystem::path& run_dir, const std::filesystem::path& file);
// Writes <run_dir>/manifest.json and returns its path.
std::filesystem::path write_manifest(const std::filesystem::path& run_dir, const RunManifest& manifest);

}  // namespace tempflow::harness
