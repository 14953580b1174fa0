#include "tempflow/harness/manifest.hpp"

#include <Eigen/Core>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include <json.hpp>

#include "tempflow/common/errors.hpp"

namespace tempflow::harness {

namespace {

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

RunManifest begin_manifest(const std::string& command, const ExperimentConfig& config) {
  RunManifest m;
  m.command = command;
  m.config_hash = config_hash(config);
  m.start_time = utc_now();
  m.versions["tempflow"] = kVersion;
  m.versions["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION);
#if defined(__VERSION__)
  m.versions["compiler"] = __VERSION__;
#endif
  m.versions["checkpoint_format"] = "1";
  return m;
}

void add_file(RunManifest& manifest, const std::filesystem::path& run_dir, const std::filesystem::path& file) {
  std::error_code ec;
  const auto bytes = std::filesystem::file_size(file, ec);
  if (ec) throw IoError("manifest: cannot stat " + file.string());
  manifest.files.push_back({std::filesystem::relative(file, run_dir).generic_string(), bytes});
}

std::filesystem::path write_manifest(const std::filesystem::path& run_dir, const RunManifest& manifest) {
  nlohmann::json doc;
  doc["command"] = manifest.command;
  doc["config_hash"] = hex(manifest.config_hash);
  doc["start_time"] = manifest.start_time;
  doc["versions"] = manifest.versions;
  doc["files"] = nlohmann::json::array();
  for (const auto& f : manifest.files) doc["files"].push_back({{"path", f.path}, {"bytes", f.bytes}});
  const auto path = run_dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
  return path;
}

}  // namespace tempflow::harness
