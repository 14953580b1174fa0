#include "tempflow/autodiff/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include <json.hpp>

#include "tempflow/common/errors.hpp"

namespace tempflow::ad {

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::vector<unsigned char>& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }

  void magic() {
    need(8);
    if (std::memcmp(bytes_.data(), kCheckpointMagic, 8) != 0) throw LoadError("not a tempflow checkpoint (bad magic)");
    pos_ += 8;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw LoadError("checkpoint truncated");
  }

  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  return std::filesystem::path(checkpoint.string() + ".json");
}

void save_checkpoint(const std::filesystem::path& path, const Network& net, const ParamSet& params) {
  net.check_params(params);
  std::vector<unsigned char> bytes(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_u32(bytes, kCheckpointVersion);
  put_u32(bytes, static_cast<std::uint32_t>(net.activation()));
  put_u32(bytes, static_cast<std::uint32_t>(net.state_dim()));
  put_u32(bytes, static_cast<std::uint32_t>(net.time_freqs()));
  const auto sizes = net.layer_sizes();
  put_u32(bytes, static_cast<std::uint32_t>(sizes.size()));
  for (std::size_t s : sizes) put_u32(bytes, static_cast<std::uint32_t>(s));

  nlohmann::ordered_json manifest;
  manifest["format"] = "tempflow-checkpoint";
  manifest["version"] = kCheckpointVersion;
  manifest["activation"] = to_string(net.activation());
  manifest["state_dim"] = net.state_dim();
  manifest["time_freqs"] = net.time_freqs();
  manifest["layer_sizes"] = sizes;
  manifest["data_offset"] = bytes.size();
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const ParamEntry& e : params.entries()) {
    entries.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", bytes.size()}, {"bytes", 8 * e.size()}});
    for (double v : e.values) put_f64(bytes, v);
  }
  manifest["entries"] = entries;
  manifest["total_bytes"] = bytes.size();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());

  std::ofstream side(sidecar_path(path), std::ios::trunc);
  if (!side) throw IoError("cannot write checkpoint manifest " + sidecar_path(path).string());
  side << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  Reader r(std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {}));
  r.magic();
  if (const auto version = r.u32(); version != kCheckpointVersion)
    throw LoadError("unsupported checkpoint version " + std::to_string(version));
  const auto act = r.u32();
  if (act > 1) throw LoadError("unknown activation code in checkpoint");
  const auto state_dim = r.u32();
  const auto freqs = r.u32();
  const auto n = r.u32();
  if (n < 2) throw LoadError("checkpoint has fewer than two layer sizes");
  std::vector<std::size_t> sizes(n);
  for (auto& s : sizes) s = r.u32();
  if (sizes.front() != state_dim + 2 * freqs || sizes.back() != state_dim)
    throw LoadError("checkpoint layer sizes inconsistent with state/time dimensions");
  std::vector<std::size_t> hidden(sizes.begin() + 1, sizes.end() - 1);
  Network net(state_dim, hidden, static_cast<Activation>(act), freqs);
  ParamSet params = net.zero_params();
  for (ParamEntry& e : params.entries())
    for (double& v : e.values) v = r.f64();
  if (!r.at_end()) throw LoadError("trailing bytes in checkpoint");
  return Checkpoint{std::move(net), std::move(params)};
}

ParamSet load_checkpoint(const std::filesystem::path& path, const Network& expected) {
  Checkpoint ck = load_checkpoint(path);
  if (!(ck.net == expected))
    throw LoadError("checkpoint network (" + to_string(ck.net.activation()) + ", " +
                    std::to_string(ck.net.layer_sizes().size()) +
                    " layer sizes) does not match the configured network");
  return std::move(ck.params);
}

}  // namespace tempflow::ad
