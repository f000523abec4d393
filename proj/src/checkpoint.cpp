#include "mib/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace mib {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is little-endian; big-endian hosts unsupported");

namespace {
constexpr char kMagic[8] = {'M', 'I', 'B', 'C', 'K', 'P', 'T', '1'};
}

const MatF& CheckpointData::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw std::invalid_argument("checkpoint: missing tensor '" + name + "'");
}

void write_checkpoint(const std::string& path, const CheckpointData& data) {
  json meta;
  meta["version"] = data.version;
  meta["config"] = data.config_json;
  meta["env_steps"] = data.env_steps;
  meta["interactions"] = data.interactions;
  meta["updates"] = data.updates;
  meta["buffer_cursor"] = data.buffer_cursor;
  meta["rng_states"] = data.rng_states;
  meta["counters"] = data.counters;
  meta["running_n"] = data.running_n;
  meta["running_mean"] = std::vector<double>(data.running_mean.data(),
                                             data.running_mean.data() + data.running_mean.size());
  meta["running_m2"] =
      std::vector<double>(data.running_m2.data(), data.running_m2.data() + data.running_m2.size());

  json manifest = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : data.tensors) {
    manifest.push_back({{"name", name},
                        {"rows", t.rows()},
                        {"cols", t.cols()},
                        {"offset", offset},
                        {"dtype", "f32"}});
    offset += static_cast<std::uint64_t>(t.size()) * sizeof(float);
  }
  meta["tensors"] = manifest;

  const std::string meta_str = meta.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  MIB_CHECK(out.good(), "write_checkpoint: cannot open '" + path + "'");
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = meta_str.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  for (const auto& [name, t] : data.tensors)
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(float)));
  MIB_RUNTIME_CHECK(out.good(), "write_checkpoint: write failed for '" + path + "'");
}

CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  MIB_CHECK(in.good(), "read_checkpoint: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  MIB_CHECK(in.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
            "read_checkpoint: bad magic in '" + path + "'");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string meta_str(len, '\0');
  in.read(meta_str.data(), static_cast<std::streamsize>(len));
  MIB_CHECK(in.good(), "read_checkpoint: truncated manifest");
  const json meta = json::parse(meta_str);

  CheckpointData data;
  data.version = meta.at("version").get<int>();
  MIB_CHECK(data.version == kCheckpointVersion,
            "read_checkpoint: unsupported format version " + std::to_string(data.version));
  data.config_json = meta.at("config").get<std::string>();
  data.env_steps = meta.at("env_steps").get<long>();
  data.interactions = meta.at("interactions").get<long>();
  data.updates = meta.at("updates").get<long>();
  data.buffer_cursor = meta.at("buffer_cursor").get<long>();
  data.rng_states = meta.at("rng_states").get<std::map<std::string, std::string>>();
  data.counters = meta.at("counters").get<std::map<std::string, long>>();
  data.running_n = meta.at("running_n").get<long>();
  const auto rm = meta.at("running_mean").get<std::vector<double>>();
  const auto r2 = meta.at("running_m2").get<std::vector<double>>();
  data.running_mean = Eigen::Map<const VecD>(rm.data(), static_cast<Eigen::Index>(rm.size()));
  data.running_m2 = Eigen::Map<const VecD>(r2.data(), static_cast<Eigen::Index>(r2.size()));

  for (const auto& entry : meta.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    MIB_CHECK(entry.at("dtype").get<std::string>() == "f32",
              "read_checkpoint: unsupported dtype for '" + name + "'");
    MatF t(rows, cols);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(float)));
    MIB_CHECK(in.good(), "read_checkpoint: truncated payload at '" + name + "'");
    data.tensors.emplace_back(name, std::move(t));
  }
  return data;
}

}  // namespace mib
