#include "cholec/ppo/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cholec/common/binary_io.hpp"
#include "cholec/common/errors.hpp"
#include "cholec/common/hash.hpp"

namespace cholec::ppo {

namespace {

constexpr char kMagic[8] = {'C', 'H', 'O', 'L', 'E', 'C', 'K', 'P'};

template <typename M>
void write_matrix(BinaryWriter& out, const M& m) {
  out.array(m.data(), static_cast<std::size_t>(m.size()));
}

template <typename M>
void read_matrix(BinaryReader& in, M& m) {
  in.array_into(m.data(), static_cast<std::size_t>(m.size()));
}

}  // namespace

void save_checkpoint(const nn::PolicyValueNet<float>& net, const nn::AdamState<float>& adam,
                     std::int64_t env_steps, std::int64_t iteration, std::uint64_t config_hash,
                     const std::filesystem::path& path) {
  const auto& params = net.parameters();
  if (adam.m.size() != params.size() || adam.v.size() != params.size()) {
    throw ContractError("save_checkpoint: optimizer state does not match the network");
  }
  nlohmann::json header;
  header["arch"] = nn::to_json(net.spec());
  header["tag"] = net.tag();
  header["env_steps"] = env_steps;
  header["iteration"] = iteration;
  header["config_hash"] = to_hex(config_hash);
  auto& list = header["parameters"] = nlohmann::json::array();
  for (const auto& p : params) list.push_back({{"name", p.name}, {"shape", p.shape}});

  std::ostringstream buf(std::ios::binary);
  BinaryWriter w(buf);
  buf.write(kMagic, sizeof kMagic);
  w.pod(kCheckpointVersion);
  w.str(header.dump());
  for (const auto& p : params) write_matrix(w, p.value);
  w.pod<std::int64_t>(adam.step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    write_matrix(w, adam.m[i]);
    write_matrix(w, adam.v[i]);
  }
  const std::string body = buf.str();
  Fnv1a h;
  h.bytes(body.data(), body.size());
  const std::uint64_t checksum = h.value();

  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    out.write(reinterpret_cast<const char*>(&checksum), sizeof checksum);
    if (!out) throw IoError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

AgentCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw CheckpointError("cannot open checkpoint " + path.string());
  std::string data((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  const std::string where = " in checkpoint " + path.string();
  if (data.size() < sizeof kMagic + sizeof(std::uint32_t) + sizeof(std::uint64_t) ||
      std::memcmp(data.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("not a checkpoint file" + where);
  }
  std::uint64_t stored = 0;
  std::memcpy(&stored, data.data() + data.size() - sizeof stored, sizeof stored);
  Fnv1a h;
  h.bytes(data.data(), data.size() - sizeof stored);
  if (h.value() != stored) throw CheckpointError("checksum mismatch" + where);

  std::istringstream buf(data.substr(sizeof kMagic, data.size() - sizeof kMagic - sizeof stored),
                         std::ios::binary);
  BinaryReader r(buf);
  try {
    const auto version = r.pod<std::uint32_t>();
    if (version != kCheckpointVersion) {
      throw CheckpointError("unsupported version " + std::to_string(version) + where +
                            " (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    const auto header = nlohmann::json::parse(r.str());
    AgentCheckpoint ck;
    ck.net = nn::PolicyValueNet<float>(nn::arch_from_json(header.at("arch")),
                                       header.at("tag").get<std::string>());
    ck.env_steps = header.at("env_steps").get<std::int64_t>();
    ck.iteration = header.at("iteration").get<std::int64_t>();
    ck.config_hash = from_hex(header.at("config_hash").get<std::string>());
    auto& params = ck.net.parameters();
    const auto& list = header.at("parameters");
    if (list.size() != params.size()) throw CheckpointError("parameter list mismatch" + where);
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (list[i].at("name").get<std::string>() != params[i].name ||
          list[i].at("shape").get<std::vector<int>>() != params[i].shape) {
        throw CheckpointError("parameter " + params[i].name + " does not match its architecture" +
                              where);
      }
      read_matrix(r, params[i].value);
    }
    ck.adam = nn::AdamState<float>::zeros_like(params);
    ck.adam.step = r.pod<std::int64_t>();
    for (std::size_t i = 0; i < params.size(); ++i) {
      read_matrix(r, ck.adam.m[i]);
      read_matrix(r, ck.adam.v[i]);
    }
    return ck;
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what() + where);
  }
}

AgentCheckpoint load_checkpoint_into(const std::filesystem::path& path,
                                     nn::PolicyValueNet<float>& net,
                                     nn::AdamState<float>* adam) {
  AgentCheckpoint ck = load_checkpoint(path);
  if (!(ck.net.spec() == net.spec())) {
    throw CheckpointError("architecture mismatch: checkpoint " + path.string() + " holds " +
                          nn::to_json(ck.net.spec()).dump() + ", expected " +
                          nn::to_json(net.spec()).dump());
  }
  net = ck.net;
  if (adam) *adam = ck.adam;
  return ck;
}

}  // namespace cholec::ppo
