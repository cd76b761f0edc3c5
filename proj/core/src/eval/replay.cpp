#include "cholec/eval/replay.hpp"

#include <fstream>
#include <sstream>

#include "cholec/common/errors.hpp"
#include "cholec/common/hash.hpp"

namespace cholec::eval {

namespace {

nlohmann::json action_json(const env::InstrumentAction& a) {
  if (const int* id = std::get_if<int>(&a)) return *id;
  const auto& axes = std::get<kin::Axes>(a);
  return nlohmann::json::array({axes[0], axes[1], axes[2], axes[3]});
}

env::InstrumentAction action_from_json(const nlohmann::json& j) {
  if (j.is_number_integer()) return j.get<int>();
  if (j.is_array() && j.size() == 4) {
    kin::Axes axes{};
    for (int k = 0; k < 4; ++k) axes[k] = j[k].get<double>();
    return axes;
  }
  throw IoError("replay: action must be an id or a 4-vector");
}

}  // namespace

std::string to_jsonl(const ReplayLog& log) {
  std::string out;
  nlohmann::json header{{"type", "header"},
                        {"version", kReplayVersion},
                        {"config_hash", to_hex(log.config_hash)},
                        {"episode_seed", log.episode_seed},
                        {"team", log.team},
                        {"config", log.config},
                        {"initial_digest", to_hex(log.initial_digest)}};
  out += header.dump() + "\n";
  for (std::size_t t = 0; t < log.actions.size(); ++t) {
    nlohmann::json step{{"type", "step"},
                        {"t", t},
                        {"gripper", action_json(log.actions[t].gripper)},
                        {"cauter", action_json(log.actions[t].cauter)},
                        {"digest", to_hex(log.digests.at(t))}};
    out += step.dump() + "\n";
  }
  return out;
}

ReplayLog replay_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  ReplayLog log;
  bool have_header = false;
  int line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      const std::string type = j.at("type");
      if (type == "header") {
        const int version = j.at("version");
        if (version != kReplayVersion) {
          throw IoError("replay: unsupported version " + std::to_string(version));
        }
        log.config_hash = from_hex(j.at("config_hash").get<std::string>());
        log.episode_seed = j.at("episode_seed").get<std::uint64_t>();
        log.team = j.value("team", "");
        log.config = j.at("config");
        log.initial_digest = from_hex(j.at("initial_digest").get<std::string>());
        have_header = true;
      } else if (type == "step") {
        if (!have_header) throw IoError("replay: step before header");
        if (j.at("t").get<std::size_t>() != log.actions.size()) throw IoError("replay: steps out of order");
        log.actions.push_back({action_from_json(j.at("gripper")), action_from_json(j.at("cauter"))});
        log.digests.push_back(from_hex(j.at("digest").get<std::string>()));
      } else {
        throw IoError("replay: unknown record type '" + type + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("replay: line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!have_header) throw IoError("replay: missing header");
  return log;
}

void save_replay(const ReplayLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write replay " + path.string());
  out << to_jsonl(log);
  if (!out) throw IoError("failed writing replay " + path.string());
}

ReplayLog load_replay(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open replay " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return replay_from_jsonl(buf.str());
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + " (" + path.string() + ")");
  }
}

ReplayCheck run_replay(const ReplayLog& log, const StepObserver& observer) {
  const env::EnvConfig config = env::env_config_from_json(log.config);
  if (env::config_hash(config) != log.config_hash) {
    throw ConfigError("replay: embedded config does not match its hash " + to_hex(log.config_hash));
  }
  env::CholecEnv env(config);
  env.reset(log.episode_seed);
  ReplayCheck check;
  MetricsRecorder rec;
  rec.begin(log.episode_seed, env.info());
  if (env::state_digest(env.state()) != log.initial_digest) check.first_mismatch = 0;
  for (std::size_t t = 0; t < log.actions.size(); ++t) {
    if (env.state().done) {
      if (check.first_mismatch < 0) check.first_mismatch = static_cast<int>(t) + 1;
      break;
    }
    const env::StepResult r = env.step(log.actions[t]);
    rec.record(r);
    ++check.steps;
    if (observer) observer(env, r);
    if (check.first_mismatch < 0 && env::state_digest(env.state()) != log.digests[t]) {
      check.first_mismatch = static_cast<int>(t) + 1;
    }
  }
  check.matches = check.first_mismatch < 0;
  check.metrics = rec.finish(env::state_digest(env.state()));
  return check;
}

}  // namespace cholec::eval
