#include "cholec/eval/controller.hpp"

#include <algorithm>
#include <sstream>

#include "cholec/common/errors.hpp"
#include "cholec/nn/sampling.hpp"
#include "cholec/ppo/checkpoint.hpp"

namespace cholec::eval {

namespace {

std::mt19937_64 episode_rng(std::uint64_t episode_seed, env::Instrument instrument,
                            std::uint32_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(episode_seed),
                    static_cast<std::uint32_t>(episode_seed >> 32),
                    static_cast<std::uint32_t>(instrument), salt};
  return std::mt19937_64(seq);
}

int parse_id(const std::string& s, const std::string& context) {
  std::size_t used = 0;
  int v = -1;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || v < 0 || v >= kin::kNumActions) {
    throw ConfigError("invalid action id '" + s + "' in controller '" + context + "'");
  }
  return v;
}

}  // namespace

ControllerSpec parse_controller(const std::string& text) {
  ControllerSpec c;
  if (text == "policy" || text == "policy-greedy") {
    c.kind = ControllerKind::kPolicy;
    c.greedy = text == "policy-greedy";
  } else if (text == "human") {
    c.kind = ControllerKind::kHuman;
  } else if (text == "noop") {
    c.script = ScriptKind::kNoOp;
  } else if (text == "random") {
    c.script = ScriptKind::kRandom;
  } else if (text == "heuristic") {
    c.script = ScriptKind::kHeuristic;
  } else if (text.rfind("seq:", 0) == 0) {
    c.script = ScriptKind::kSequence;
    std::stringstream items(text.substr(4));
    std::string item;
    while (std::getline(items, item, ',')) {
      const auto star = item.find('*');
      const int id = parse_id(item.substr(0, star), text);
      int count = 1;
      if (star != std::string::npos) {
        try {
          count = std::stoi(item.substr(star + 1));
        } catch (const std::exception&) {
          count = -1;
        }
        if (count < 0) throw ConfigError("invalid repeat count in controller '" + text + "'");
      }
      c.sequence.insert(c.sequence.end(), count, id);
    }
  } else {
    throw ConfigError("unknown controller '" + text +
                      "' (expected policy, policy-greedy, human, noop, random, heuristic or seq:...)");
  }
  return c;
}

std::string to_string(const ControllerSpec& c) {
  switch (c.kind) {
    case ControllerKind::kPolicy:
      return c.greedy ? "policy-greedy" : "policy";
    case ControllerKind::kHuman:
      return "human";
    case ControllerKind::kScripted:
      break;
  }
  switch (c.script) {
    case ScriptKind::kNoOp:
      return "noop";
    case ScriptKind::kRandom:
      return "random";
    case ScriptKind::kHeuristic:
      return "heuristic";
    case ScriptKind::kSequence:
      break;
  }
  // run-length encoded
  std::string s = "seq:";
  for (std::size_t i = 0; i < c.sequence.size();) {
    std::size_t j = i;
    while (j < c.sequence.size() && c.sequence[j] == c.sequence[i]) ++j;
    if (i > 0) s += ',';
    s += std::to_string(c.sequence[i]);
    if (j - i > 1) s += "*" + std::to_string(j - i);
    i = j;
  }
  return s;
}

TeamSpec parse_team(const std::string& text) {
  std::string body = text;
  TeamSpec t;
  const std::string suffix = "/switch";
  if (body.size() > suffix.size() && body.compare(body.size() - suffix.size(), suffix.size(), suffix) == 0) {
    t.switch_control = true;
    body.resize(body.size() - suffix.size());
  }
  const auto plus = body.find('+');
  if (plus == std::string::npos || body.find('+', plus + 1) != std::string::npos) {
    throw ConfigError("team '" + text + "' must name two controllers as <gripper>+<cauter>");
  }
  t.gripper = parse_controller(body.substr(0, plus));
  t.cauter = parse_controller(body.substr(plus + 1));
  if (t.switch_control && (t.gripper.kind != ControllerKind::kHuman ||
                           t.cauter.kind != ControllerKind::kHuman)) {
    throw ConfigError("switch-control mode needs a human on both instruments");
  }
  return t;
}

std::string to_string(const TeamSpec& t) {
  return to_string(t.gripper) + "+" + to_string(t.cauter) + (t.switch_control ? "/switch" : "");
}

PolicyController::PolicyController(nn::PolicyValueNet<float> net, env::Instrument instrument,
                                   bool greedy)
    : net_(std::move(net)), instrument_(instrument), greedy_(greedy), state_(net_.initial_state(1)) {}

void PolicyController::begin_episode(std::uint64_t episode_seed) {
  state_ = net_.initial_state(1);
  prev_action_ = -1;
  rng_ = episode_rng(episode_seed, instrument_, 0x706f6c69u);
}

env::InstrumentAction PolicyController::act(const env::CholecEnv&, const env::Observation& obs) {
  const auto n = static_cast<Eigen::Index>(obs.values.size());
  if (n != net_.spec().observation_size()) {
    throw ContractError("policy controller: observation size does not match the network");
  }
  const nn::Matrix<float> x = Eigen::Map<const Eigen::RowVectorXf>(obs.values.data(), n);
  const nn::Matrix<float> out = net_.step(x, {prev_action_}, state_);
  std::vector<double> logits(nn::kNumActions);
  for (int k = 0; k < nn::kNumActions; ++k) logits[k] = out(0, k);
  const nn::ActionSample s = greedy_ ? nn::greedy_action(logits) : nn::sample_action(logits, rng_);
  prev_action_ = s.action;
  return s.action;
}

env::InstrumentAction HumanController::act(const env::CholecEnv&, const env::Observation&) {
  const auto axes = input_.axes(instrument_);
  return axes ? *axes : kin::Axes{0.0, 0.0, 0.0, 0.0};
}

ScriptedController::ScriptedController(ControllerSpec spec, env::Instrument instrument)
    : spec_(std::move(spec)), instrument_(instrument) {}

void ScriptedController::begin_episode(std::uint64_t episode_seed) {
  rng_ = episode_rng(episode_seed, instrument_, 0x73637269u);
  cursor_ = 0;
  lifting_ = true;
}

int greedy_cauter_action(const env::CholecEnv& env) {
  const auto& s = env.state();
  const auto& trocar = env.scene().cauter.trocar;
  int best = kin::kNoOpId;
  double best_d = env.target_distance_mm();
  for (int a = 0; a < kin::kNoOpId; ++a) {
    const auto pose = kin::apply_discrete(s.cauter_pose, a, env.config().limits);
    const double d = (kin::tip_transform(trocar, pose).translation - s.target.center_mm).norm();
    if (d < best_d - 1e-9) {
      best_d = d;
      best = a;
    }
  }
  return best;
}

env::InstrumentAction ScriptedController::act(const env::CholecEnv& env, const env::Observation&) {
  switch (spec_.script) {
    case ScriptKind::kNoOp:
      return kin::kNoOpId;
    case ScriptKind::kRandom:
      return static_cast<int>(rng_() % kin::kNumActions);
    case ScriptKind::kSequence:
      return cursor_ < spec_.sequence.size() ? spec_.sequence[cursor_++] : kin::kNoOpId;
    case ScriptKind::kHeuristic:
      break;
  }
  if (instrument_ == env::Instrument::kCauter) return greedy_cauter_action(env);
  if (lifting_ && env.state().occlusion.visible_fraction >= kLiftVisibility) lifting_ = false;
  return lifting_ ? static_cast<int>(kin::Action::kPanPlus) : kin::kNoOpId;
}

nn::PolicyValueNet<float> load_policy(const std::string& checkpoint, const env::EnvConfig& config) {
  if (checkpoint.empty()) throw ConfigError("policy controller needs a checkpoint path");
  ppo::AgentCheckpoint ck = ppo::load_checkpoint(checkpoint);
  const int expected = config.obs_mode == env::ObsMode::kFeatures
                           ? env::kFeatureDim
                           : 3 * config.image_height * config.image_width;
  if (ck.net.spec().observation_size() != expected) {
    throw CheckpointError("architecture mismatch: checkpoint " + checkpoint + " expects " +
                          std::to_string(ck.net.spec().observation_size()) +
                          " observation values, the environment produces " +
                          std::to_string(expected) + " (" + env::to_string(config.obs_mode) + ")");
  }
  return std::move(ck.net);
}

std::unique_ptr<Controller> make_controller(const ControllerSpec& spec, env::Instrument instrument,
                                            const env::EnvConfig& config, InputSource* input) {
  switch (spec.kind) {
    case ControllerKind::kPolicy:
      return std::make_unique<PolicyController>(load_policy(spec.checkpoint, config), instrument,
                                                spec.greedy);
    case ControllerKind::kHuman:
      if (!input) {
        throw ContractError("human controller for the " + env::to_string(instrument) +
                            " is only valid inside a live session");
      }
      return std::make_unique<HumanController>(*input, instrument);
    case ControllerKind::kScripted:
      break;
  }
  return std::make_unique<ScriptedController>(spec, instrument);
}

Team::Team(const TeamSpec& spec, const env::EnvConfig& config, InputSource* input)
    : controllers_{make_controller(spec.gripper, env::Instrument::kGripper, config, input),
                   make_controller(spec.cauter, env::Instrument::kCauter, config, input)},
      switch_control_(spec.switch_control) {}

Team::Team(std::unique_ptr<Controller> gripper, std::unique_ptr<Controller> cauter,
           bool switch_control)
    : controllers_{std::move(gripper), std::move(cauter)}, switch_control_(switch_control) {
  if (!controllers_[0] || !controllers_[1]) throw ContractError("team needs two controllers");
}

void Team::begin_episode(std::uint64_t episode_seed) {
  for (auto& c : controllers_) c->begin_episode(episode_seed);
  active_ = env::Instrument::kGripper;
}

env::JointAction Team::act(const env::CholecEnv& env, const env::Observation& obs) {
  env::JointAction a;
  if (!switch_control_ || active_ == env::Instrument::kGripper) {
    a.gripper = controllers_[0]->act(env, obs);
  }
  if (!switch_control_ || active_ == env::Instrument::kCauter) {
    a.cauter = controllers_[1]->act(env, obs);
  }
  return a;
}

bool Team::toggle_active() {
  if (!switch_control_) return false;
  active_ = active_ == env::Instrument::kGripper ? env::Instrument::kCauter
                                                 : env::Instrument::kGripper;
  return true;
}

}  // namespace cholec::eval
