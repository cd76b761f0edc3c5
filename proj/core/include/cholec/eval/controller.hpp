#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cholec/env/cholec_env.hpp"
#include "cholec/nn/policy.hpp"

namespace cholec::eval {

enum class ControllerKind { kPolicy, kHuman, kScripted };

enum class ScriptKind { kNoOp, kRandom, kSequence, kHeuristic };

// One instrument's controller.
//
// Text form, as used by --team (gripper first, cauter second, joined by '+'):
//   policy | policy-greedy | human | noop | random | heuristic | seq:<id>[*<n>],...
// A trailing "/switch" selects switch-control mode, e.g. "human+human/switch".
struct ControllerSpec {
  ControllerKind kind = ControllerKind::kScripted;
  ScriptKind script = ScriptKind::kNoOp;
  std::vector<int> sequence;  // kSequence: ids in order, no-op once exhausted
  std::string checkpoint;     // kPolicy
  bool greedy = false;        // kPolicy: argmax instead of sampling
};

struct TeamSpec {
  ControllerSpec gripper;
  ControllerSpec cauter;
  // A single operator drives one instrument at a time; the other receives no-op.
  bool switch_control = false;

  const ControllerSpec& operator[](env::Instrument i) const {
    return i == env::Instrument::kGripper ? gripper : cauter;
  }
  ControllerSpec& operator[](env::Instrument i) {
    return i == env::Instrument::kGripper ? gripper : cauter;
  }
};

ControllerSpec parse_controller(const std::string& text);
std::string to_string(const ControllerSpec& c);
TeamSpec parse_team(const std::string& text);
std::string to_string(const TeamSpec& t);

// Live human input, supplied by a session. Missing input means zero axes.
class InputSource {
 public:
  virtual ~InputSource() = default;
  virtual std::optional<kin::Axes> axes(env::Instrument instrument) = 0;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual void begin_episode(std::uint64_t episode_seed) = 0;
  virtual env::InstrumentAction act(const env::CholecEnv& env, const env::Observation& obs) = 0;
};

// Frozen policy network. Sampling is seeded from the episode seed and the instrument.
class PolicyController : public Controller {
 public:
  PolicyController(nn::PolicyValueNet<float> net, env::Instrument instrument, bool greedy);

  void begin_episode(std::uint64_t episode_seed) override;
  env::InstrumentAction act(const env::CholecEnv& env, const env::Observation& obs) override;

  const nn::PolicyValueNet<float>& net() const { return net_; }

 private:
  nn::PolicyValueNet<float> net_;
  env::Instrument instrument_;
  bool greedy_;
  nn::RecurrentState<float> state_;
  int prev_action_ = -1;
  std::mt19937_64 rng_;
};

class HumanController : public Controller {
 public:
  HumanController(InputSource& input, env::Instrument instrument)
      : input_(input), instrument_(instrument) {}

  void begin_episode(std::uint64_t) override {}
  env::InstrumentAction act(const env::CholecEnv& env, const env::Observation& obs) override;

 private:
  InputSource& input_;
  env::Instrument instrument_;
};

// noop, uniform random ids, a fixed id sequence, or the reference heuristic: the gripper pans
// until the target is at least 70% visible, the cauter greedily takes the discrete step that
// brings its tip closest to the target.
class ScriptedController : public Controller {
 public:
  ScriptedController(ControllerSpec spec, env::Instrument instrument);

  void begin_episode(std::uint64_t episode_seed) override;
  env::InstrumentAction act(const env::CholecEnv& env, const env::Observation& obs) override;

  static constexpr double kLiftVisibility = 0.7;

 private:
  ControllerSpec spec_;
  env::Instrument instrument_;
  std::mt19937_64 rng_;
  std::size_t cursor_ = 0;
  bool lifting_ = true;
};

// Greedy one-step lookahead for the cauter tip (ties keep the lower id; no-op if nothing helps).
int greedy_cauter_action(const env::CholecEnv& env);

// Loads the checkpoint and checks it fits the environment's observation.
nn::PolicyValueNet<float> load_policy(const std::string& checkpoint, const env::EnvConfig& config);

std::unique_ptr<Controller> make_controller(const ControllerSpec& spec, env::Instrument instrument,
                                            const env::EnvConfig& config, InputSource* input);

// The two controllers of an episode plus the switch-control state.
class Team {
 public:
  // Throws ContractError for a human controller without an input source.
  Team(const TeamSpec& spec, const env::EnvConfig& config, InputSource* input = nullptr);
  Team(std::unique_ptr<Controller> gripper, std::unique_ptr<Controller> cauter,
       bool switch_control = false);

  void begin_episode(std::uint64_t episode_seed);
  env::JointAction act(const env::CholecEnv& env, const env::Observation& obs);

  bool switch_control() const { return switch_control_; }
  env::Instrument active() const { return active_; }
  // Only meaningful in switch-control mode; returns false otherwise.
  bool toggle_active();

 private:
  std::array<std::unique_ptr<Controller>, 2> controllers_;
  bool switch_control_ = false;
  env::Instrument active_ = env::Instrument::kGripper;
};

}  // namespace cholec::eval
