#include "cholec/session/session.hpp"

#include "cholec/common/errors.hpp"

namespace cholec::session {

namespace {

env::EnvConfig with_gain(env::EnvConfig c, double gain) {
  for (auto& s : c.continuous_scale) s *= gain;
  return c;
}

int slot(env::Instrument i) { return i == env::Instrument::kGripper ? 0 : 1; }

}  // namespace

void SessionConfig::validate() const {
  env.validate();
  if (tick_rate_hz != 30) throw ConfigError("session: tick_rate_hz is fixed at 30");
  if (max_session_episodes < 0) throw ConfigError("session: max_session_episodes must be >= 0");
  if (!(input_gain > 0.0)) throw ConfigError("session: input_gain must be > 0");
}

nlohmann::json to_json(const SessionConfig& c) {
  return {{"schema_version", kSchemaVersion},
          {"team", eval::to_string(c.team)},
          {"tick_rate_hz", c.tick_rate_hz},
          {"port", c.port},
          {"max_session_episodes", c.max_session_episodes},
          {"seed_base", c.seed_base},
          {"input_gain", c.input_gain},
          {"checkpoint_gripper", c.team.gripper.checkpoint},
          {"checkpoint_cauter", c.team.cauter.checkpoint},
          {"env_config_hash", env::config_hash(c.env)},
          {"env", env::to_json(c.env)}};
}

SessionCore::SessionCore(SessionConfig config)
    : config_((config.validate(), std::move(config))),
      env_(with_gain(config_.env, config_.input_gain)) {
  team_ = std::make_unique<eval::Team>(config_.team, env_.config(), this);
  start_episode();
}

SessionCore::SessionCore(SessionConfig config, std::unique_ptr<eval::Controller> gripper,
                         std::unique_ptr<eval::Controller> cauter)
    : config_((config.validate(), std::move(config))),
      env_(with_gain(config_.env, config_.input_gain)) {
  team_ = std::make_unique<eval::Team>(std::move(gripper), std::move(cauter),
                                       config_.team.switch_control);
  start_episode();
}

void SessionCore::submit(const InputMessage& m) {
  std::lock_guard lock(mutex_);
  // In switch-control mode the operator's stick always drives the active instrument.
  const int s = config_.team.switch_control ? 0 : slot(m.instrument);
  pending_[s] = m.axes;
  pending_switch_ = pending_switch_ || m.switch_instrument;
  pending_reset_ = pending_reset_ || m.reset_episode;
}

void SessionCore::disconnect(env::Instrument instrument, const std::string& client_id) {
  std::lock_guard lock(mutex_);
  pending_[config_.team.switch_control ? 0 : slot(instrument)].reset();
  pending_warnings_.push_back("client " + client_id + " disconnected; " + env::to_string(instrument) +
                              " falls back to zero input");
}

std::optional<kin::Axes> SessionCore::axes(env::Instrument instrument) {
  if (config_.team.switch_control) return team_->active() == instrument ? current_[0] : std::nullopt;
  return current_[slot(instrument)];
}

void SessionCore::start_episode() {
  const std::uint64_t seed = config_.seed_base + static_cast<std::uint64_t>(episode_);
  obs_ = env_.reset(seed);
  team_->begin_episode(seed);
  recorder_.begin(seed, env_.info());
  cumulative_gripper_ = 0.0;
  cumulative_cauter_ = 0.0;
  paused_ = false;
}

StateFrame SessionCore::make_frame(const env::StepResult* r) const {
  StateFrame f = make_state_frame(env_);
  f.tick = tick_;
  f.episode = episode_;
  if (r) {
    f.reward_gripper = r->reward_gripper;
    f.reward_cauter = r->reward_cauter;
  }
  f.cumulative_gripper = cumulative_gripper_;
  f.cumulative_cauter = cumulative_cauter_;
  f.paused = paused_;
  if (config_.team.switch_control) f.active_instrument = team_->active();
  return f;
}

TickOutput SessionCore::tick() {
  bool do_switch = false;
  bool do_reset = false;
  std::vector<std::string> warnings;
  {
    std::lock_guard lock(mutex_);
    current_ = pending_;
    pending_ = {};
    do_switch = pending_switch_;
    do_reset = pending_reset_;
    pending_switch_ = pending_reset_ = false;
    warnings.swap(pending_warnings_);
  }
  ++tick_;
  TickOutput out;
  if (do_switch && !team_->toggle_active()) {
    warnings.push_back("switch_instrument ignored: the session is not in switch-control mode");
  }
  if (do_reset && !finished_) {
    ++episode_;
    if (config_.max_session_episodes > 0 && episode_ >= config_.max_session_episodes) {
      finished_ = true;
      paused_ = true;
    } else {
      start_episode();
    }
  }

  std::optional<env::StepResult> result;
  if (!paused_) {
    const env::JointAction action = team_->act(env_, obs_);
    result = env_.step(action);
    recorder_.record(*result);
    cumulative_gripper_ += result->reward_gripper;
    cumulative_cauter_ += result->reward_cauter;
    obs_ = result->observation;
    if (result->done) {
      paused_ = true;
      out.finished = recorder_.finish(env::state_digest(env_.state()));
      if (config_.max_session_episodes > 0 && episode_ + 1 >= config_.max_session_episodes) {
        finished_ = true;
      }
    }
  }
  current_ = {};
  out.frame = make_frame(result ? &*result : nullptr);
  out.messages.push_back(to_json(out.frame));
  if (out.finished) out.messages.push_back(episode_summary_json(episode_, *out.finished));
  for (const auto& w : warnings) out.messages.push_back(warning_json(w));
  return out;
}

}  // namespace cholec::session
