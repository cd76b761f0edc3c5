#include "cholec/ppo/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cholec/common/binary_io.hpp"
#include "cholec/common/errors.hpp"
#include "cholec/common/hash.hpp"
#include "cholec/env/state_io.hpp"
#include "cholec/nn/graph.hpp"
#include "cholec/nn/sampling.hpp"
#include "cholec/ppo/checkpoint.hpp"
#include "cholec/ppo/gae.hpp"
#include "cholec/ppo/losses.hpp"

namespace cholec::ppo {

namespace {

constexpr char kStateMagic[8] = {'C', 'H', 'O', 'L', 'E', 'C', 'T', 'S'};
constexpr std::uint32_t kStateVersion = 1;
constexpr const char* kAgentTags[kNumAgents] = {"gripper", "cauter"};

std::mt19937_64 seeded(std::uint64_t seed, std::uint32_t a, std::uint32_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), a, b};
  return std::mt19937_64(seq);
}

// Uniform integer in [0, n) by rejection, independent of the standard library's distributions.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

std::string rng_text(const std::mt19937_64& rng) {
  std::ostringstream s;
  s << rng;
  return s.str();
}

std::mt19937_64 rng_from_text(const std::string& text) {
  std::istringstream s(text);
  std::mt19937_64 rng;
  s >> rng;
  if (!s) throw IoError("trainer state: malformed random generator state");
  return rng;
}

nn::Matrix<float> select_rows(const nn::Matrix<float>& m, const std::vector<int>& rows) {
  nn::Matrix<float> out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(rows[k]);
  return out;
}

std::vector<double> logits_row(const nn::Matrix<float>& out, Eigen::Index row) {
  std::vector<double> l(nn::kNumActions);
  for (int k = 0; k < nn::kNumActions; ++k) l[k] = out(row, k);
  return l;
}

void write_matrix(BinaryWriter& w, const nn::Matrix<float>& m) {
  w.pod<std::int64_t>(m.rows());
  w.pod<std::int64_t>(m.cols());
  w.array(m.data(), static_cast<std::size_t>(m.size()));
}

nn::Matrix<float> read_matrix(BinaryReader& r, Eigen::Index rows, Eigen::Index cols) {
  if (r.pod<std::int64_t>() != rows || r.pod<std::int64_t>() != cols) {
    throw IoError("trainer state: recurrent state has the wrong shape");
  }
  nn::Matrix<float> m(rows, cols);
  r.array_into(m.data(), static_cast<std::size_t>(m.size()));
  return m;
}

}  // namespace

double TrainStats::fraction(env::Outcome o) const {
  if (episodes == 0) return 0.0;
  const int n = o == env::Outcome::kReachedGoal  ? reached_goal
                : o == env::Outcome::kLostGrasp ? lost_grasp
                                                : ran_out_of_time;
  return static_cast<double>(n) / episodes;
}

std::string telemetry_header() {
  std::string h =
      "iteration,env_steps,episodes,reached_goal,lost_grasp,ran_out_of_time";
  for (const char* a : kAgentTags) {
    for (const char* f : {"return", "policy_loss", "value_loss", "entropy", "clip_fraction",
                          "grad_norm"}) {
      h += std::string(",") + a + "_" + f;
    }
  }
  return h;
}

std::string telemetry_row(const TrainStats& s) {
  std::ostringstream o;
  const auto num = [&o](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, ",%.9g", v);
    o << buf;
  };
  o << s.iteration << ',' << s.env_steps << ',' << s.episodes;
  num(s.fraction(env::Outcome::kReachedGoal));
  num(s.fraction(env::Outcome::kLostGrasp));
  num(s.fraction(env::Outcome::kRanOutOfTime));
  for (const auto& a : s.agents) {
    num(a.mean_return);
    num(a.policy_loss);
    num(a.value_loss);
    num(a.entropy);
    num(a.clip_fraction);
    num(a.grad_norm);
  }
  return o.str();
}

nn::ArchSpec Trainer::architecture(const env::EnvConfig& env_config, const PpoConfig& config) {
  if (env_config.obs_mode == env::ObsMode::kFeatures) {
    return nn::ArchSpec::features(env::kFeatureDim, config.feature_width, config.feature_lstm);
  }
  return nn::ArchSpec::image(3, env_config.image_height, env_config.image_width);
}

Trainer::Trainer(env::EnvConfig env_config, PpoConfig config)
    : env_config_(std::move(env_config)), config_(config) {
  env_config_.validate();
  config_.validate();
  assets_ = env::EnvAssets::build(env_config_);
  const nn::ArchSpec arch = architecture(env_config_, config_);
  for (int a = 0; a < kNumAgents; ++a) {
    nets_[a] = nn::PolicyValueNet<float>(arch, kAgentTags[a]);
    nets_[a].initialize(config_.seed * 2 + static_cast<std::uint64_t>(a) + 1);
    adam_[a] = nn::AdamState<float>::zeros_like(nets_[a].parameters());
    recurrent_[a] = nets_[a].initial_state(config_.n_parallel_envs);
  }
  lanes_.resize(config_.n_parallel_envs);
  for (int i = 0; i < config_.n_parallel_envs; ++i) {
    lanes_[i].env = std::make_unique<env::CholecEnv>(env_config_, assets_);
    lanes_[i].rng = seeded(config_.seed, static_cast<std::uint32_t>(i), 0x6c616e65u);
  }
  shuffle_rng_ = seeded(config_.seed, 0xffffffffu, 0x73687566u);
}

std::uint64_t Trainer::config_hash() const {
  Fnv1a h;
  h.str(env::to_json(env_config_).dump());
  h.str(to_json(config_).dump());
  return h.value();
}

std::uint64_t Trainer::episode_seed(int lane, std::uint64_t index) const {
  Fnv1a h;
  h.u64(config_.seed);
  h.u64(static_cast<std::uint64_t>(lane));
  h.u64(index);
  return h.value();
}

void Trainer::start_episode(Lane& lane, int index) {
  lane.observation = lane.env->reset(episode_seed(index, lane.episodes_started)).values;
  ++lane.episodes_started;
  lane.needs_reset = false;
  lane.prev_action = {-1, -1};
  lane.discounted_return = {0.0, 0.0};
  lane.discount = 1.0;
  for (auto& r : recurrent_) {
    r.h.row(index).setZero();
    r.c.row(index).setZero();
  }
}

RolloutBatch Trainer::collect() {
  const int T = config_.unroll_length();
  const int B = config_.n_parallel_envs;
  const int obs_size = nets_[0].spec().observation_size();
  RolloutBatch batch;
  batch.steps = T;
  batch.lanes = B;
  batch.observations.resize(T * B, obs_size);
  batch.resets.assign(T * B, 0);
  batch.dones.assign(T * B, 0);
  batch.truncations.assign(T * B, 0);
  for (auto& ag : batch.agents) {
    ag.actions.assign(T * B, 0);
    ag.prev_actions.assign(T * B, -1);
    ag.log_probs.assign(T * B, 0.0);
    ag.values.assign(T * B, 0.0);
    ag.rewards.assign(T * B, 0.0);
    ag.bootstrap_values.assign(T * B, 0.0);
  }

  nn::Matrix<float> obs(B, obs_size);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < B; ++i) {
      Lane& lane = lanes_[i];
      if (lane.needs_reset) {
        start_episode(lane, i);
        batch.resets[t * B + i] = 1;
      }
      if (static_cast<int>(lane.observation.size()) != obs_size) {
        throw ContractError("trainer: observation size does not match the network");
      }
      obs.row(i) = Eigen::Map<const Eigen::RowVectorXf>(lane.observation.data(), obs_size);
    }
    if (t == 0) {
      for (int a = 0; a < kNumAgents; ++a) batch.agents[a].initial = recurrent_[a];
    }
    batch.observations.middleRows(t * B, B) = obs;

    std::array<nn::Matrix<float>, kNumAgents> out;
    for (int a = 0; a < kNumAgents; ++a) {
      std::vector<int> prev(B);
      for (int i = 0; i < B; ++i) prev[i] = lanes_[i].prev_action[a];
      out[a] = nets_[a].step(obs, prev, recurrent_[a]);
    }

    for (int i = 0; i < B; ++i) {
      Lane& lane = lanes_[i];
      const int row = t * B + i;
      std::array<int, kNumAgents> act{};
      for (int a = 0; a < kNumAgents; ++a) {
        const nn::ActionSample s = nn::sample_action(logits_row(out[a], i), lane.rng);
        auto& ag = batch.agents[a];
        act[a] = s.action;
        ag.actions[row] = s.action;
        ag.prev_actions[row] = lane.prev_action[a];
        ag.log_probs[row] = s.log_prob;
        ag.values[row] = out[a](i, nn::kNumActions);
      }
      const env::StepResult r = lane.env->step({act[0], act[1]});
      ++env_steps_;
      std::array<double, kNumAgents> reward{r.reward_gripper, r.reward_cauter};
      if (config_.shared_reward) reward = {reward[0] + reward[1], reward[0] + reward[1]};
      for (int a = 0; a < kNumAgents; ++a) {
        batch.agents[a].rewards[row] = reward[a];
        lane.discounted_return[a] += lane.discount * reward[a];
      }
      lane.discount *= config_.gamma;
      lane.prev_action = act;

      if (r.truncated) {
        // V of the state the time limit cut off, with the lane's recurrent state continued.
        batch.truncations[row] = 1;
        const nn::Matrix<float> o =
            Eigen::Map<const Eigen::RowVectorXf>(r.observation.values.data(), obs_size);
        for (int a = 0; a < kNumAgents; ++a) {
          nn::RecurrentState<float> st{recurrent_[a].h.row(i), recurrent_[a].c.row(i)};
          const nn::Matrix<float> v = nets_[a].step(o, {act[a]}, st);
          batch.agents[a].bootstrap_values[row] = v(0, nn::kNumActions);
        }
      }
      if (r.done) {
        batch.dones[row] = r.truncated ? 0 : 1;
        CompletedEpisode ep;
        ep.lane = i;
        ep.episode_seed = lane.env->state().episode_seed;
        ep.outcome = *r.outcome;
        ep.steps = r.info.step;
        ep.discounted_return = lane.discounted_return;
        batch.completed.push_back(ep);
        lane.needs_reset = true;
      } else {
        lane.observation = r.observation.values;
      }
    }
  }

  // Bootstrap values for lanes still running at the end of the segment.
  for (int i = 0; i < B; ++i) {
    obs.row(i) = Eigen::Map<const Eigen::RowVectorXf>(lanes_[i].observation.data(), obs_size);
  }
  for (int a = 0; a < kNumAgents; ++a) {
    std::vector<int> prev(B);
    for (int i = 0; i < B; ++i) prev[i] = lanes_[i].prev_action[a];
    nn::RecurrentState<float> st = recurrent_[a];
    const nn::Matrix<float> v = nets_[a].step(obs, prev, st);
    for (int i = 0; i < B; ++i) {
      const int row = (T - 1) * B + i;
      if (!lanes_[i].needs_reset) batch.agents[a].bootstrap_values[row] = v(i, nn::kNumActions);
    }
  }
  return batch;
}

void Trainer::update(const RolloutBatch& batch, TrainStats& stats) {
  const int T = batch.steps;
  const int B = batch.lanes;
  const int N = batch.rows();
  const int lanes_per_mb = B / config_.minibatches_per_epoch;
  if (B % config_.minibatches_per_epoch != 0) {
    throw ContractError("trainer: lanes are not divisible into minibatches");
  }

  // Advantages per lane, normalized over the whole iteration; targets use the raw advantages.
  std::array<std::vector<double>, kNumAgents> adv, targets;
  for (int a = 0; a < kNumAgents; ++a) {
    const AgentRollout& ag = batch.agents[a];
    adv[a].resize(N);
    targets[a].resize(N);
    std::vector<double> r(T), v(T), bv(T);
    std::vector<std::uint8_t> d(T), tr(T);
    for (int i = 0; i < B; ++i) {
      for (int t = 0; t < T; ++t) {
        const int row = t * B + i;
        r[t] = ag.rewards[row];
        v[t] = ag.values[row];
        bv[t] = ag.bootstrap_values[row];
        d[t] = batch.dones[row];
        tr[t] = batch.truncations[row];
      }
      const auto lane_adv = compute_gae(r, v, d, tr, bv, config_.gamma, config_.gae_lambda);
      const auto lane_tgt = value_targets(lane_adv, v);
      for (int t = 0; t < T; ++t) {
        adv[a][t * B + i] = lane_adv[t];
        targets[a][t * B + i] = lane_tgt[t];
      }
    }
    normalize(adv[a]);
    const Moments m = moments(adv[a]);
    stats.agents[a].advantage_mean = m.mean;
    stats.agents[a].advantage_std = m.std;
  }

  const LossCoefficients coeffs{config_.clip_ratio, config_.value_coef, config_.entropy_coef};
  const nn::AdamConfig adam = config_.adam();
  std::array<double, kNumAgents> sum_pl{}, sum_vl{}, sum_ent{}, sum_clip{}, sum_norm{};
  int updates = 0;
  std::vector<int> order(B);
  for (int e = 0; e < config_.epochs_per_iteration; ++e) {
    for (int i = 0; i < B; ++i) order[i] = i;
    for (int i = B - 1; i > 0; --i) {
      std::swap(order[i], order[bounded(shuffle_rng_, static_cast<std::uint64_t>(i) + 1)]);
    }
    for (int mb = 0; mb < config_.minibatches_per_epoch; ++mb) {
      const std::vector<int> lanes(order.begin() + mb * lanes_per_mb,
                                   order.begin() + (mb + 1) * lanes_per_mb);
      const int L = lanes_per_mb;
      std::vector<int> rows(T * L);
      for (int t = 0; t < T; ++t) {
        for (int k = 0; k < L; ++k) rows[t * L + k] = t * B + lanes[k];
      }
      const nn::Matrix<float> obs = select_rows(batch.observations, rows);
      std::vector<std::uint8_t> resets(T * L);
      for (std::size_t k = 0; k < rows.size(); ++k) resets[k] = batch.resets[rows[k]];

      for (int a = 0; a < kNumAgents; ++a) {
        const AgentRollout& ag = batch.agents[a];
        std::vector<int> actions(T * L), prev(T * L);
        nn::Matrix<float> old_lp(T * L, 1), a_mb(T * L, 1), tgt(T * L, 1);
        for (std::size_t k = 0; k < rows.size(); ++k) {
          actions[k] = ag.actions[rows[k]];
          prev[k] = ag.prev_actions[rows[k]];
          old_lp(k, 0) = static_cast<float>(ag.log_probs[rows[k]]);
          a_mb(k, 0) = static_cast<float>(adv[a][rows[k]]);
          tgt(k, 0) = static_cast<float>(targets[a][rows[k]]);
        }
        const nn::RecurrentState<float> init{select_rows(ag.initial.h, lanes),
                                             select_rows(ag.initial.c, lanes)};
        auto& net = nets_[a];
        net.zero_grad();
        nn::Graph<float> g;
        const auto out = net.forward(g, obs, prev, resets, init, T);
        const PpoLoss loss = ppo_loss(g, out.logits, out.value, actions, old_lp, a_mb, tgt, coeffs);
        const double total = g.value(loss.total)(0, 0);
        if (!std::isfinite(total)) {
          std::ostringstream msg;
          msg << "non-finite " << kAgentTags[a] << " loss at iteration " << iteration_ + 1
              << " (epoch " << e << ", minibatch " << mb << "): policy " << loss.policy_loss
              << ", value " << loss.value_loss << ", entropy " << loss.entropy;
          throw TrainingDiverged(msg.str());
        }
        nn::NodeId objective = loss.total;
        if (loss_scale_[a] != 1.0) objective = g.scale(objective, static_cast<float>(loss_scale_[a]));
        g.backward(objective);
        const double norm = nn::clip_grad_norm(net.parameters(), config_.grad_clip_norm);
        if (!std::isfinite(norm)) {
          throw TrainingDiverged(std::string("non-finite ") + kAgentTags[a] +
                                 " gradient norm at iteration " + std::to_string(iteration_ + 1));
        }
        auto& st = stats.agents[a];
        st.max_clipped_grad_norm = std::max(st.max_clipped_grad_norm, nn::grad_norm(net.parameters()));
        if (nn::adam_step(net.parameters(), adam_[a], adam)) ++st.optimizer_steps;
        sum_pl[a] += loss.policy_loss;
        sum_vl[a] += loss.value_loss;
        sum_ent[a] += loss.entropy;
        sum_clip[a] += loss.clip_fraction;
        sum_norm[a] += norm;
      }
      ++updates;
    }
  }
  for (int a = 0; a < kNumAgents; ++a) {
    auto& st = stats.agents[a];
    st.policy_loss = sum_pl[a] / updates;
    st.value_loss = sum_vl[a] / updates;
    st.entropy = sum_ent[a] / updates;
    st.clip_fraction = sum_clip[a] / updates;
    st.grad_norm = sum_norm[a] / updates;
  }
}

TrainStats Trainer::iteration() {
  const std::int64_t before = env_steps_;
  const RolloutBatch batch = collect();
  TrainStats stats;
  stats.iteration_steps = static_cast<int>(env_steps_ - before);
  stats.episodes = static_cast<int>(batch.completed.size());
  std::array<double, kNumAgents> ret{};
  for (const auto& ep : batch.completed) {
    switch (ep.outcome) {
      case env::Outcome::kReachedGoal:
        ++stats.reached_goal;
        break;
      case env::Outcome::kLostGrasp:
        ++stats.lost_grasp;
        break;
      case env::Outcome::kRanOutOfTime:
        ++stats.ran_out_of_time;
        break;
    }
    for (int a = 0; a < kNumAgents; ++a) ret[a] += ep.discounted_return[a];
  }
  for (int a = 0; a < kNumAgents; ++a) {
    stats.agents[a].mean_return = stats.episodes > 0 ? ret[a] / stats.episodes : 0.0;
  }
  update(batch, stats);
  ++iteration_;
  stats.iteration = iteration_;
  stats.env_steps = env_steps_;
  return stats;
}

void Trainer::save_checkpoints(const std::filesystem::path& gripper,
                               const std::filesystem::path& cauter) const {
  const std::uint64_t h = config_hash();
  save_checkpoint(nets_[0], adam_[0], env_steps_, iteration_, h, gripper);
  save_checkpoint(nets_[1], adam_[1], env_steps_, iteration_, h, cauter);
}

void Trainer::load_checkpoints(const std::filesystem::path& gripper,
                               const std::filesystem::path& cauter) {
  auto g_net = nets_[0];
  auto c_net = nets_[1];
  auto g_adam = adam_[0];
  auto c_adam = adam_[1];
  const AgentCheckpoint g = load_checkpoint_into(gripper, g_net, &g_adam);
  const AgentCheckpoint c = load_checkpoint_into(cauter, c_net, &c_adam);
  nets_ = {std::move(g_net), std::move(c_net)};
  adam_ = {std::move(g_adam), std::move(c_adam)};
  env_steps_ = g.env_steps;
  iteration_ = g.iteration;
  (void)c;
}

void Trainer::save_state(const std::filesystem::path& path) const {
  std::ostringstream buf(std::ios::binary);
  buf.write(kStateMagic, sizeof kStateMagic);
  BinaryWriter w(buf);
  w.pod(kStateVersion);
  w.pod(config_hash());
  w.pod<std::int64_t>(iteration_);
  w.pod<std::int64_t>(env_steps_);
  w.str(rng_text(shuffle_rng_));
  w.pod<std::uint64_t>(lanes_.size());
  for (const Lane& lane : lanes_) {
    w.pod<std::uint8_t>(lane.needs_reset ? 1 : 0);
    if (!lane.needs_reset) env::write_state(w, lane.env->state());
    w.str(rng_text(lane.rng));
    w.pod(lane.episodes_started);
    w.vec(lane.observation);
    for (int a = 0; a < kNumAgents; ++a) {
      w.pod<std::int32_t>(lane.prev_action[a]);
      w.pod(lane.discounted_return[a]);
    }
    w.pod(lane.discount);
  }
  for (const auto& r : recurrent_) {
    write_matrix(w, r.h);
    write_matrix(w, r.c);
  }
  const std::string body = buf.str();
  Fnv1a h;
  h.bytes(body.data(), body.size());
  const std::uint64_t checksum = h.value();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write trainer state " + path.string());
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  out.write(reinterpret_cast<const char*>(&checksum), sizeof checksum);
  if (!out) throw IoError("failed writing trainer state " + path.string());
}

void Trainer::load_state(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open trainer state " + path.string());
  const std::string data((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  std::uint64_t stored = 0;
  if (data.size() < sizeof kStateMagic + sizeof stored ||
      std::memcmp(data.data(), kStateMagic, sizeof kStateMagic) != 0) {
    throw IoError("not a trainer state file: " + path.string());
  }
  std::memcpy(&stored, data.data() + data.size() - sizeof stored, sizeof stored);
  Fnv1a h;
  h.bytes(data.data(), data.size() - sizeof stored);
  if (h.value() != stored) throw IoError("trainer state checksum mismatch: " + path.string());

  std::istringstream buf(
      data.substr(sizeof kStateMagic, data.size() - sizeof kStateMagic - sizeof stored),
      std::ios::binary);
  BinaryReader r(buf);
  if (r.pod<std::uint32_t>() != kStateVersion) throw IoError("unsupported trainer state version");
  if (r.pod<std::uint64_t>() != config_hash()) {
    throw ConfigError("trainer state " + path.string() + " was written under a different config");
  }
  const auto iteration = r.pod<std::int64_t>();
  const auto env_steps = r.pod<std::int64_t>();
  const auto shuffle = rng_from_text(r.str());
  if (r.pod<std::uint64_t>() != lanes_.size()) throw IoError("trainer state: lane count mismatch");

  struct Loaded {
    bool needs_reset = true;
    std::optional<env::WorldState> state;
    std::mt19937_64 rng;
    std::uint64_t episodes = 0;
    std::vector<float> observation;
    std::array<int, kNumAgents> prev{};
    std::array<double, kNumAgents> ret{};
    double discount = 1.0;
  };
  std::vector<Loaded> loaded(lanes_.size());
  for (auto& l : loaded) {
    l.needs_reset = r.pod<std::uint8_t>() != 0;
    if (!l.needs_reset) l.state = env::read_state(r, *assets_);
    l.rng = rng_from_text(r.str());
    l.episodes = r.pod<std::uint64_t>();
    l.observation = r.vec<float>();
    for (int a = 0; a < kNumAgents; ++a) {
      l.prev[a] = r.pod<std::int32_t>();
      l.ret[a] = r.pod<double>();
    }
    l.discount = r.pod<double>();
  }
  std::array<nn::RecurrentState<float>, kNumAgents> rec;
  for (int a = 0; a < kNumAgents; ++a) {
    rec[a].h = read_matrix(r, recurrent_[a].h.rows(), recurrent_[a].h.cols());
    rec[a].c = read_matrix(r, recurrent_[a].c.rows(), recurrent_[a].c.cols());
  }

  iteration_ = iteration;
  env_steps_ = env_steps;
  shuffle_rng_ = shuffle;
  for (std::size_t i = 0; i < lanes_.size(); ++i) {
    Lane& lane = lanes_[i];
    Loaded& l = loaded[i];
    lane.needs_reset = l.needs_reset;
    if (l.state) lane.env->set_state(std::move(*l.state));
    lane.rng = l.rng;
    lane.episodes_started = l.episodes;
    lane.observation = std::move(l.observation);
    lane.prev_action = l.prev;
    lane.discounted_return = l.ret;
    lane.discount = l.discount;
  }
  recurrent_ = std::move(rec);
}

}  // namespace cholec::ppo
