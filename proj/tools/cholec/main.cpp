#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <pthread.h>
#include <thread>

#include <CLI11.hpp>

#include "cholec/common/errors.hpp"
#include "cholec/common/hash.hpp"
#include "cholec/eval/harness.hpp"
#include "cholec/ppo/checkpoint.hpp"
#include "cholec/ppo/trainer.hpp"
#include "cholec/ppo/verify.hpp"
#include "cholec/session/server.hpp"
#include "cholec/sim/scene.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace cholec;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string obs_mode;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON file with optional env and ppo sections")
      ->envname("CHOLEC_CONFIG");
  cmd->add_option("--seed", c.seed, "Seed")->envname("CHOLEC_SEED");
  cmd->add_option("--obs-mode", c.obs_mode, "Observation mode")
      ->check(CLI::IsMember({"image", "features"}))
      ->envname("CHOLEC_OBS_MODE");
}

cli::RunConfig load(const Common& c) {
  cli::RunConfig rc = cli::load_run_config(c.config, cli::process_environment());
  if (!c.obs_mode.empty()) rc.env.obs_mode = env::obs_mode_from_string(c.obs_mode);
  return rc;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

// Frozen copies of the trainer's networks, evaluated like checkpoints would be.
eval::Aggregate evaluate_nets(const ppo::Trainer& trainer, int episodes, std::uint64_t seed_base) {
  const env::EnvConfig& cfg = trainer.env_config();
  env::CholecEnv env(cfg);
  eval::Team team(
      std::make_unique<eval::PolicyController>(trainer.net(0), env::Instrument::kGripper, false),
      std::make_unique<eval::PolicyController>(trainer.net(1), env::Instrument::kCauter, false));
  std::vector<eval::EpisodeMetrics> m;
  for (int k = 0; k < episodes; ++k) {
    m.push_back(eval::run_episode(env, team, seed_base + k, false).metrics);
  }
  return eval::aggregate(m);
}

struct TrainArgs {
  Common common;
  std::int64_t steps = 5'000'000;
  std::string out = "run";
  std::string ckpt_gripper;
  std::string ckpt_cauter;
  bool resume = false;
  int checkpoint_every = 50;
  int eval_every = 0;
  int eval_episodes = 100;
  double stop_at_success = 0.0;
  bool quiet = false;
};

int run_train(const TrainArgs& a) {
  cli::RunConfig rc = load(a.common);
  if (a.common.seed) rc.ppo.seed = *a.common.seed;
  const fs::path out(a.out);
  fs::create_directories(out);
  const fs::path g_path = a.ckpt_gripper.empty() ? out / "gripper.ckpt" : fs::path(a.ckpt_gripper);
  const fs::path c_path = a.ckpt_cauter.empty() ? out / "cauter.ckpt" : fs::path(a.ckpt_cauter);
  const fs::path state_path = out / "trainer.state";
  const fs::path telemetry_path = out / "telemetry.csv";
  const fs::path eval_path = out / "eval.csv";

  ppo::Trainer trainer(rc.env, rc.ppo);
  if (a.resume) {
    trainer.load_checkpoints(g_path, c_path);
    trainer.load_state(state_path);
    std::cerr << "resumed at iteration " << trainer.iterations() << ", " << trainer.env_steps()
              << " env steps\n";
  } else {
    write_text(telemetry_path, ppo::telemetry_header() + "\n");
    if (a.eval_every > 0) write_text(eval_path, "iteration,env_steps,success_pct,lost_grasp,ran_out_of_time\n");
  }
  write_text(out / "config.json", cli::to_json(rc).dump(2) + "\n");
  const auto save = [&] {
    trainer.save_checkpoints(g_path, c_path);
    trainer.save_state(state_path);
  };
  save();

  std::ofstream telemetry(telemetry_path, std::ios::app);
  while (trainer.env_steps() < a.steps) {
    const ppo::TrainStats s = trainer.iteration();
    telemetry << ppo::telemetry_row(s) << "\n" << std::flush;
    if (!a.quiet) {
      std::fprintf(stderr, "iter %lld steps %lld episodes %d goal %.2f lost %.2f timeout %.2f\n",
                   static_cast<long long>(s.iteration), static_cast<long long>(s.env_steps),
                   s.episodes, s.fraction(env::Outcome::kReachedGoal),
                   s.fraction(env::Outcome::kLostGrasp), s.fraction(env::Outcome::kRanOutOfTime));
    }
    bool stop = false;
    if (a.eval_every > 0 && s.iteration % a.eval_every == 0) {
      const eval::Aggregate agg = evaluate_nets(trainer, a.eval_episodes, 1'000'000'000ULL);
      std::ofstream ev(eval_path, std::ios::app);
      ev << s.iteration << ',' << s.env_steps << ',' << agg.success_rate << ',' << agg.lost_grasp
         << ',' << agg.ran_out_of_time << "\n";
      if (!a.quiet) std::fprintf(stderr, "eval: success %.1f%%\n", agg.success_rate);
      stop = a.stop_at_success > 0.0 && agg.success_rate >= 100.0 * a.stop_at_success;
    }
    if (stop || s.iteration % a.checkpoint_every == 0) save();
    if (stop) break;
  }
  save();
  std::cout << "checkpoints: " << g_path.string() << " " << c_path.string() << "\n";
  return 0;
}

struct EvalArgs {
  Common common;
  int episodes = 10;
  std::string team;
  std::string ckpt_gripper;
  std::string ckpt_cauter;
  std::string out = "report";
  bool replays = false;
};

eval::TeamSpec team_from(const std::string& text, const std::string& g, const std::string& c) {
  std::string spec = text;
  if (spec.empty()) spec = !g.empty() && !c.empty() ? "policy+policy" : "heuristic+heuristic";
  eval::TeamSpec t = eval::parse_team(spec);
  t.gripper.checkpoint = g;
  t.cauter.checkpoint = c;
  return t;
}

int run_eval(const EvalArgs& a) {
  const cli::RunConfig rc = load(a.common);
  const eval::TeamSpec team = team_from(a.team, a.ckpt_gripper, a.ckpt_cauter);
  std::vector<eval::ReplayLog> replays;
  const std::uint64_t seed = a.common.seed.value_or(0);
  const eval::EvalReport report =
      eval::evaluate(rc.env, team, a.episodes, seed, a.replays ? &replays : nullptr);
  const auto files = eval::write_report(report, replays, a.out);
  const eval::Aggregate& g = report.aggregate;
  std::printf("team %s, %d episodes, seeds %llu-%llu\n", report.team.c_str(), g.episodes,
              static_cast<unsigned long long>(seed),
              static_cast<unsigned long long>(seed + g.episodes - 1));
  std::printf("success %.1f%%  (goal %d, lost grasp %d, out of time %d)\n", g.success_rate,
              g.reached_goal, g.lost_grasp, g.ran_out_of_time);
  const std::pair<const char*, const eval::Summary*> rows[] = {
      {"time [s]", &g.time_s},      {"col GL", &g.col_gl},         {"col CL", &g.col_cl},
      {"col CG", &g.col_cg},        {"col II", &g.col_ii},         {"PL gripper [mm]", &g.pl_gripper_mm},
      {"PL cauter [mm]", &g.pl_cauter_mm}};
  for (const auto& [name, s] : rows) std::printf("%-16s %10.2f +- %.2f\n", name, s->mean, s->std);
  for (const auto& f : files) std::printf("wrote %s\n", f.string().c_str());
  return 0;
}

struct PlayArgs {
  Common common;
  std::string team = "human+policy";
  std::string ckpt_gripper;
  std::string ckpt_cauter;
  int port = 8765;
  std::string bind = "127.0.0.1";
  int episodes = 0;
  double gain = 1.0;
  std::int64_t ticks = 0;
};

int run_play(const PlayArgs& a) {
  const cli::RunConfig rc = load(a.common);
  session::SessionConfig sc;
  sc.env = rc.env;
  sc.team = team_from(a.team, a.ckpt_gripper, a.ckpt_cauter);
  if (a.port < 0 || a.port > 65535) throw ConfigError("--port must lie in 0..65535");
  sc.port = static_cast<std::uint16_t>(a.port);
  sc.bind_address = a.bind;
  sc.max_session_episodes = a.episodes;
  sc.seed_base = a.common.seed.value_or(0);
  sc.input_gain = a.gain;

  // Signals are taken by a dedicated thread so the server can be stopped cleanly.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  session::SessionServer server(sc);
  std::printf("session on ws://%s:%u/session  (health: /health, config: /config)\n",
              sc.bind_address.c_str(), server.port());
  std::fflush(stdout);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  });
  server.run(a.ticks);
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

int run_replay_cmd(const std::string& file, const std::string& frames) {
  const eval::ReplayLog log = eval::load_replay(file);
  std::ofstream out;
  if (!frames.empty()) {
    out.open(frames, std::ios::trunc);
    if (!out) throw IoError("cannot write " + frames);
  }
  double cum_g = 0.0, cum_c = 0.0;
  const auto check = eval::run_replay(log, [&](const env::CholecEnv& e, const env::StepResult& r) {
    if (!out.is_open()) return;
    session::StateFrame f = session::make_state_frame(e);
    cum_g += r.reward_gripper;
    cum_c += r.reward_cauter;
    f.tick = f.step;
    f.reward_gripper = r.reward_gripper;
    f.reward_cauter = r.reward_cauter;
    f.cumulative_gripper = cum_g;
    f.cumulative_cauter = cum_c;
    out << session::to_json(f).dump() << "\n";
  });
  std::printf("replayed %d steps, outcome %s, digests %s\n", check.steps,
              env::to_string(check.metrics.outcome).c_str(), check.matches ? "match" : "DIFFER");
  if (!check.matches) {
    std::fprintf(stderr, "first mismatch at state %d\n", check.first_mismatch);
    return 1;
  }
  return 0;
}

int run_gradcheck(std::uint64_t seed, bool conv) {
  ppo::SurrogateCheckOptions o;
  o.seed = seed;
  if (conv) o.arch = ppo::small_image_arch();
  const auto r = ppo::check_surrogate_gradients(o);
  nn::PolicyValueNet<double> net(o.arch, "check");
  std::printf("parameters %lld, entries checked %lld, eps %g\n",
              static_cast<long long>(net.parameter_count()), static_cast<long long>(r.checked), o.eps);
  std::printf("max relative error %.3e (worst tensor %s)\n", r.max_relative_error,
              r.worst_parameter.c_str());
  const bool ok = r.max_relative_error < 1e-4;
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

int run_scene(const std::string& out_path, const std::string& in_path) {
  const sim::Scene scene = in_path.empty() ? sim::make_default_scene() : sim::load_scene(in_path);
  if (out_path.empty() || out_path == "-") {
    std::cout << sim::scene_to_json(scene).dump(2) << "\n";
  } else {
    sim::save_scene(scene, out_path);
    std::printf("wrote %s (%zu gallbladder vertices, %zu targets)\n", out_path.c_str(),
                scene.gallbladder.vertices.size(), scene.targets.size());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-agent laparoscopic cholecystectomy environment, trainer and session service"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train both agents with independent PPO");
  add_common(train, ta.common);
  train->add_option("--steps", ta.steps, "Environment steps to train for")->envname("CHOLEC_STEPS");
  train->add_option("--out", ta.out, "Output directory")->envname("CHOLEC_OUT");
  train->add_option("--checkpoint-gripper", ta.ckpt_gripper, "Gripper checkpoint path")
      ->envname("CHOLEC_CHECKPOINT_GRIPPER");
  train->add_option("--checkpoint-cauter", ta.ckpt_cauter, "Cauter checkpoint path")
      ->envname("CHOLEC_CHECKPOINT_CAUTER");
  train->add_flag("--resume", ta.resume, "Continue from the checkpoints and trainer state in --out");
  train->add_option("--checkpoint-every", ta.checkpoint_every, "Iterations between checkpoints")
      ->check(CLI::PositiveNumber);
  train->add_option("--eval-every", ta.eval_every, "Iterations between frozen-policy evaluations");
  train->add_option("--eval-episodes", ta.eval_episodes, "Episodes per evaluation")
      ->check(CLI::PositiveNumber);
  train->add_option("--stop-at-success", ta.stop_at_success,
                    "Stop once an evaluation reaches this success fraction");
  train->add_flag("--quiet", ta.quiet, "No per-iteration progress on stderr");

  EvalArgs ea;
  auto* evalc = app.add_subcommand("eval", "Evaluate a team and write a report");
  add_common(evalc, ea.common);
  evalc->add_option("--episodes", ea.episodes, "Number of episodes")
      ->check(CLI::PositiveNumber)
      ->envname("CHOLEC_EPISODES");
  evalc->add_option("--team", ea.team, "Team, e.g. policy+policy or heuristic+random")
      ->envname("CHOLEC_TEAM");
  evalc->add_option("--checkpoint-gripper", ea.ckpt_gripper, "Gripper checkpoint")
      ->envname("CHOLEC_CHECKPOINT_GRIPPER");
  evalc->add_option("--checkpoint-cauter", ea.ckpt_cauter, "Cauter checkpoint")
      ->envname("CHOLEC_CHECKPOINT_CAUTER");
  evalc->add_option("--out", ea.out, "Report directory")->envname("CHOLEC_OUT");
  evalc->add_flag("--replays", ea.replays, "Also write one replay file per episode");

  PlayArgs pa;
  auto* play = app.add_subcommand("play", "Serve a live session over websocket");
  add_common(play, pa.common);
  play->add_option("--team", pa.team, "Team, e.g. human+policy or human+human/switch")
      ->envname("CHOLEC_TEAM");
  play->add_option("--checkpoint-gripper", pa.ckpt_gripper, "Gripper checkpoint")
      ->envname("CHOLEC_CHECKPOINT_GRIPPER");
  play->add_option("--checkpoint-cauter", pa.ckpt_cauter, "Cauter checkpoint")
      ->envname("CHOLEC_CHECKPOINT_CAUTER");
  play->add_option("--port", pa.port, "Listen port (0 picks a free one)")->envname("CHOLEC_PORT");
  play->add_option("--bind", pa.bind, "Listen address")->envname("CHOLEC_BIND");
  play->add_option("--episodes", pa.episodes, "Episodes before the session closes (0: no limit)")
      ->envname("CHOLEC_EPISODES");
  play->add_option("--gain", pa.gain, "Multiplier on the human input displacement per tick");
  play->add_option("--ticks", pa.ticks, "Stop after this many ticks (0: run until interrupted)");

  std::string replay_file, frames;
  auto* replay = app.add_subcommand("replay", "Re-run a replay file and verify its digests");
  replay->add_option("file", replay_file, "Replay (.jsonl)")->required()->check(CLI::ExistingFile);
  replay->add_option("--frames", frames, "Write one state frame per step (JSON lines)");

  std::uint64_t gc_seed = 0;
  bool gc_conv = false;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the PPO gradients");
  gradcheck->add_option("--seed", gc_seed, "Seed")->envname("CHOLEC_SEED");
  gradcheck->add_flag("--conv", gc_conv, "Check a small convolutional network instead");

  std::string scene_out, scene_in;
  auto* scene = app.add_subcommand("scene", "Write the default scene (or re-dump a scene file)");
  scene->add_option("--out", scene_out, "Output file ('-' or empty: stdout)");
  scene->add_option("--in", scene_in, "Scene file to load and dump instead")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    if (*train) return run_train(ta);
    if (*evalc) return run_eval(ea);
    if (*play) return run_play(pa);
    if (*replay) return run_replay_cmd(replay_file, frames);
    if (*gradcheck) return run_gradcheck(gc_seed, gc_conv);
    if (*scene) return run_scene(scene_out, scene_in);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
