// Command-line front end for the hand-object to robot pipeline.

#include <iostream>

#include <CLI11.hpp>

#include "hoi/pipeline.hpp"

namespace {

using namespace hoi;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::vector<std::string> robots;
  std::string out;
};

PipelineConfig make_config(const Globals& g, const std::vector<std::string>& clips) {
  PipelineConfig c = g.config.empty() ? PipelineConfig{} : load_config(g.config);
  if (g.seed) c.seed = *g.seed;
  if (g.jobs) {
    if (*g.jobs < 1) throw ConfigError("--jobs must be at least 1");
    c.jobs = *g.jobs;
  }
  if (!g.out.empty()) c.output_dir = g.out;
  if (!clips.empty()) c.clips.assign(clips.begin(), clips.end());
  select_robots(c, g.robots);
  return c;
}

int report(const RunResult& r) {
  for (const ClipOutcome& o : r.clips) {
    if (o.error) std::cerr << "clip " << o.clip_id << " failed: " << *o.error << "\n";
  }
  for (const auto& w : r.summary.at("warnings")) std::cerr << "warning: " << w.get<std::string>() << "\n";
  std::cout << r.summary.at("episodes").get<int>() << " episode(s) from "
            << r.summary.at("clips").at("succeeded").get<int>() << "/"
            << r.summary.at("clips").at("total").get<int>() << " clip(s)\n";
  return r.exit_code;
}

int cmd_canonicalize(const PipelineConfig& c) {
  const fs::path dir = c.output_dir / "canonical";
  fs::create_directories(dir);
  int failed = 0;
  for (const fs::path& m : c.clips) {
    try {
      const CanonicalClip cc = canonicalize_clip(load_clip(m), c);
      Json j;
      j["schema_version"] = kSchemaVersion;
      j["clip_id"] = cc.clip.manifest.clip_id;
      j["canonical"] = canonical_json(cc);
      j["warnings"] = cc.warnings;
      write_text(dir / (cc.clip.manifest.clip_id + ".json"), dump(j));
    } catch (const Error& e) {
      ++failed;
      std::cerr << m.string() << ": " << e.what() << "\n";
    }
  }
  return !c.clips.empty() && failed == static_cast<int>(c.clips.size()) ? 1 : 0;
}

int cmd_replay(const PipelineConfig& c, const fs::path& trajectory) {
  if (c.robots.empty()) throw ConfigError("no robot chain registered");
  EpisodeRecord e;
  e.id = trajectory.parent_path().filename().string();
  e.trajectory = load_trajectory(trajectory);
  replay_episode(e, c.robots, c.ik);
  const fs::path dir = c.output_dir.empty() || c.output_dir == "out" ? trajectory.parent_path() : c.output_dir;
  fs::create_directories(dir);
  Json rep = Json::object();
  bool any = false;
  for (const auto& [name, joints] : e.joints) {
    std::string lines;
    const auto& ee = e.ee.at(name);
    for (std::size_t t = 0; t < joints.size(); ++t) {
      Json q = Json::array();
      for (Eigen::Index i = 0; i < joints[t].size(); ++i) q.push_back(joints[t][i]);
      lines += Json{{"schema_version", kSchemaVersion}, {"t", t}, {"q", q}, {"ee", pose_to_json(ee[t])}}.dump() + "\n";
    }
    write_text(dir / ("joints_" + name + ".jsonl"), lines);
    const ReplayReport& r = e.replay.at(name);
    any = any || r.feasible;
    rep[name] = Json{{"feasible", r.feasible},
                     {"frames_solved", joints.size()},
                     {"failed_frame", r.failed_frame ? Json(*r.failed_frame) : Json()},
                     {"failure", r.failure},
                     {"max_joint_step", r.max_joint_step}};
  }
  std::cout << dump(rep);
  return any ? 0 : 1;
}

int cmd_metrics(const std::vector<std::string>& dirs, double fps, const std::string& out) {
  std::string csv = csv_header() + "\n";
  for (const std::string& d : dirs) {
    EpisodeRecord e;
    e.id = fs::path(d).filename().string();
    e.trajectory = load_trajectory(fs::path(d) / "trajectory.jsonl");
    e.segments = segment_trajectory(e.trajectory);
    if (fs::exists(fs::path(d) / "object.jsonl")) {
      e.object.emplace();
      for (const Json& j : read_jsonl(fs::path(d) / "object.jsonl")) e.object->push_back(pose_from_json(j.at("pose")));
      if (e.object->size() != e.trajectory.size()) throw Error(d + ": object and trajectory lengths differ");
    }
    score_episode(e, fps, std::nullopt, 1);
    std::cout << e.id << " " << to_json(e.metrics) << "\n";
    csv += csv_row(e.id, e.metrics) + "\n";
  }
  if (!out.empty()) {
    fs::create_directories(out);
    write_text(fs::path(out) / "metrics.csv", csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retarget hand-object clips to robot episodes"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "pipeline config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "random seed for augmentation");
  app.add_option("--jobs", g.jobs, "clips processed in parallel");
  app.add_option("--robot", g.robots, "restrict to this robot (repeatable)");
  app.add_option("--out", g.out, "output directory");

  std::vector<std::string> clips;
  struct StageCmd {
    const char* name;
    const char* help;
    Stage stage;
  };
  const StageCmd stages[] = {
      {"retarget", "write base gripper trajectories", Stage::retarget},
      {"check", "retarget and run the penetration check", Stage::check},
      {"augment", "write base and augmented episodes without replay", Stage::augment},
      {"run", "full pipeline including robot replay", Stage::replay},
  };
  std::vector<std::pair<CLI::App*, Stage>> stage_cmds;
  for (const StageCmd& s : stages) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("clips", clips, "clip manifests (default: [input] clips)");
    stage_cmds.emplace_back(sub, s.stage);
  }
  CLI::App* canon = app.add_subcommand("canonicalize", "write canonical transforms per clip");
  canon->add_option("clips", clips, "clip manifests");

  std::string trajectory;
  CLI::App* replay = app.add_subcommand("replay", "replay a trajectory.jsonl on the configured robots");
  replay->add_option("trajectory", trajectory)->required()->check(CLI::ExistingFile);

  std::vector<std::string> episode_dirs;
  double fps = 30;
  CLI::App* metrics = app.add_subcommand("metrics", "recompute trajectory metrics of episode directories");
  metrics->add_option("episodes", episode_dirs)->required();
  metrics->add_option("--fps", fps, "frame rate")->check(CLI::PositiveNumber);

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (metrics->parsed()) return cmd_metrics(episode_dirs, fps, g.out);
    const PipelineConfig c = make_config(g, clips);
    if (canon->parsed()) return cmd_canonicalize(c);
    if (replay->parsed()) return cmd_replay(c, trajectory);
    for (const auto& [sub, stage] : stage_cmds) {
      if (sub->parsed()) return report(run_pipeline(c, stage));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
