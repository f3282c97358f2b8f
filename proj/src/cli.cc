#include "pivot/cli.h"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <optional>
#include <sstream>

#include "pivot/artifacts.h"
#include "pivot/baselines.h"
#include "pivot/checkpoint.h"
#include "pivot/config.h"
#include "pivot/errors.h"
#include "pivot/evalsuite.h"
#include "pivot/hash.h"
#include "pivot/nnet.h"
#include "pivot/tacrender.h"
#include "pivot/tacrepr.h"

namespace pivot {
namespace {

namespace fs = std::filesystem;

// Options shared by every configuration-driven subcommand.
struct CommonOptions {
  std::string config;
  std::vector<std::string> sets;
  bool allow_out_of_range = false;
  int threads = 1;
  std::string obs;
  std::string repr;
  bool aug = false;
  std::optional<uint64_t> seed;
};

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--config", o.config, "INI config file")->check(CLI::ExistingFile);
  sub->add_option("--set", o.sets, "override a config key, section.key=value (repeatable)");
  sub->add_flag("--allow-out-of-range", o.allow_out_of_range, "accept task ranges outside the supported ones");
  sub->add_option("--threads", o.threads, "worker threads; never changes results")->check(CLI::PositiveNumber);
  sub->add_option("--obs", o.obs, "observation mode: tactile, oracle or proprio");
  sub->add_option("--repr", o.repr, "tactile representation: rgb, diff or binary");
  sub->add_flag("--aug", o.aug, "enable training-time augmentation");
  sub->add_option("--seed", o.seed, "training seed");
}

RunConfig resolve_config(const CommonOptions& o, std::vector<std::string> extra = {}) {
  std::vector<std::string> overrides = o.sets;
  if (!o.obs.empty()) overrides.push_back("task.obs=" + o.obs);
  if (!o.repr.empty()) overrides.push_back("repr.mode=" + o.repr);
  if (o.aug) overrides.push_back("repr.augment=true");
  if (o.seed) overrides.push_back("train.seed=" + std::to_string(*o.seed));
  overrides.insert(overrides.end(), extra.begin(), extra.end());
  RunConfig cfg = load_config(o.config.empty() ? std::nullopt : std::optional<fs::path>(o.config), overrides,
                              o.allow_out_of_range);
  cfg.train.threads = o.threads;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

fs::path start_run(const RunConfig& cfg, std::ostream& out) {
  const fs::path dir = make_run_dir(cfg.digest_hex());
  write_text(dir / "config.ini", cfg.serialize());
  out << "run directory: " << dir.string() << "\n";
  return dir;
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string w;
  while (std::getline(ss, w, ',')) {
    if (!w.empty()) out.push_back(w);
  }
  return out;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
  CommonOptions common;
  std::optional<int64_t> steps;
  std::string resume;
};

int run_train(const TrainOptions& o, std::ostream& out) {
  std::vector<std::string> extra;
  if (o.steps) extra.push_back("train.total_steps=" + std::to_string(*o.steps));
  RunConfig cfg = resolve_config(o.common, extra);
  fs::path dir;
  std::optional<fs::path> resume;
  if (!o.resume.empty()) {
    dir = o.resume;
    resume = dir / "final.ckpt";
    if (!fs::exists(*resume)) throw UsageError("no checkpoint to resume in " + dir.string());
    out << "resuming in " << dir.string() << "\n";
  } else {
    dir = start_run(cfg, out);
  }
  EnvConfig env = cfg.env;
  const TrainOutputs res = train(env, cfg.train, dir, resume, [&](const std::string& line) {
    out << line << "\n";
    out.flush();
  });
  char buf[256];
  std::snprintf(buf, sizeof(buf), "final eval: success %.3f  deviation %.3f  reward %.2f\n",
                res.final_eval.success_rate, res.final_eval.mean_deviation, res.final_eval.mean_reward);
  out << buf;
  out << "metrics: " << res.metrics_csv.string() << "\nbest: " << res.best_checkpoint.string()
      << "\nfinal: " << res.final_checkpoint.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  CommonOptions common;
  std::string ckpt;
  std::string policy = "learned";
  std::string oracle_ckpt;
  std::optional<int> episodes;
  std::string seeds;
};

std::vector<std::string> eval_overrides(const std::optional<int>& episodes, const std::string& seeds,
                                        const char* episodes_key) {
  std::vector<std::string> extra;
  if (episodes) extra.push_back(std::string(episodes_key) + "=" + std::to_string(*episodes));
  if (!seeds.empty()) extra.push_back("eval.seeds=" + seeds);
  return extra;
}

int run_eval(const EvalOptions& o, std::ostream& out) {
  RunConfig cfg = resolve_config(o.common, eval_overrides(o.episodes, o.seeds, "eval.episodes"));
  EnvConfig env = cfg.env;
  PolicyFactory policy;
  std::string label = o.policy;
  if (o.policy == "learned") {
    if (o.ckpt.empty()) throw UsageError("eval: --ckpt is required for the learned policy");
    policy = mean_action_policy(load_policy_params(o.ckpt, env));
  } else if (o.policy == "pca") {
    if (o.oracle_ckpt.empty()) throw UsageError("eval: --policy pca needs --oracle-ckpt");
    env.obs = ObsMode::kOracleAngle;
    policy = pca_policy(load_policy_params(o.oracle_ckpt, env));
    env = pca_env_config(env);
  } else {
    throw UsageError("eval: unknown policy '" + o.policy + "' (learned or pca)");
  }
  const fs::path dir = start_run(cfg, out);
  const EvalReport report = evaluate(env, policy, cfg.eval.episodes, cfg.eval.seeds, cfg.train.threads, label);
  write_reports_csv(dir / "eval.csv", {report});
  out << format_report_table({report});
  return kExitOk;
}

// ---------------------------------------------------------------- shift-eval

int run_shift_eval(const EvalOptions& o, std::ostream& out) {
  RunConfig cfg = resolve_config(o.common, eval_overrides(o.episodes, o.seeds, "eval.shift_episodes"));
  if (o.ckpt.empty()) throw UsageError("shift-eval: --ckpt is required");
  const EnvConfig env = cfg.env;
  const PolicyFactory policy = mean_action_policy(load_policy_params(o.ckpt, env));
  const fs::path dir = start_run(cfg, out);
  const ShiftReport r =
      shift_evaluate(env, policy, default_shift_suite(), cfg.eval.shift_episodes, cfg.eval.seeds, cfg.train.threads);
  std::vector<EvalReport> all{r.clean};
  all.insert(all.end(), r.shifted.begin(), r.shifted.end());
  write_reports_csv(dir / "shift.csv", all);
  std::ostringstream drops;
  drops << "shift,success_mean,drop\n";
  char buf[256];
  for (size_t i = 0; i < r.shifted.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f\n", r.shifted[i].label.c_str(), r.shifted[i].overall.success_mean,
                  r.drops[i]);
    drops << buf;
  }
  std::snprintf(buf, sizeof(buf), "mean,,%.6f\n", r.mean_drop);
  drops << buf;
  write_text(dir / "shift_drops.csv", drops.str());
  out << format_report_table(all);
  std::snprintf(buf, sizeof(buf), "mean success drop %.3f\n", r.mean_drop);
  out << buf;
  return kExitOk;
}

// ---------------------------------------------------------------- gridsearch-phi

struct PhiOptions {
  CommonOptions common;
  std::string target = "imprint";
};

int run_gridsearch(const PhiOptions& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o.common);
  PhiTarget target;
  if (o.target == "imprint") {
    target = PhiTarget::kOpticalImprint;
  } else if (o.target == "patch") {
    target = PhiTarget::kPatchMask;
  } else {
    throw UsageError("gridsearch-phi: --target must be imprint or patch");
  }
  const fs::path dir = start_run(cfg, out);
  const PhiSearchResult r = gridsearch_phi(cfg.env.render, cfg.eval.phi_candidates, cfg.eval.phi_frames,
                                           cfg.train.seed, cfg.env.noise_sigma, target, cfg.env.dynamics);
  std::ostringstream csv;
  csv << "phi,mean_iou\n";
  char buf[128];
  for (size_t k = 0; k < r.candidates.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.6g,%.6f\n", r.candidates[k], r.mean_iou[k]);
    csv << buf;
    out << buf;
  }
  write_text(dir / "phi.csv", csv.str());
  std::snprintf(buf, sizeof(buf), "best phi %.6g\n", r.best_phi);
  out << buf;
  return kExitOk;
}

// ---------------------------------------------------------------- render-demo

struct RenderOptions {
  CommonOptions common;
  int frames = 5;
};

int run_render_demo(const RenderOptions& o, std::ostream& out) {
  if (o.frames < 1) throw UsageError("render-demo: --frames must be positive");
  const RunConfig cfg = resolve_config(o.common);
  const fs::path dir = start_run(cfg, out);
  Rng rng(cfg.train.seed);
  const SceneSpec spec = sample_scene(rng, cfg.env.families, cfg.env.ranges);
  SceneState state = initial_state(spec, cfg.env.ranges.tip_clearance.lo, cfg.env.dynamics);
  const TactileFrame canonical = canonical_image(cfg.env.render);
  write_png(dir / "canonical.png", canonical.rgb);
  std::ostringstream csv;
  csv << "frame,sensor,family,rel_deg,depth_mm,patch_pixels,binary_pixels,pca_rel_deg\n";
  const double lo = cfg.env.ranges.target_rel_angle.lo, hi = cfg.env.ranges.init_rel_angle.hi;
  for (int k = 0; k < o.frames; ++k) {
    state.rel_angle = o.frames == 1 ? hi : hi + (lo - hi) * k / (o.frames - 1);
    for (Sensor sensor : {Sensor::kLeft, Sensor::kRight}) {
      const PatchGeometry patch = contact_patch(state, sensor, cfg.env.dynamics);
      TactileFrame frame = render_phong(heightmap_from_patch(patch, cfg.env.render), cfg.env.render, sensor);
      add_pixel_noise(frame.rgb, cfg.env.noise_sigma, rng);
      const char* side = sensor == Sensor::kLeft ? "left" : "right";
      char name[64];
      ProcessedImage binary;
      for (ReprMode mode : {ReprMode::kRgb, ReprMode::kDiff, ReprMode::kBinary}) {
        ReprConfig repr = cfg.env.repr;
        repr.mode = mode;
        repr.augment = false;
        ProcessedImage img = process_frame(frame, canonical, repr, nullptr, cfg.env.phi_offset);
        std::snprintf(name, sizeof(name), "frame%02d_%s_%s.png", k, side, std::string(repr_name(mode)).c_str());
        write_png(dir / name, img);
        if (mode == ReprMode::kBinary) binary = std::move(img);
      }
      const auto theta =
          estimate_angle_pca(binary, cfg.env.render.pixel_pitch_u(), cfg.env.render.pixel_pitch_v());
      char row[256];
      std::snprintf(row, sizeof(row), "%d,%s,%s,%.4f,%.4f,%d,%d,%s\n", k, side,
                    std::string(family_name(spec.object.family)).c_str(), rad_to_deg(state.rel_angle),
                    patch.depth * 1e3, count_on(rasterize_patch(patch, cfg.env.render)), count_on(binary),
                    theta ? std::to_string(rad_to_deg(patch_angle_to_rel(*theta))).c_str() : "");
      csv << row;
    }
  }
  write_text(dir / "render_demo.csv", csv.str());
  out << "wrote " << 6 * o.frames + 1 << " images and render_demo.csv\n";
  return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradOptions {
  uint64_t seed = 0;
  int channels = 1;
  int samples = 0;
};

int run_gradcheck(const GradOptions& o, std::ostream& out) {
  if (o.channels != 1 && o.channels != 3) throw UsageError("gradcheck: --channels must be 1 or 3");
  Rng rng(o.seed);
  GradCheckOptions opts;
  opts.samples_per_tensor = o.samples;
  const GradCheckReport r = grad_check(rng, o.channels, opts);
  const std::vector<std::string> failing = r.failing();
  char buf[256];
  for (const auto& [name, err] : r.max_rel_err) {
    const bool ok = std::find(failing.begin(), failing.end(), name) == failing.end();
    std::snprintf(buf, sizeof(buf), "%-14s %6d entries  %3d at kinks  max rel err %.3e  %s\n", name.c_str(),
                  r.checked.at(name), r.kinks.at(name), err, ok ? "ok" : "FAIL");
    out << buf;
  }
  out << (r.passed() ? "gradcheck passed\n" : "gradcheck FAILED\n");
  return r.passed() ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------- ablate

struct AblateOptions {
  CommonOptions common;
  int seeds = 3;
  std::string aug_modes;
  std::optional<int64_t> steps;
  std::optional<int> episodes;
  bool shift = false;
};

// Here --repr takes a comma-separated list (default rgb,diff,binary).
int run_ablate(AblateOptions o, std::ostream& out) {
  if (o.seeds < 1) throw UsageError("ablate: --seeds must be positive");
  const std::vector<std::string> reprs = split_words(o.common.repr.empty() ? "rgb,diff,binary" : o.common.repr);
  o.common.repr.clear();
  std::vector<std::string> extra;
  if (o.steps) extra.push_back("train.total_steps=" + std::to_string(*o.steps));
  if (o.episodes) extra.push_back("eval.episodes=" + std::to_string(*o.episodes));
  const RunConfig base = resolve_config(o.common, extra);
  if (reprs.empty()) throw UsageError("ablate: --repr list is empty");
  for (const auto& r : reprs)
    if (!parse_repr(r)) throw UsageError("ablate: unknown representation '" + r + "'");
  std::vector<bool> augs;
  const std::string modes = o.aug_modes.empty() ? (base.env.repr.augment ? "on" : "off") : o.aug_modes;
  if (modes == "off") {
    augs = {false};
  } else if (modes == "on") {
    augs = {true};
  } else if (modes == "both") {
    augs = {false, true};
  } else {
    throw UsageError("ablate: --aug-modes must be off, on or both");
  }

  const fs::path dir = start_run(base, out);
  std::ostringstream csv;
  csv << "repr,aug,seed,success_mean,success_std,deviation_mean,deviation_std,mean_reward";
  if (o.shift) csv << ",shift_mean_drop";
  csv << "\n";
  for (const auto& repr : reprs) {
    for (bool aug : augs) {
      for (int s = 0; s < o.seeds; ++s) {
        RunConfig cfg = resolve_config(o.common, [&] {
          auto e = extra;
          e.push_back("repr.mode=" + repr);
          e.push_back(std::string("repr.augment=") + (aug ? "true" : "false"));
          e.push_back("train.seed=" + std::to_string(s));
          return e;
        }());
        const std::string name = repr + (aug ? "-aug" : "") + "-s" + std::to_string(s);
        const fs::path run = dir / name;
        fs::create_directories(run);
        write_text(run / "config.ini", cfg.serialize());
        out << "== " << name << "\n";
        const std::optional<fs::path> resume =
            fs::exists(run / "final.ckpt") ? std::optional<fs::path>(run / "final.ckpt") : std::nullopt;
        const TrainOutputs res = train(cfg.env, cfg.train, run, resume, [&](const std::string& line) {
          out << line << "\n";
          out.flush();
        });
        const PolicyFactory policy = mean_action_policy(load_policy_params(res.best_checkpoint, cfg.env));
        const EvalReport rep =
            evaluate(cfg.env, policy, cfg.eval.episodes, cfg.eval.seeds, cfg.train.threads, name);
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.6f,%.6f,%.6f,%.6f,%.6f", repr.c_str(), aug ? 1 : 0, s,
                      rep.overall.success_mean, rep.overall.success_std, rep.overall.deviation_mean,
                      rep.overall.deviation_std, rep.overall.reward_mean);
        csv << buf;
        if (o.shift) {
          const ShiftReport sr = shift_evaluate(cfg.env, policy, default_shift_suite(), cfg.eval.shift_episodes,
                                                cfg.eval.seeds, cfg.train.threads);
          std::snprintf(buf, sizeof(buf), ",%.6f", sr.mean_drop);
          csv << buf;
        }
        csv << "\n";
        write_text(dir / "ablate.csv", csv.str());
      }
    }
  }
  out << csv.str();
  return kExitOk;
}

// ---------------------------------------------------------------- plot

struct PlotOptions {
  std::string metrics;
  std::string out_path;
  std::string title = "Training curves";
};

int run_plot(const PlotOptions& o, std::ostream& out) {
  const auto rows = read_metrics_csv(o.metrics);
  const std::string svg = training_curves_svg(rows, o.title);
  fs::path path = o.out_path;
  if (path.empty()) {
    char tag[17];
    std::snprintf(tag, sizeof(tag), "%016llx", static_cast<unsigned long long>(fnv1a64(o.metrics)));
    path = make_run_dir(std::string("plot-") + tag) / "training_curves.svg";
  }
  write_text(path, svg);
  out << "wrote " << path.string() << " (" << rows.size() << " points per series)\n";
  return kExitOk;
}

}  // namespace

fs::path runs_root() {
  const char* env = std::getenv("PIVOT_TOUCH_RUNS_DIR");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("runs");
}

fs::path make_run_dir(const std::string& tag) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
  const fs::path root = runs_root();
  fs::create_directories(root);
  const std::string base = std::string(stamp) + "-" + tag;
  for (int k = 0;; ++k) {
    const fs::path dir = root / (k == 0 ? base : base + "-" + std::to_string(k + 1));
    if (fs::create_directory(dir)) return dir;
  }
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tactile in-hand pivoting: simulation, training and evaluation", "pivot_touch"};
  app.require_subcommand(1);
  app.get_formatter()->column_width(44);

  TrainOptions train_o;
  auto* train_cmd = app.add_subcommand("train", "train a PPO policy; writes metrics and checkpoints");
  add_common(train_cmd, train_o.common);
  train_cmd->add_option("--steps", train_o.steps, "environment steps (train.total_steps)");
  train_cmd->add_option("--resume", train_o.resume, "continue the run in this directory")->check(CLI::ExistingDirectory);

  EvalOptions eval_o;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a policy over seeds; writes eval.csv");
  add_common(eval_cmd, eval_o.common);
  eval_cmd->add_option("--ckpt", eval_o.ckpt, "policy checkpoint");
  eval_cmd->add_option("--policy", eval_o.policy, "learned or pca")->capture_default_str();
  eval_cmd->add_option("--oracle-ckpt", eval_o.oracle_ckpt, "oracle-angle checkpoint driven by PCA estimates");
  eval_cmd->add_option("--episodes", eval_o.episodes, "episodes per seed (eval.episodes)");
  eval_cmd->add_option("--seeds", eval_o.seeds, "comma-separated evaluation seeds (eval.seeds)");

  EvalOptions shift_o;
  auto* shift_cmd = app.add_subcommand("shift-eval", "evaluate under the domain-shift suite; writes shift.csv");
  add_common(shift_cmd, shift_o.common);
  shift_cmd->add_option("--ckpt", shift_o.ckpt, "policy checkpoint")->required();
  shift_cmd->add_option("--episodes", shift_o.episodes, "episodes per seed (eval.shift_episodes)");
  shift_cmd->add_option("--seeds", shift_o.seeds, "comma-separated evaluation seeds (eval.seeds)");

  PhiOptions phi_o;
  auto* phi_cmd = app.add_subcommand("gridsearch-phi", "search the binary threshold by imprint IoU");
  add_common(phi_cmd, phi_o.common);
  phi_cmd->add_option("--target", phi_o.target, "reference mask: imprint or patch")->capture_default_str();

  RenderOptions render_o;
  auto* render_cmd = app.add_subcommand("render-demo", "render a sampled scene to PNGs and a CSV");
  add_common(render_cmd, render_o.common);
  render_cmd->add_option("--frames", render_o.frames, "relative angles rendered")->capture_default_str();

  GradOptions grad_o;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of the network gradients");
  grad_cmd->add_option("--seed", grad_o.seed, "initialization seed")->capture_default_str();
  grad_cmd->add_option("--channels", grad_o.channels, "image channels, 1 or 3")->capture_default_str();
  grad_cmd->add_option("--samples", grad_o.samples, "entries per tensor, 0 for all")->capture_default_str();

  AblateOptions abl_o;
  auto* abl_cmd = app.add_subcommand("ablate", "representation sweep over seeds; writes ablate.csv");
  add_common(abl_cmd, abl_o.common);
  abl_cmd->add_option("--seeds", abl_o.seeds, "training seeds 0..N-1")->capture_default_str();
  abl_cmd->add_option("--aug-modes", abl_o.aug_modes, "off, on or both (default follows --aug)");
  abl_cmd->add_option("--steps", abl_o.steps, "environment steps per run");
  abl_cmd->add_option("--episodes", abl_o.episodes, "evaluation episodes per seed");
  abl_cmd->add_flag("--shift", abl_o.shift, "also run the domain-shift suite per run");

  PlotOptions plot_o;
  auto* plot_cmd = app.add_subcommand("plot", "training curves from a metrics CSV as SVG");
  plot_cmd->add_option("metrics", plot_o.metrics, "metrics CSV")->required()->check(CLI::ExistingFile);
  plot_cmd->add_option("--out", plot_o.out_path, "output SVG path (default: a new run directory)");
  plot_cmd->add_option("--title", plot_o.title, "plot title")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help("", CLI::AppFormatMode::All)
                                          : app.get_subcommands().back()->help());
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run 'pivot_touch --help' for usage\n";
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return run_train(train_o, out);
    if (eval_cmd->parsed()) return run_eval(eval_o, out);
    if (shift_cmd->parsed()) return run_shift_eval(shift_o, out);
    if (phi_cmd->parsed()) return run_gridsearch(phi_o, out);
    if (render_cmd->parsed()) return run_render_demo(render_o, out);
    if (grad_cmd->parsed()) return run_gradcheck(grad_o, out);
    if (abl_cmd->parsed()) return run_ablate(abl_o, out);
    if (plot_cmd->parsed()) return run_plot(plot_o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  err << "error: no subcommand\n";
  return kExitUsage;
}

}  // namespace pivot
