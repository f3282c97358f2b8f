#include "pivot/config.h"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "pivot/errors.h"
#include "pivot/hash.h"

namespace pivot {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Boundary unit of a key; values are stored in SI internally.
enum class Unit { kNone, kCm, kMm, kDeg };

double to_si(double v, Unit u) {
  switch (u) {
    case Unit::kNone: return v;
    case Unit::kCm: return v / 100.0;
    case Unit::kMm: return v / 1000.0;
    case Unit::kDeg: return deg_to_rad(v);
  }
  return v;
}

enum class Kind { kReal, kInt, kBool, kPair, kReals, kInts, kWord, kFamilies };

struct Bounds {
  double lo = -kInf;
  double hi = kInf;
  bool lo_open = false;
  bool contains(double v) const { return (lo_open ? v > lo : v >= lo) && v <= hi; }
};

struct Parsed {
  std::vector<double> nums;  // SI
  std::string word;
  std::vector<Family> families;
  bool flag = false;
};

struct Resolved {
  EnvConfig env;
  PpoConfig train;
  EvalSettings eval;
};

struct Field {
  std::string name;
  std::string def;
  std::string help;
  Kind kind = Kind::kReal;
  Unit unit = Unit::kNone;
  Bounds hard;
  std::optional<Bounds> task_range;
  std::vector<std::string> choices;
  std::function<void(Resolved&, const Parsed&)> apply;
};

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string shortest(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

[[noreturn]] void bad_value(const Field& f, std::string_view raw, std::string_view why) {
  throw ConfigError(f.name + " = '" + std::string(raw) + "': " + std::string(why));
}

double parse_number(const Field& f, const std::string& token, std::string_view raw) {
  double v = 0.0;
  const auto r = std::from_chars(token.data(), token.data() + token.size(), v);
  if (token.empty() || r.ec != std::errc() || r.ptr != token.data() + token.size() || !std::isfinite(v))
    bad_value(f, raw, "expected a number");
  return v;
}

int64_t parse_integer(const Field& f, const std::string& token, std::string_view raw) {
  int64_t v = 0;
  const auto r = std::from_chars(token.data(), token.data() + token.size(), v);
  if (token.empty() || r.ec != std::errc() || r.ptr != token.data() + token.size())
    bad_value(f, raw, "expected an integer");
  return v;
}

std::string join(const std::vector<std::string>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + xs[i];
  return out;
}

// Normalizes a raw value to canonical text and checks its hard bounds.
std::string canonicalize(const Field& f, std::string_view raw_in) {
  const std::string raw = trim(raw_in);
  auto check = [&](double v) {
    if (!f.hard.contains(v)) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "must lie in %s%g, %g]", f.hard.lo_open ? "(" : "[", f.hard.lo, f.hard.hi);
      bad_value(f, raw, buf);
    }
  };
  switch (f.kind) {
    case Kind::kReal: {
      const double v = parse_number(f, raw, raw);
      check(v);
      return shortest(v);
    }
    case Kind::kInt: {
      const int64_t v = parse_integer(f, raw, raw);
      check(static_cast<double>(v));
      return std::to_string(v);
    }
    case Kind::kBool: {
      if (raw == "true" || raw == "yes" || raw == "on" || raw == "1") return "true";
      if (raw == "false" || raw == "no" || raw == "off" || raw == "0") return "false";
      bad_value(f, raw, "expected true or false");
    }
    case Kind::kPair:
    case Kind::kReals: {
      std::vector<std::string> out;
      std::vector<double> nums;
      for (const auto& t : split_list(raw)) {
        nums.push_back(parse_number(f, t, raw));
        check(nums.back());
        out.push_back(shortest(nums.back()));
      }
      if (f.kind == Kind::kPair) {
        if (nums.size() != 2) bad_value(f, raw, "expected 'low,high'");
        if (nums[0] > nums[1]) bad_value(f, raw, "low exceeds high");
      }
      return join(out);
    }
    case Kind::kInts: {
      std::vector<std::string> out;
      for (const auto& t : split_list(raw)) {
        const int64_t v = parse_integer(f, t, raw);
        check(static_cast<double>(v));
        out.push_back(std::to_string(v));
      }
      return join(out);
    }
    case Kind::kWord: {
      for (const auto& c : f.choices)
        if (c == raw) return raw;
      bad_value(f, raw, "expected one of " + join(f.choices));
    }
    case Kind::kFamilies: {
      std::vector<std::string> out;
      for (const auto& t : split_list(raw)) {
        if (!parse_family(t)) bad_value(f, raw, "unknown object family '" + t + "'");
        for (const auto& seen : out)
          if (seen == t) bad_value(f, raw, "family listed twice");
        out.push_back(t);
      }
      return join(out);
    }
  }
  bad_value(f, raw, "unsupported kind");
}

Parsed parse_canonical(const Field& f, const std::string& text) {
  Parsed p;
  switch (f.kind) {
    case Kind::kReal:
    case Kind::kInt:
    case Kind::kPair:
    case Kind::kReals:
    case Kind::kInts:
      for (const auto& t : split_list(text)) p.nums.push_back(to_si(std::stod(t), f.unit));
      break;
    case Kind::kBool:
      p.flag = text == "true";
      break;
    case Kind::kWord:
      p.word = text;
      break;
    case Kind::kFamilies:
      for (const auto& t : split_list(text)) p.families.push_back(*parse_family(t));
      break;
  }
  return p;
}

Range pair_of(const Parsed& p) { return Range{p.nums[0], p.nums[1]}; }

std::vector<Field> build_fields() {
  std::vector<Field> fs;
  auto add = [&](std::string name, std::string def, std::string help, Kind kind, Unit unit, Bounds hard,
                 std::function<void(Resolved&, const Parsed&)> apply) -> Field& {
    Field f;
    f.name = std::move(name);
    f.def = std::move(def);
    f.help = std::move(help);
    f.kind = kind;
    f.unit = unit;
    f.hard = hard;
    f.apply = std::move(apply);
    fs.push_back(std::move(f));
    return fs.back();
  };
  const Bounds any;
  const Bounds nonneg{0.0, kInf};
  const Bounds positive{0.0, kInf, true};
  const Bounds unit{0.0, 1.0};
  const Bounds count{1.0, 1e12};
  const Bounds angle{0.0, 360.0};

  // [task]
  add("task.table_height_cm", "0,20", "table height range above the base", Kind::kPair, Unit::kCm, {0, 100},
      [](Resolved& r, const Parsed& p) { r.env.ranges.table_height = pair_of(p); })
      .task_range = Bounds{0, 20};
  add("task.length_cm", "13,18", "object length range", Kind::kPair, Unit::kCm, {0, 100, true},
      [](Resolved& r, const Parsed& p) { r.env.ranges.length = pair_of(p); })
      .task_range = Bounds{13, 18};
  add("task.init_deg_range", "165,195", "initial relative angle range", Kind::kPair, Unit::kDeg, angle,
      [](Resolved& r, const Parsed& p) { r.env.ranges.init_rel_angle = pair_of(p); })
      .task_range = Bounds{165, 195};
  add("task.target_deg_range", "90,150", "target relative angle range", Kind::kPair, Unit::kDeg, angle,
      [](Resolved& r, const Parsed& p) { r.env.ranges.target_rel_angle = pair_of(p); })
      .task_range = Bounds{90, 150};
  add("task.grasp_fraction", "0.1,0.3", "grasp point as a fraction of length", Kind::kPair, Unit::kNone, unit,
      [](Resolved& r, const Parsed& p) { r.env.ranges.grasp_fraction = pair_of(p); });
  add("task.width_mm", "6,12", "object width range", Kind::kPair, Unit::kMm, {0, 50, true},
      [](Resolved& r, const Parsed& p) { r.env.ranges.width = pair_of(p); });
  add("task.tip_clearance_cm", "1,3", "initial tip clearance above the table", Kind::kPair, Unit::kCm, {0, 20},
      [](Resolved& r, const Parsed& p) { r.env.ranges.tip_clearance = pair_of(p); });
  add("task.families", "rod,wedge,tbar,bottle,hammer", "object families sampled", Kind::kFamilies, Unit::kNone, any,
      [](Resolved& r, const Parsed& p) { r.env.families = p.families; });
  add("task.obs", "tactile", "observation mode", Kind::kWord, Unit::kNone, any,
      [](Resolved& r, const Parsed& p) { r.env.obs = *parse_obs_mode(p.word); })
      .choices = {"tactile", "oracle", "proprio"};
  add("task.horizon", "100", "episode length in steps", Kind::kInt, Unit::kNone, {1, 100000},
      [](Resolved& r, const Parsed& p) { r.env.horizon = static_cast<int>(p.nums[0]); });
  add("task.success_threshold", "0.15", "deviation ratio counted as success", Kind::kReal, Unit::kNone, positive,
      [](Resolved& r, const Parsed& p) { r.env.success_threshold = p.nums[0]; });
  add("task.min_contact_pixels", "20", "on-pixels for a sensor to count as in contact", Kind::kInt, Unit::kNone,
      {1, 4096}, [](Resolved& r, const Parsed& p) { r.env.min_contact_pixels = static_cast<int>(p.nums[0]); });
  add("task.grip_loss_steps", "3", "contact-free steps that end an episode", Kind::kInt, Unit::kNone, {1, 100000},
      [](Resolved& r, const Parsed& p) { r.env.grip_loss_steps = static_cast<int>(p.nums[0]); });
  add("task.r_contact", "0.5", "reward per contacting sensor", Kind::kReal, Unit::kNone, nonneg,
      [](Resolved& r, const Parsed& p) { r.env.reward.r_contact = p.nums[0]; });
  add("task.w_position", "10", "tip distance reward weight", Kind::kReal, Unit::kNone, nonneg,
      [](Resolved& r, const Parsed& p) { r.env.reward.w_position = p.nums[0]; });
  add("task.w_angle", "10", "angle reward weight", Kind::kReal, Unit::kNone, nonneg,
      [](Resolved& r, const Parsed& p) { r.env.reward.w_angle = p.nums[0]; });
  add("task.w_penalty", "0.01", "action penalty weight", Kind::kReal, Unit::kNone, nonneg,
      [](Resolved& r, const Parsed& p) { r.env.reward.w_penalty = p.nums[0]; });
  add("task.tip_target", "gripper", "frame of the target tip position", Kind::kWord, Unit::kNone, any,
      [](Resolved& r, const Parsed& p) {
        r.env.reward.tip_target = p.word == "fixed" ? TipTarget::kFixed : TipTarget::kGripper;
      })
      .choices = {"gripper", "fixed"};

  // [dynamics]
  add("dynamics.step_xz_mm", "5", "translation per unit action", Kind::kReal, Unit::kMm, {0, 100, true},
      [](Resolved& r, const Parsed& p) { r.env.dynamics.step_xz = p.nums[0]; });
  add("dynamics.step_pitch_deg", "2", "pitch per unit action", Kind::kReal, Unit::kDeg, {0, 90, true},
      [](Resolved& r, const Parsed& p) { r.env.dynamics.step_pitch = p.nums[0]; });
  add("dynamics.finger_length_cm", "5", "wrist to fingertip distance", Kind::kReal, Unit::kCm, {0, 100, true},
      [](Resolved& r, const Parsed& p) { r.env.dynamics.finger_length = p.nums[0]; });
  add("dynamics.clearance_min_mm", "5", "minimum grasp height above the table", Kind::kReal, Unit::kMm,
      {0, 1000}, [](Resolved& r, const Parsed& p) { r.env.dynamics.clearance_min = p.nums[0]; });
  add("dynamics.pitch_limit_deg", "60", "gripper pitch limit", Kind::kReal, Unit::kDeg, {0, 180},
      [](Resolved& r, const Parsed& p) { r.env.dynamics.pitch_limit = p.nums[0]; });
  add("dynamics.x_limit_cm", "30", "lateral workspace half-width", Kind::kReal, Unit::kCm, {0, 1000, true},
      [](Resolved& r, const Parsed& p) { r.env.dynamics.x_limit = p.nums[0]; });
  add("dynamics.k_table", "2000", "table stiffness in N/m", Kind::kReal, Unit::kNone, positive,
      [](Resolved& r, const Parsed& p) { r.env.dynamics.k_table = p.nums[0]; });
  add("dynamics.k_f", "0.0001", "gel compliance in m/N", Kind::kReal, Unit::kNone, positive,
      [](Resolved& r, const Parsed& p) { r.env.dynamics.k_f = p.nums[0]; });
  add("dynamics.d_grip_mm", "0.4", "gel indentation from the grasp alone", Kind::kReal, Unit::kMm, {0, 10},
      [](Resolved& r, const Parsed& p) { r.env.dynamics.d_grip = p.nums[0]; });
  add("dynamics.d_max_mm", "1.5", "maximum gel indentation", Kind::kReal, Unit::kMm, {0, 10, true},
      [](Resolved& r, const Parsed& p) { r.env.dynamics.d_max = p.nums[0]; });
  add("dynamics.max_rel_step_deg", "30", "largest relative rotation per step", Kind::kReal, Unit::kDeg,
      {0, 180, true}, [](Resolved& r, const Parsed& p) { r.env.dynamics.max_rel_step = p.nums[0]; });
  add("dynamics.rel_min_deg", "10", "lower end of the reachable relative angle", Kind::kReal, Unit::kDeg, angle,
      [](Resolved& r, const Parsed& p) { r.env.dynamics.rel_min = p.nums[0]; });
  add("dynamics.rel_max_deg", "350", "upper end of the reachable relative angle", Kind::kReal, Unit::kDeg, angle,
      [](Resolved& r, const Parsed& p) { r.env.dynamics.rel_max = p.nums[0]; });
  add("dynamics.slip", "false", "gravity slip at the gel when free", Kind::kBool, Unit::kNone, any,
      [](Resolved& r, const Parsed& p) { r.env.dynamics.slip = p.flag; });
  add("dynamics.slip_rate_deg", "2", "slip rate per step", Kind::kReal, Unit::kDeg, nonneg,
      [](Resolved& r, const Parsed& p) { r.env.dynamics.slip_rate = p.nums[0]; });
  add("dynamics.slip_threshold", "0.5", "slip onset in |sin| of the world angle", Kind::kReal, Unit::kNone, unit,
      [](Resolved& r, const Parsed& p) { r.env.dynamics.slip_threshold = p.nums[0]; });

  // [render]
  add("render.window_width_mm", "20", "sensor window along image columns", Kind::kReal, Unit::kMm,
      {0, 1000, true}, [](Resolved& r, const Parsed& p) { r.env.render.window_width = p.nums[0]; });
  add("render.window_height_mm", "25", "sensor window along image rows", Kind::kReal, Unit::kMm, {0, 1000, true},
      [](Resolved& r, const Parsed& p) { r.env.render.window_height = p.nums[0]; });
  add("render.sigma_gel_px", "2", "gel smoothing in pixels", Kind::kReal, Unit::kNone, {0, 64},
      [](Resolved& r, const Parsed& p) { r.env.render.sigma_gel_px = p.nums[0]; });
  add("render.k_a", "0.6", "ambient coefficient", Kind::kReal, Unit::kNone, {0, 10},
      [](Resolved& r, const Parsed& p) { r.env.render.k_a = p.nums[0]; });
  add("render.k_d", "0.5", "diffuse coefficient", Kind::kReal, Unit::kNone, {0, 10},
      [](Resolved& r, const Parsed& p) { r.env.render.k_d = p.nums[0]; });
  add("render.k_s", "0.3", "specular coefficient", Kind::kReal, Unit::kNone, {0, 10},
      [](Resolved& r, const Parsed& p) { r.env.render.k_s = p.nums[0]; });
  add("render.shininess", "16", "specular exponent", Kind::kReal, Unit::kNone, {0, 10000},
      [](Resolved& r, const Parsed& p) { r.env.render.shininess = p.nums[0]; });
  add("render.light_elevation_deg", "70", "light elevation above the gel plane", Kind::kReal, Unit::kDeg, {0, 90},
      [](Resolved& r, const Parsed& p) { r.env.render.light_elevation = p.nums[0]; });
  add("render.light_intensity", "0.5", "scale of every light color", Kind::kReal, Unit::kNone, {0, 10},
      [](Resolved& r, const Parsed& p) { r.env.render.light_intensity = p.nums[0]; });
  add("render.hue_shift_deg", "0", "light hue rotation", Kind::kReal, Unit::kDeg, {-180, 180},
      [](Resolved& r, const Parsed& p) { r.env.render.hue_shift = p.nums[0]; });
  add("render.gain", "1", "global intensity gain", Kind::kReal, Unit::kNone, {0, 10},
      [](Resolved& r, const Parsed& p) { r.env.render.gain = p.nums[0]; });
  add("render.depth_scale", "1", "indentation scale", Kind::kReal, Unit::kNone, {0, 10, true},
      [](Resolved& r, const Parsed& p) { r.env.render.depth_scale = p.nums[0]; });
  add("render.background", "false", "static background texture", Kind::kBool, Unit::kNone, any,
      [](Resolved& r, const Parsed& p) { r.env.render.background = p.flag; });
  add("render.noise_sigma", "0", "additive pixel noise std", Kind::kReal, Unit::kNone, unit,
      [](Resolved& r, const Parsed& p) { r.env.noise_sigma = p.nums[0]; });
  add("render.phi_offset", "0", "deployment offset added to the binary threshold", Kind::kReal, Unit::kNone,
      {-1, 1}, [](Resolved& r, const Parsed& p) { r.env.phi_offset = p.nums[0]; });

  // [repr]
  add("repr.mode", "binary", "tactile representation", Kind::kWord, Unit::kNone, any,
      [](Resolved& r, const Parsed& p) { r.env.repr.mode = *parse_repr(p.word); })
      .choices = {"rgb", "diff", "binary"};
  add("repr.phi", "0.05", "binary threshold", Kind::kReal, Unit::kNone, {0, 1, true},
      [](Resolved& r, const Parsed& p) { r.env.repr.phi = p.nums[0]; });
  add("repr.augment", "false", "training-time augmentation", Kind::kBool, Unit::kNone, any,
      [](Resolved& r, const Parsed& p) { r.env.repr.augment = p.flag; });
  add("repr.scale_range", "0.2,1", "augmentation intensity scale range", Kind::kPair, Unit::kNone, unit,
      [](Resolved& r, const Parsed& p) {
        r.env.repr.scale_lo = p.nums[0];
        r.env.repr.scale_hi = p.nums[1];
      });
  add("repr.erase_prob", "0.5", "probability of a random erase", Kind::kReal, Unit::kNone, unit,
      [](Resolved& r, const Parsed& p) { r.env.repr.erase_prob = p.nums[0]; });
  add("repr.erase_max_frac", "0.2", "largest erased area fraction", Kind::kReal, Unit::kNone, {0, 0.25},
      [](Resolved& r, const Parsed& p) { r.env.repr.erase_max_frac = p.nums[0]; });
  add("repr.brightness", "0.2", "RGB brightness jitter", Kind::kReal, Unit::kNone, unit,
      [](Resolved& r, const Parsed& p) { r.env.repr.brightness = p.nums[0]; });
  add("repr.contrast_range", "0.8,1.2", "RGB contrast jitter range", Kind::kPair, Unit::kNone, {0, 10, true},
      [](Resolved& r, const Parsed& p) {
        r.env.repr.contrast_lo = p.nums[0];
        r.env.repr.contrast_hi = p.nums[1];
      });
  add("repr.hue_deg", "15", "RGB hue jitter", Kind::kReal, Unit::kDeg, {0, 180},
      [](Resolved& r, const Parsed& p) { r.env.repr.hue = p.nums[0]; });

  // [train]
  add("train.lr", "0.0003", "learning rate", Kind::kReal, Unit::kNone, positive,
      [](Resolved& r, const Parsed& p) { r.train.lr = p.nums[0]; });
  add("train.n_envs", "8", "parallel environments", Kind::kInt, Unit::kNone, {1, 4096},
      [](Resolved& r, const Parsed& p) { r.train.n_envs = static_cast<int>(p.nums[0]); });
  add("train.n_steps", "256", "rollout steps per environment", Kind::kInt, Unit::kNone, {1, 1e6},
      [](Resolved& r, const Parsed& p) { r.train.n_steps = static_cast<int>(p.nums[0]); });
  add("train.minibatch", "64", "minibatch size", Kind::kInt, Unit::kNone, {1, 1e9},
      [](Resolved& r, const Parsed& p) { r.train.minibatch = static_cast<int>(p.nums[0]); });
  add("train.epochs", "10", "epochs per update", Kind::kInt, Unit::kNone, {1, 1000},
      [](Resolved& r, const Parsed& p) { r.train.epochs = static_cast<int>(p.nums[0]); });
  add("train.gamma", "0.99", "discount", Kind::kReal, Unit::kNone, {0, 1, true},
      [](Resolved& r, const Parsed& p) { r.train.gamma = p.nums[0]; });
  add("train.gae_lambda", "0.95", "GAE lambda", Kind::kReal, Unit::kNone, unit,
      [](Resolved& r, const Parsed& p) { r.train.gae_lambda = p.nums[0]; });
  add("train.clip", "0.2", "PPO ratio clip", Kind::kReal, Unit::kNone, positive,
      [](Resolved& r, const Parsed& p) { r.train.clip = p.nums[0]; });
  add("train.vf_coef", "0.5", "value loss weight", Kind::kReal, Unit::kNone, nonneg,
      [](Resolved& r, const Parsed& p) { r.train.vf_coef = p.nums[0]; });
  add("train.ent_coef", "0", "entropy bonus weight", Kind::kReal, Unit::kNone, nonneg,
      [](Resolved& r, const Parsed& p) { r.train.ent_coef = p.nums[0]; });
  add("train.max_grad_norm", "0.5", "global gradient norm clip", Kind::kReal, Unit::kNone, positive,
      [](Resolved& r, const Parsed& p) { r.train.max_grad_norm = p.nums[0]; });
  add("train.adam_beta1", "0.9", "first moment decay", Kind::kReal, Unit::kNone, {0, 1},
      [](Resolved& r, const Parsed& p) { r.train.adam_beta1 = p.nums[0]; });
  add("train.adam_beta2", "0.999", "second moment decay", Kind::kReal, Unit::kNone, {0, 1},
      [](Resolved& r, const Parsed& p) { r.train.adam_beta2 = p.nums[0]; });
  add("train.adam_eps", "1e-08", "optimizer epsilon", Kind::kReal, Unit::kNone, positive,
      [](Resolved& r, const Parsed& p) { r.train.adam_eps = p.nums[0]; });
  add("train.total_steps", "2000000", "environment steps", Kind::kInt, Unit::kNone, count,
      [](Resolved& r, const Parsed& p) { r.train.total_steps = static_cast<int64_t>(p.nums[0]); });
  add("train.seed", "0", "training seed", Kind::kInt, Unit::kNone, {0, 9e15},
      [](Resolved& r, const Parsed& p) { r.train.seed = static_cast<uint64_t>(p.nums[0]); });
  add("train.normalize_reward", "true", "scale rewards by the return std", Kind::kBool, Unit::kNone, any,
      [](Resolved& r, const Parsed& p) { r.train.normalize_reward = p.flag; });
  add("train.eval_interval", "20480", "steps between evaluations", Kind::kInt, Unit::kNone, count,
      [](Resolved& r, const Parsed& p) { r.train.eval_interval = static_cast<int64_t>(p.nums[0]); });
  add("train.eval_episodes", "50", "episodes per training evaluation", Kind::kInt, Unit::kNone, {1, 1e6},
      [](Resolved& r, const Parsed& p) { r.train.eval_episodes = static_cast<int>(p.nums[0]); });
  add("train.record_wall_time", "false", "fill the wall_seconds metrics column", Kind::kBool, Unit::kNone, any,
      [](Resolved& r, const Parsed& p) { r.train.record_wall_time = p.flag; });

  // [eval]
  add("eval.episodes", "200", "episodes per seed", Kind::kInt, Unit::kNone, {1, 1e6},
      [](Resolved& r, const Parsed& p) { r.eval.episodes = static_cast<int>(p.nums[0]); });
  add("eval.seeds", "0,1,2", "evaluation seeds", Kind::kInts, Unit::kNone, {0, 9e15},
      [](Resolved& r, const Parsed& p) {
        r.eval.seeds.clear();
        for (double v : p.nums) r.eval.seeds.push_back(static_cast<uint64_t>(v));
      });
  add("eval.shift_episodes", "200", "episodes per seed for each shift", Kind::kInt, Unit::kNone, {1, 1e6},
      [](Resolved& r, const Parsed& p) { r.eval.shift_episodes = static_cast<int>(p.nums[0]); });
  add("eval.phi_candidates", "0.01,0.02,0.03,0.04,0.05,0.06,0.07,0.08,0.09,0.1,0.11,0.12,0.13,0.14,0.15",
      "binary thresholds searched", Kind::kReals, Unit::kNone, {0, 1, true},
      [](Resolved& r, const Parsed& p) { r.eval.phi_candidates = p.nums; });
  add("eval.phi_frames", "200", "rendered contacts per threshold", Kind::kInt, Unit::kNone, {1, 1e6},
      [](Resolved& r, const Parsed& p) { r.eval.phi_frames = static_cast<int>(p.nums[0]); });
  return fs;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> fs = build_fields();
  return fs;
}

const Field* find_field(const std::string& name) {
  for (const auto& f : fields())
    if (f.name == name) return &f;
  return nullptr;
}

void assign(std::map<std::string, std::string>& values, const std::string& name, const std::string& raw) {
  const Field* f = find_field(name);
  if (f == nullptr) throw ConfigError("unknown config key '" + name + "'");
  values[name] = canonicalize(*f, raw);
}

void check_task_range(const Field& f, const std::string& text) {
  if (!f.task_range) return;
  for (const auto& t : split_list(text)) {
    const double v = std::stod(t);
    if (!f.task_range->contains(v)) {
      throw ConfigError(f.name + " = " + text + " lies outside the supported task range [" + shortest(f.task_range->lo) + ", " +
                        shortest(f.task_range->hi) + "]; pass --allow-out-of-range to accept it");
    }
  }
}

RunConfig resolve(std::map<std::string, std::string> values, bool allow_out_of_range) {
  Resolved r;
  for (const auto& f : fields()) {
    const std::string& text = values.at(f.name);
    if (!allow_out_of_range) check_task_range(f, text);
    f.apply(r, parse_canonical(f, text));
  }
  r.env.render.d_max = r.env.dynamics.d_max;
  if (r.env.families.empty()) throw ConfigError("task.families is empty");
  if (!(r.env.dynamics.d_grip < r.env.dynamics.d_max))
    throw ConfigError("dynamics.d_grip_mm must be below dynamics.d_max_mm");
  if (!(r.env.dynamics.rel_min < r.env.dynamics.rel_max))
    throw ConfigError("dynamics.rel_min_deg must be below dynamics.rel_max_deg");
  if (r.eval.seeds.empty()) throw ConfigError("eval.seeds is empty");
  r.env.repr.validate();
  r.train.validate();

  RunConfig out;
  out.env = std::move(r.env);
  out.train = r.train;
  out.eval = std::move(r.eval);
  out.values = std::move(values);
  std::string canon;
  for (const auto& [k, v] : out.values) canon += k + "=" + v + "\n";
  out.digest = fnv1a64(canon);
  return out;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> ks;
    for (const auto& f : fields()) ks.push_back(ConfigKey{f.name, f.def, f.help});
    return ks;
  }();
  return keys;
}

std::string RunConfig::serialize() const {
  std::string out, section;
  for (const auto& f : fields()) {
    const size_t dot = f.name.find('.');
    const std::string sec = f.name.substr(0, dot);
    if (sec != section) {
      out += (section.empty() ? "[" : "\n[") + sec + "]\n";
      section = sec;
    }
    out += f.name.substr(dot + 1) + " = " + values.at(f.name) + "\n";
  }
  return out;
}

std::string RunConfig::digest_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

RunConfig parse_config(const std::string& ini_text, const std::vector<std::string>& overrides,
                       bool allow_out_of_range) {
  std::map<std::string, std::string> values;
  for (const auto& f : fields()) values[f.name] = canonicalize(f, f.def);

  boost::property_tree::ptree tree;
  std::istringstream in(ini_text);
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      if (!body.data().empty()) throw ConfigError("config key '" + section + "' is outside any section");
      continue;
    }
    for (const auto& [key, value] : body) assign(values, section + "." + key, value.data());
  }
  for (const auto& o : overrides) {
    const size_t eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not of the form section.key=value");
    assign(values, trim(std::string_view(o).substr(0, eq)), o.substr(eq + 1));
  }
  return resolve(std::move(values), allow_out_of_range);
}

RunConfig load_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides,
                      bool allow_out_of_range) {
  std::string text;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot read config file " + path->string());
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return parse_config(text, overrides, allow_out_of_range);
}

}  // namespace pivot
