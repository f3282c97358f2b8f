#include "pivot/evalsuite.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pivot/errors.h"
#include "pivot/tacrender.h"
#include "pivot/tacrepr.h"

namespace pivot {
namespace {

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double std_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

template <typename Pred>
SubsetStats subset_stats(const EvalReport& r, Pred keep) {
  SubsetStats st;
  std::vector<double> succ, dev, rew;
  for (size_t s = 0; s < r.seeds.size(); ++s) {
    int n = 0;
    double sc = 0.0, dv = 0.0, rw = 0.0;
    for (int i = 0; i < r.episodes_per_seed; ++i) {
      const EpisodeResult& e = r.episodes[s * r.episodes_per_seed + i];
      if (!keep(e)) continue;
      ++n;
      sc += e.success ? 1.0 : 0.0;
      dv += e.deviation;
      rw += e.total_reward;
    }
    st.episodes += n;
    if (n == 0) continue;
    succ.push_back(sc / n);
    dev.push_back(dv / n);
    rew.push_back(rw / n);
  }
  st.success_mean = mean_of(succ);
  st.success_std = std_of(succ);
  st.deviation_mean = mean_of(dev);
  st.deviation_std = std_of(dev);
  st.reward_mean = mean_of(rew);
  return st;
}

double iou(const Image& a, const Image& b) {
  int inter = 0, uni = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const bool x = a.data[i] > 0.0f, y = b.data[i] > 0.0f;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

}  // namespace

EvalReport evaluate(const EnvConfig& cfg, const PolicyFactory& policy, int n_episodes,
                    const std::vector<uint64_t>& seeds, int threads, std::string label) {
  if (n_episodes <= 0) throw ConfigError("evaluation needs at least one episode");
  if (seeds.empty()) throw ConfigError("evaluation needs at least one seed");
  EvalReport r;
  r.label = std::move(label);
  r.episodes_per_seed = n_episodes;
  r.seeds = seeds;
  for (uint64_t s : seeds) {
    const auto eps = run_episodes(cfg, policy, n_episodes, s, threads);
    r.episodes.insert(r.episodes.end(), eps.begin(), eps.end());
  }
  r.overall = subset_stats(r, [](const EpisodeResult&) { return true; });
  for (size_t s = 0; s < seeds.size(); ++s) {
    double sc = 0.0;
    for (int i = 0; i < n_episodes; ++i) sc += r.episodes[s * n_episodes + i].success ? 1.0 : 0.0;
    r.seed_success.push_back(sc / n_episodes);
  }
  for (Family f : kAllFamilies) {
    SubsetStats st = subset_stats(r, [f](const EpisodeResult& e) { return e.family == f; });
    if (st.episodes > 0) r.families.push_back(FamilyStats{f, st});
  }
  return r;
}

double success_at_threshold(const EvalReport& report, double threshold) {
  if (report.episodes.empty()) return 0.0;
  int n = 0;
  for (const auto& e : report.episodes) n += (!e.grip_lost && e.deviation < threshold) ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(report.episodes.size());
}

std::shared_ptr<const PolicyParams<float>> load_policy_params(const std::filesystem::path& ckpt,
                                                              const EnvConfig& cfg) {
  const Checkpoint c = load_checkpoint(ckpt, policy_digest(cfg));
  return std::make_shared<const PolicyParams<float>>(params_from_checkpoint(c, net_shape(cfg)));
}

bool ShiftSpec::is_identity() const {
  return hue_shift == 0.0 && gain == 1.0 && noise_sigma == 0.0 && phi_offset == 0.0 && depth_scale == 1.0 &&
         !background && k_table_scale == 1.0;
}

EnvConfig ShiftSpec::apply(EnvConfig cfg) const {
  cfg.render.hue_shift += hue_shift;
  cfg.render.gain *= gain;
  cfg.render.depth_scale *= depth_scale;
  cfg.render.background = cfg.render.background || background;
  cfg.noise_sigma += noise_sigma;
  cfg.phi_offset += phi_offset;
  cfg.dynamics.k_table *= k_table_scale;
  return cfg;
}

std::vector<ShiftSpec> default_shift_suite() {
  std::vector<ShiftSpec> s;
  auto add = [&](std::string label, auto set) {
    ShiftSpec x;
    x.label = std::move(label);
    set(x);
    s.push_back(x);
  };
  add("hue+20", [](ShiftSpec& x) { x.hue_shift = deg_to_rad(20.0); });
  add("hue-20", [](ShiftSpec& x) { x.hue_shift = deg_to_rad(-20.0); });
  add("gain0.7", [](ShiftSpec& x) { x.gain = 0.7; });
  add("gain1.3", [](ShiftSpec& x) { x.gain = 1.3; });
  add("noise0.02", [](ShiftSpec& x) { x.noise_sigma = 0.02; });
  add("phi+0.02", [](ShiftSpec& x) { x.phi_offset = 0.02; });
  add("phi-0.02", [](ShiftSpec& x) { x.phi_offset = -0.02; });
  add("depth0.8", [](ShiftSpec& x) { x.depth_scale = 0.8; });
  add("depth1.2", [](ShiftSpec& x) { x.depth_scale = 1.2; });
  add("background", [](ShiftSpec& x) { x.background = true; });
  add("soft-table", [](ShiftSpec& x) { x.k_table_scale = 0.25; });
  return s;
}

ShiftReport shift_evaluate(const EnvConfig& cfg, const PolicyFactory& policy,
                           const std::vector<ShiftSpec>& shifts, int n_episodes,
                           const std::vector<uint64_t>& seeds, int threads) {
  ShiftReport out;
  out.clean = evaluate(cfg, policy, n_episodes, seeds, threads, "clean");
  for (const ShiftSpec& s : shifts) {
    EvalReport r = evaluate(s.apply(cfg), policy, n_episodes, seeds, threads, s.label);
    out.drops.push_back(out.clean.overall.success_mean - r.overall.success_mean);
    out.shifted.push_back(std::move(r));
  }
  out.mean_drop = mean_of(out.drops);
  return out;
}

std::vector<double> default_phi_candidates() {
  std::vector<double> c;
  for (int i = 1; i <= 15; ++i) c.push_back(i / 100.0);
  return c;
}

PhiSearchResult gridsearch_phi(const RenderConfig& render, const std::vector<double>& candidates, int frames,
                               uint64_t seed, double noise_sigma, PhiTarget target,
                               const DynamicsConfig& dynamics) {
  if (candidates.empty()) throw ConfigError("phi grid search needs at least one candidate");
  for (double phi : candidates)
    if (!(phi > 0.0 && phi < 1.0)) throw ConfigError("phi candidates must lie in (0, 1)");
  PhiSearchResult result;
  result.candidates = candidates;
  result.mean_iou.assign(candidates.size(), 0.0);
  const TactileFrame canonical = canonical_image(render);
  const TaskRanges ranges;
  const std::vector<Family> families(kAllFamilies.begin(), kAllFamilies.end());
  Rng rng(seed);
  for (int f = 0; f < frames; ++f) {
    const SceneSpec spec = sample_scene(rng, families, ranges);
    PatchGeometry patch;
    patch.empty = false;
    patch.shape = spec.object;
    patch.rel_angle = rng.uniform(ranges.target_rel_angle.lo, ranges.init_rel_angle.hi);
    patch.depth = rng.uniform(dynamics.d_grip, dynamics.d_max);
    TactileFrame frame = render_phong(heightmap_from_patch(patch, render), render, Sensor::kLeft);
    const Image mask = target == PhiTarget::kPatchMask
                           ? rasterize_patch(patch, render)
                           : binarize(diff_image(frame.rgb, canonical.rgb), kImprintFloor);
    add_pixel_noise(frame.rgb, noise_sigma, rng);
    const ProcessedImage diff = diff_image(frame.rgb, canonical.rgb);
    for (size_t k = 0; k < candidates.size(); ++k) {
      result.mean_iou[k] += iou(binarize(diff, candidates[k]), mask) / frames;
    }
  }
  size_t best = 0;
  for (size_t k = 1; k < candidates.size(); ++k) {
    const bool better = result.mean_iou[k] > result.mean_iou[best];
    const bool tie_smaller = result.mean_iou[k] == result.mean_iou[best] && candidates[k] < candidates[best];
    if (better || tie_smaller) best = k;
  }
  result.best_phi = candidates[best];
  return result;
}

void write_reports_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "label,family,episodes,success_mean,success_std,deviation_mean,deviation_std,mean_reward\n";
  auto row = [&](const std::string& label, std::string_view family, const SubsetStats& s) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), ",%d,%.6f,%.6f,%.6f,%.6f,%.6f\n", s.episodes, s.success_mean,
                  s.success_std, s.deviation_mean, s.deviation_std, s.reward_mean);
    out << label << ',' << family << buf;
  };
  for (const auto& r : reports) {
    row(r.label, "all", r.overall);
    for (const auto& f : r.families) row(r.label, family_name(f.family), f.stats);
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string format_report_table(const std::vector<EvalReport>& reports) {
  std::ostringstream s;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-14s %8s %16s %16s\n", "label", "episodes", "success", "deviation");
  s << buf;
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "%-14s %8d %7.3f +- %5.3f %7.3f +- %5.3f\n", r.label.c_str(),
                  r.n_episodes(), r.overall.success_mean, r.overall.success_std, r.overall.deviation_mean,
                  r.overall.deviation_std);
    s << buf;
  }
  return s.str();
}

}  // namespace pivot
