#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pivot/ppo.h"

namespace pivot {

// Success and deviation over one subset of episodes, as mean and std
// (population) of the per-seed values.
struct SubsetStats {
  int episodes = 0;
  double success_mean = 0.0;
  double success_std = 0.0;
  double deviation_mean = 0.0;
  double deviation_std = 0.0;
  double reward_mean = 0.0;
};

struct FamilyStats {
  Family family = Family::kRod;
  SubsetStats stats;
};

struct EvalReport {
  std::string label;
  int episodes_per_seed = 0;
  std::vector<uint64_t> seeds;
  SubsetStats overall;
  std::vector<FamilyStats> families;  // families present, in enum order
  std::vector<double> seed_success;
  // Seed-major episode results.
  std::vector<EpisodeResult> episodes;

  int n_episodes() const { return static_cast<int>(episodes.size()); }
};

// Runs `n_episodes` deterministic episodes per seed. No augmentation.
EvalReport evaluate(const EnvConfig& cfg, const PolicyFactory& policy, int n_episodes,
                    const std::vector<uint64_t>& seeds, int threads = 1, std::string label = "clean");

// Success rate of a report recomputed at another deviation threshold.
double success_at_threshold(const EvalReport& report, double threshold);

// Loads a mean-action policy; throws CheckpointError on a digest mismatch.
std::shared_ptr<const PolicyParams<float>> load_policy_params(const std::filesystem::path& ckpt,
                                                              const EnvConfig& cfg);

// Deployment-side perturbation of the sensor, renderer or table.
struct ShiftSpec {
  std::string label = "identity";
  double hue_shift = 0.0;  // radians
  double gain = 1.0;
  double noise_sigma = 0.0;
  double phi_offset = 0.0;
  double depth_scale = 1.0;
  bool background = false;
  double k_table_scale = 1.0;

  bool is_identity() const;
  // The environment as deployed; the policy's ReprConfig is untouched.
  EnvConfig apply(EnvConfig cfg) const;
};

// Hue +-20 deg, gain 0.7 / 1.3, noise 0.02, phi +-0.02, depth 0.8 / 1.2,
// background on, table compliance x0.25.
std::vector<ShiftSpec> default_shift_suite();

struct ShiftReport {
  EvalReport clean;
  std::vector<EvalReport> shifted;
  std::vector<double> drops;  // clean success minus shifted success
  double mean_drop = 0.0;
};

ShiftReport shift_evaluate(const EnvConfig& cfg, const PolicyFactory& policy,
                           const std::vector<ShiftSpec>& shifts, int n_episodes,
                           const std::vector<uint64_t>& seeds, int threads = 1);

// Reference mask for the phi search. Flat contact interiors shade like the
// flat gel, so binary imprints are edge rings and cannot match a filled patch
// mask; the optical imprint is what an ideal noise-free sensor could show.
enum class PhiTarget { kOpticalImprint, kPatchMask };

// Noise-free diff level above which a pixel counts as optically imprinted.
inline constexpr double kImprintFloor = 0.005;

struct PhiSearchResult {
  double best_phi = 0.0;
  std::vector<double> candidates;
  std::vector<double> mean_iou;
};

// Picks the binarization threshold whose imprints best match the reference
// masks (mean IoU over `frames` rendered contacts). Ties go to smaller phi.
PhiSearchResult gridsearch_phi(const RenderConfig& render, const std::vector<double>& candidates,
                               int frames = 200, uint64_t seed = 0, double noise_sigma = 0.0,
                               PhiTarget target = PhiTarget::kOpticalImprint,
                               const DynamicsConfig& dynamics = {});

std::vector<double> default_phi_candidates();

// One row per report and family: label, family, episodes, success mean/std,
// deviation mean/std, mean reward.
void write_reports_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports);
std::string format_report_table(const std::vector<EvalReport>& reports);

}  // namespace pivot
