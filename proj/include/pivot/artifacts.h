#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pivot/image.h"

namespace pivot {

// Writes an 8-bit PNG (gray for one channel, RGB for three). Values are
// clamped to [0, 1]. Throws std::runtime_error on I/O failure.
void write_png(const std::filesystem::path& path, const Image& image);

struct MetricsRow {
  long long step = 0;
  double mean_reward = 0.0;
  double success_rate = 0.0;
  double mean_deviation = 0.0;
};

// Parses a training metrics CSV by header name. Throws std::runtime_error on
// a missing column or malformed row.
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

// Two stacked panels, mean reward and success rate against step, one marker
// per row.
std::string training_curves_svg(const std::vector<MetricsRow>& rows, const std::string& title);

}  // namespace pivot
