#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace pivot {

inline constexpr int kImageSize = 64;
inline constexpr int kImagePixels = kImageSize * kImageSize;

// Row-major HWC float image. Row 0 is the top of the sensor window.
struct Image {
  int rows = kImageSize;
  int cols = kImageSize;
  int channels = 1;
  std::vector<float> data;

  Image() = default;
  explicit Image(int channels_in, float fill = 0.0f)
      : channels(channels_in), data(static_cast<size_t>(kImagePixels) * channels_in, fill) {}

  bool empty() const { return data.empty(); }
  size_t size() const { return data.size(); }

  float& at(int r, int c, int ch = 0) {
    assert(r >= 0 && r < rows && c >= 0 && c < cols && ch >= 0 && ch < channels);
    return data[(static_cast<size_t>(r) * cols + c) * channels + ch];
  }
  float at(int r, int c, int ch = 0) const {
    assert(r >= 0 && r < rows && c >= 0 && c < cols && ch >= 0 && ch < channels);
    return data[(static_cast<size_t>(r) * cols + c) * channels + ch];
  }

  bool same_shape(const Image& o) const {
    return rows == o.rows && cols == o.cols && channels == o.channels;
  }
  friend bool operator==(const Image&, const Image&) = default;
};

// Number of strictly positive entries.
inline int count_on(const Image& img) {
  int n = 0;
  for (float v : img.data) n += v > 0.0f ? 1 : 0;
  return n;
}

}  // namespace pivot
