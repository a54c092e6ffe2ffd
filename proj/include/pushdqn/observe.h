#ifndef PUSHDQN_OBSERVE_H_
#define PUSHDQN_OBSERVE_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pushdqn/env.h"
#include "pushdqn/tensor.h"

namespace pushdqn {

using Rgb = std::array<std::uint8_t, 3>;

namespace palette {
inline constexpr Rgb kBackground{230, 230, 230};
inline constexpr Rgb kTarget{0, 200, 0};
inline constexpr Rgb kObstacle{200, 0, 0};
inline constexpr Rgb kDistractor{200, 200, 0};
inline constexpr Rgb kObject{0, 0, 200};
inline constexpr Rgb kTool{80, 80, 80};
}  // namespace palette

// Square RGB raster, row-major, three 8-bit channels per pixel. Row 0 is the
// far edge of the work-surface (largest Y).
struct Observation {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Rgb At(int col, int row) const {
    const std::size_t i = 3 * (static_cast<std::size_t>(row) * width + col);
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
  }
  bool operator==(const Observation&) const = default;
};

bool SupportedResolution(int resolution);

// Maps world coordinates onto the raster: uniform scale, letterboxed on the
// short axis, pixel-center sampling.
class RasterTransform {
 public:
  RasterTransform(const GeometryConfig& cfg, int resolution);

  double pixels_per_cm() const { return scale_; }
  // World coordinates of a pixel center.
  double ColumnCenterX(int col) const;
  double RowCenterY(int row) const;
  // Continuous raster coordinates (pixel edges at integers).
  double ColumnOf(double x) const { return x * scale_ + offset_x_; }
  double RowOf(double y) const { return (surface_height_ - y) * scale_ + offset_y_; }

 private:
  double scale_;
  double offset_x_;
  double offset_y_;
  double surface_height_;
};

// Top-down orthographic render. Draw order: target, obstacles, distractors,
// object, tool. Throws std::invalid_argument for resolutions other than
// 32, 64 and 128.
Observation Render(const WorldState& world, const GeometryConfig& cfg,
                   int resolution);

// Channel-major [3, H, W] tensor with values channel / 255.
Tensor<float> Normalize(const Observation& obs);
// Writes the normalized planes into out[0 .. 3*H*W).
void NormalizeInto(const Observation& obs, float* out);

// Writes an 8-bit RGB PNG. Throws std::runtime_error on I/O failure.
void WritePng(const Observation& obs, const std::string& path);

}  // namespace pushdqn

#endif  // PUSHDQN_OBSERVE_H_
