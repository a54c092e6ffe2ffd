#include "pushdqn/observe.h"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace pushdqn {

namespace {

// Inclusive index range [lo, hi]; empty when lo > hi.
struct Span {
  int lo;
  int hi;
};

// Pixels whose centers lie strictly inside (center - half, center + half).
// `coord(i)` maps a pixel index to world space; approx_lo/approx_hi bound
// the search in raster coordinates.
template <typename Coord>
Span CoveredPixels(double center, double half, double approx_lo,
                   double approx_hi, int n, Coord coord) {
  const int lo = std::max(0, static_cast<int>(std::floor(approx_lo)) - 1);
  const int hi = std::min(n - 1, static_cast<int>(std::ceil(approx_hi)) + 1);
  Span s{n, -1};
  for (int i = lo; i <= hi; ++i) {
    if (std::abs(coord(i) - center) < half) {
      s.lo = std::min(s.lo, i);
      s.hi = std::max(s.hi, i);
    }
  }
  return s;
}

void FillBox(Observation& obs, const RasterTransform& tf, const Vec2& c,
             const Vec2& half, const Rgb& color) {
  const Span cols =
      CoveredPixels(c.x, half.x, tf.ColumnOf(c.x - half.x),
                    tf.ColumnOf(c.x + half.x), obs.width,
                    [&](int col) { return tf.ColumnCenterX(col); });
  const Span rows =
      CoveredPixels(c.y, half.y, tf.RowOf(c.y + half.y), tf.RowOf(c.y - half.y),
                    obs.height, [&](int row) { return tf.RowCenterY(row); });
  for (int r = rows.lo; r <= rows.hi; ++r) {
    std::uint8_t* p = &obs.pixels[3 * (static_cast<std::size_t>(r) * obs.width)];
    for (int col = cols.lo; col <= cols.hi; ++col) {
      p[3 * col] = color[0];
      p[3 * col + 1] = color[1];
      p[3 * col + 2] = color[2];
    }
  }
}

}  // namespace

bool SupportedResolution(int r) { return r == 32 || r == 64 || r == 128; }

RasterTransform::RasterTransform(const GeometryConfig& cfg, int resolution)
    : scale_(resolution / std::max(cfg.surface_width, cfg.surface_height)),
      offset_x_((resolution - cfg.surface_width * scale_) / 2.0),
      offset_y_((resolution - cfg.surface_height * scale_) / 2.0),
      surface_height_(cfg.surface_height) {}

double RasterTransform::ColumnCenterX(int col) const {
  return (col + 0.5 - offset_x_) / scale_;
}

double RasterTransform::RowCenterY(int row) const {
  return surface_height_ - (row + 0.5 - offset_y_) / scale_;
}

Observation Render(const WorldState& world, const GeometryConfig& cfg,
                   int resolution) {
  if (!SupportedResolution(resolution)) {
    throw std::invalid_argument("Render: unsupported resolution " +
                                std::to_string(resolution));
  }
  Observation obs;
  obs.width = obs.height = resolution;
  obs.pixels.resize(3 * static_cast<std::size_t>(resolution) * resolution);
  for (std::size_t i = 0; i < obs.pixels.size(); i += 3) {
    obs.pixels[i] = palette::kBackground[0];
    obs.pixels[i + 1] = palette::kBackground[1];
    obs.pixels[i + 2] = palette::kBackground[2];
  }

  const RasterTransform tf(cfg, resolution);
  auto draw = [&](const Vec2& c, const Vec2& half, const Rgb& color) {
    FillBox(obs, tf, c, half, color);
  };
  const Vec2 target_half{cfg.target_half_extent, cfg.target_half_extent};
  const Vec2 obstacle_half{cfg.obstacle_half_extent, cfg.obstacle_half_extent};
  const Vec2 object_half{cfg.object_half_extent, cfg.object_half_extent};

  draw(world.target_pose, target_half, palette::kTarget);
  for (const Vec2& o : world.obstacles) {
    draw(o, obstacle_half, palette::kObstacle);
  }
  for (const Vec2& d : world.distractors) {
    draw(d, object_half, palette::kDistractor);
  }
  draw(world.object_pose, object_half, palette::kObject);
  draw(world.tool_pose, cfg.tool_half_extents, palette::kTool);
  return obs;
}

void NormalizeInto(const Observation& obs, float* out) {
  const std::size_t plane = static_cast<std::size_t>(obs.width) * obs.height;
  for (std::size_t i = 0; i < plane; ++i) {
    out[i] = obs.pixels[3 * i] / 255.0f;
    out[plane + i] = obs.pixels[3 * i + 1] / 255.0f;
    out[2 * plane + i] = obs.pixels[3 * i + 2] / 255.0f;
  }
}

Tensor<float> Normalize(const Observation& obs) {
  Tensor<float> t({3, obs.height, obs.width});
  NormalizeInto(obs, t.data());
  return t;
}

void WritePng(const Observation& obs, const std::string& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"),
                                           &std::fclose);
  if (!fp) throw std::runtime_error("WritePng: cannot open " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("WritePng: libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("WritePng: encoding failed for " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, obs.width, obs.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < obs.height; ++r) {
    png_write_row(png, const_cast<png_bytep>(
                           &obs.pixels[3 * static_cast<std::size_t>(r) * obs.width]));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace pushdqn
