#include "acc/vision.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace acc {

PipelineGeometry PipelineGeometry::with_divisor(int divisor) {
  if (divisor < 1 || 400 % (2 * divisor) != 0) {
    throw ContractError("pipeline divisor must divide 200: " + std::to_string(divisor));
  }
  PipelineGeometry g;
  g.divisor = divisor;
  g.raw_size = 400 / divisor;
  g.resized_size = g.raw_size / 2;
  g.crop_row = 70 / divisor;
  g.crop_col = 25 / divisor;
  g.crop_height = 105 / divisor;
  g.crop_width = 150 / divisor;
  return g;
}

CameraModel CameraModel::with_divisor(int divisor) {
  CameraModel cam;
  cam.geometry = PipelineGeometry::with_divisor(divisor);
  const double s = 1.0 / divisor;
  cam.focal *= s;
  cam.horizon_row *= s;
  cam.center_col *= s;
  return cam;
}

void CameraModel::validate() const {
  if (!(focal > 0.0)) throw ContractError("camera focal length must be > 0");
  if (geometry.raw_size * geometry.divisor != 400) throw ContractError("camera raw size must be 400/divisor");
}

ProjectedBox project_lead(double gap_m, const CameraModel& cam) {
  if (!(gap_m > 0.0)) throw ContractError("project_lead: gap must be > 0");
  const double w = cam.focal * cam.vehicle_width / gap_m;
  const double h = cam.focal * cam.vehicle_height / gap_m;
  const double bottom = cam.horizon_row + cam.focal * cam.camera_height / gap_m;
  return {cam.center_col - 0.5 * w, cam.center_col + 0.5 * w, bottom - h, bottom};
}

namespace {

// Length of [a, b) ∩ [lo, hi).
double overlap(double a, double b, double lo, double hi) {
  return std::max(0.0, std::min(b, hi) - std::max(a, lo));
}

std::uint8_t to_u8(double x) { return static_cast<std::uint8_t>(std::clamp(std::lround(x), 0L, 255L)); }

}  // namespace

RawFrame render(const WorldState& world, const CameraModel& cam) {
  const double g = gap(world);
  if (!(g > 0.0)) throw ContractError("render: gap must be > 0 (check termination first)");
  const int n = cam.geometry.raw_size;
  RawFrame img(n, n, cam.sky);

  for (int r = 0; r < n; ++r) {
    const double y = r + 0.5 - cam.horizon_row;
    if (y <= 0.0) continue;
    const double lane_off = y * cam.lane_half_width / cam.camera_height;
    const double half_line = 0.5 * y * cam.lane_line_width / cam.camera_height;
    for (int c = 0; c < n; ++c) {
      const double x = c + 0.5 - cam.center_col;
      const bool on_line = std::abs(std::abs(x) - lane_off) <= half_line;
      img.at(r, c) = on_line ? cam.lane : cam.road;
    }
  }

  const ProjectedBox box = project_lead(g, cam);
  const int r0 = std::max(0, int(std::floor(box.top)));
  const int r1 = std::min(n - 1, int(std::floor(box.bottom)));
  const int c0 = std::max(0, int(std::floor(box.left)));
  const int c1 = std::min(n - 1, int(std::floor(box.right)));
  for (int r = r0; r <= r1; ++r) {
    const double cy = overlap(r, r + 1, box.top, box.bottom);
    for (int c = c0; c <= c1; ++c) {
      const double cov = cy * overlap(c, c + 1, box.left, box.right);
      if (cov <= 0.0) continue;
      const double bg = img.at(r, c);
      img.at(r, c) = to_u8(bg + cov * (double(cam.vehicle) - bg));
    }
  }
  return img;
}

Image resize_bilinear(const Image& in, int height, int width) {
  if (in.height <= 0 || in.width <= 0 || height <= 0 || width <= 0) {
    throw ContractError("resize_bilinear: empty image");
  }
  Image out(height, width);
  const double sy = double(in.height) / height;
  const double sx = double(in.width) / width;
  for (int r = 0; r < height; ++r) {
    const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, double(in.height - 1));
    const int y0 = int(fy);
    const int y1 = std::min(y0 + 1, in.height - 1);
    const double wy = fy - y0;
    for (int c = 0; c < width; ++c) {
      const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, double(in.width - 1));
      const int x0 = int(fx);
      const int x1 = std::min(x0 + 1, in.width - 1);
      const double wx = fx - x0;
      const double top = (1.0 - wx) * in.at(y0, x0) + wx * in.at(y0, x1);
      const double bot = (1.0 - wx) * in.at(y1, x0) + wx * in.at(y1, x1);
      out.at(r, c) = to_u8((1.0 - wy) * top + wy * bot);
    }
  }
  return out;
}

Image road_mask(const PipelineGeometry& geo) {
  // Corridor in resized-image pixels: starts a little above the horizon so
  // the roof of a close lead survives, then widens with the lane lines.
  const double s = 1.0 / geo.divisor;
  const double horizon = 100.0 * s;
  const double center = 100.0 * s;
  const double top = horizon - 14.0 * s;
  const double base_half = 40.0 * s;
  const double spread = 1.5;  // lane_half_width / camera_height

  Image mask(geo.crop_height, geo.crop_width, 0);
  for (int r = 0; r < geo.crop_height; ++r) {
    const double y = geo.crop_row + r + 0.5;
    if (y < top) continue;
    const double half = base_half + spread * std::max(0.0, y - horizon);
    for (int c = 0; c < geo.crop_width; ++c) {
      const double x = geo.crop_col + c + 0.5 - center;
      if (std::abs(x) <= half) mask.at(r, c) = 255;
    }
  }
  return mask;
}

ProcFrame preprocess(const RawFrame& raw, const PipelineGeometry& geo) {
  if (raw.height != geo.raw_size || raw.width != geo.raw_size ||
      raw.pixels.size() != std::size_t(raw.height) * raw.width) {
    throw ContractError("preprocess: expected " + std::to_string(geo.raw_size) + "x" +
                        std::to_string(geo.raw_size) + " input, got " + std::to_string(raw.height) + "x" +
                        std::to_string(raw.width));
  }
  const Image half = resize_bilinear(raw, geo.resized_size, geo.resized_size);
  static thread_local PipelineGeometry cached_geo{0};
  static thread_local Image cached_mask;
  if (cached_geo.divisor != geo.divisor) {
    cached_mask = road_mask(geo);
    cached_geo = geo;
  }
  ProcFrame out(geo.crop_height, geo.crop_width, 0);
  for (int r = 0; r < geo.crop_height; ++r) {
    for (int c = 0; c < geo.crop_width; ++c) {
      if (cached_mask.at(r, c)) out.at(r, c) = half.at(geo.crop_row + r, geo.crop_col + c);
    }
  }
  return out;
}

FrameStack push(FrameStack stack, ProcFrame frame, double speed) {
  if (!std::isfinite(speed) || speed < 0.0) throw ContractError("push: speed must be finite and >= 0");
  if (stack.empty()) {
    stack.frames.assign(kHistory, frame);
    stack.speeds.assign(kHistory, speed);
    return stack;
  }
  stack.frames.erase(stack.frames.begin());
  stack.speeds.erase(stack.speeds.begin());
  stack.frames.push_back(std::move(frame));
  stack.speeds.push_back(speed);
  return stack;
}

void write_pgm(std::ostream& out, const Image& img) {
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
}

Image read_pgm(std::istream& in) {
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (!in || magic != "P5" || w <= 0 || h <= 0 || maxval != 255) throw std::runtime_error("read_pgm: bad header");
  in.get();  // single whitespace before the raster
  Image img(h, w);
  in.read(reinterpret_cast<char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
  if (in.gcount() != std::streamsize(img.pixels.size())) throw std::runtime_error("read_pgm: truncated raster");
  return img;
}

void write_pgm_file(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_pgm(out, img);
}

Image read_pgm_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_pgm(in);
}

}  // namespace acc
