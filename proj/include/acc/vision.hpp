#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "acc/sim.hpp"

namespace acc {

/// 8-bit grayscale image, row-major.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int h, int w, std::uint8_t fill = 0) : height(h), width(w), pixels(std::size_t(h) * w, fill) {}

  std::uint8_t& at(int r, int c) { return pixels[std::size_t(r) * width + c]; }
  std::uint8_t at(int r, int c) const { return pixels[std::size_t(r) * width + c]; }
  bool operator==(const Image&) const = default;
};

using RawFrame = Image;
using ProcFrame = Image;

/// Sizes of every stage of the camera pipeline. `divisor` 1 is the native
/// 400x400 -> 200x200 -> 105x150 pipeline; larger divisors shrink every stage
/// proportionally (divisor 4 gives a 26x37 network input).
struct PipelineGeometry {
  int divisor = 1;
  int raw_size = 400;
  int resized_size = 200;
  int crop_row = 70;
  int crop_col = 25;
  int crop_height = 105;
  int crop_width = 150;

  static PipelineGeometry with_divisor(int divisor);
};

/// Pinhole front camera mounted at the host's front bumper.
struct CameraModel {
  PipelineGeometry geometry;
  double focal = 400.0;          // px
  double horizon_row = 200.0;    // px, continuous row coordinate of the horizon
  double center_col = 200.0;     // px
  double camera_height = 1.2;    // m
  double vehicle_width = 1.8;    // m
  double vehicle_height = 1.5;   // m
  double lane_half_width = 1.8;  // m, lateral offset of each lane line
  double lane_line_width = 0.15; // m

  std::uint8_t sky = 40;
  std::uint8_t road = 100;
  std::uint8_t lane = 140;
  std::uint8_t vehicle = 255;

  static CameraModel with_divisor(int divisor);
  void validate() const;
};

/// Continuous-coordinate rectangle of the lead vehicle in the raw frame.
struct ProjectedBox {
  double left, right, top, bottom;
  double width() const { return right - left; }
  double height() const { return bottom - top; }
};

ProjectedBox project_lead(double gap_m, const CameraModel& cam);

/// Synthetic camera frame: sky, road with converging lane lines, and the lead
/// vehicle as an area-antialiased flat rectangle.
RawFrame render(const WorldState& world, const CameraModel& cam);

/// Bilinear resize with half-pixel centers.
Image resize_bilinear(const Image& in, int height, int width);

/// Road-corridor mask in crop coordinates; 255 = kept, 0 = masked.
Image road_mask(const PipelineGeometry& geo);

/// Grayscale raw frame -> half-size -> masked -> cropped network frame.
ProcFrame preprocess(const RawFrame& raw, const PipelineGeometry& geo);

inline constexpr std::size_t kHistory = 8;

/// Last 8 processed frames and host speeds, oldest first.
struct FrameStack {
  std::vector<ProcFrame> frames;
  std::vector<double> speeds;

  bool empty() const { return frames.empty(); }
  bool operator==(const FrameStack&) const = default;
};

/// FIFO push; an empty stack is filled with 8 copies of the first observation.
FrameStack push(FrameStack stack, ProcFrame frame, double speed);

void write_pgm(std::ostream& out, const Image& img);
Image read_pgm(std::istream& in);
void write_pgm_file(const std::string& path, const Image& img);
Image read_pgm_file(const std::string& path);

}  // namespace acc
