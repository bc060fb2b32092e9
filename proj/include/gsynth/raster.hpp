#pragma once

// Rasterization of specs and TikZ/SVG emitters.

#include <cstdint>
#include <string>
#include <vector>

#include "gsynth/dsl.hpp"

namespace gsynth {

/// Grayscale image, row-major, intensities in [0, 1].
struct Bitmap {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  Bitmap() = default;
  Bitmap(int w, int h) : width(w), height(h), pixels(std::size_t(w) * h, 0.f) {}

  float at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }
  float& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }
  std::size_t size() const { return pixels.size(); }

  friend bool operator==(const Bitmap&, const Bitmap&) = default;
};

/// Stroke geometry at the default 256 px / 16 cell resolution. Other
/// resolutions scale every length by resolution / 256.
struct RasterStyle {
  double circleRadius = 8.0;
  double strokeWidth = 2.0;
  double dashOn = 6.0;
  double dashOff = 4.0;
  double arrowLength = 6.0;
  double arrowAngleDeg = 30.0;
};

inline constexpr int kDefaultResolution = 256;

/// Which part of the (possibly extended) grid is drawn. Grid point (x, y)
/// lands at the centre of cell (x - originX, y - originY); y grows downward.
struct Viewport {
  int originX = 0;
  int originY = 0;
  int cells = kGridSize;
};

/// Smallest square viewport that holds every command, never smaller than the
/// default grid.
Viewport fitViewport(const Spec& s);

Bitmap render(const Spec& s, int resolution = kDefaultResolution,
              const Viewport& view = {}, const RasterStyle& style = {});

/// Indices of the pixels a single command turns on, sorted ascending.
std::vector<std::uint32_t> commandPixels(const DrawCommand& c,
                                         int resolution = kDefaultResolution,
                                         const Viewport& view = {},
                                         const RasterStyle& style = {});

/// Mean squared intensity difference; throws on a size mismatch.
double pixelDistance(const Bitmap& a, const Bitmap& b);

/// `scale` shrinks drawings that outgrow the default grid.
std::string emitTikz(const Spec& s, double scale = 1.0);
std::string emitTikz(const Program& p, int loopUnrollBound = 64);
std::string emitSvg(const Spec& s, int resolution = kDefaultResolution);

void writePgm(const Bitmap& b, const std::string& path);
void writePng(const Bitmap& b, const std::string& path);
/// Reads a grayscale or RGB(A) PNG; colour is averaged to gray.
Bitmap readPng(const std::string& path);
Bitmap readImage(const std::string& path);

}  // namespace gsynth
