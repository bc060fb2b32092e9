#include "gsynth/raster.hpp"

#include "gsynth/kernels.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace gsynth {

namespace {

struct Vec2 {
  double x;
  double y;
};

struct Segment {
  Vec2 a;
  Vec2 b;
  bool dashed = false;
};

// Everything needed to place strokes for one command, in pixel units.
struct Geometry {
  std::vector<Segment> segments;
  bool isCircle = false;
  Vec2 center{};
  double radius = 0;
};

struct Frame {
  double cell;
  double scale;
  Viewport view;

  Vec2 point(int gx, int gy) const {
    return {cell * (gx - view.originX) + cell / 2,
            cell * (gy - view.originY) + cell / 2};
  }
};

Frame makeFrame(int resolution, const Viewport& view) {
  if (resolution <= 0) throw std::invalid_argument("resolution must be positive");
  if (view.cells <= 0) throw std::invalid_argument("viewport must be non-empty");
  const double cell = static_cast<double>(resolution) / view.cells;
  return {cell, cell / 16.0, view};
}

Geometry geometry(const DrawCommand& c, const Frame& f, const RasterStyle& st) {
  Geometry g;
  switch (c.kind) {
    case CommandKind::Circle:
      g.isCircle = true;
      g.center = f.point(c.x1, c.y1);
      g.radius = st.circleRadius * f.scale;
      break;
    case CommandKind::Rectangle: {
      const Vec2 p = f.point(c.x1, c.y1);
      const Vec2 q = f.point(c.x2, c.y2);
      g.segments = {{{p.x, p.y}, {q.x, p.y}},
                    {{q.x, p.y}, {q.x, q.y}},
                    {{q.x, q.y}, {p.x, q.y}},
                    {{p.x, q.y}, {p.x, p.y}}};
      break;
    }
    case CommandKind::Line: {
      const Vec2 tail = f.point(c.x1, c.y1);
      const Vec2 head = f.point(c.x2, c.y2);
      g.segments.push_back({tail, head, c.dashed});
      if (c.arrow) {
        const double len = std::hypot(head.x - tail.x, head.y - tail.y);
        const double ux = (tail.x - head.x) / len;
        const double uy = (tail.y - head.y) / len;
        const double th = st.arrowAngleDeg * std::numbers::pi / 180.0;
        const double l = st.arrowLength * f.scale;
        for (double s : {1.0, -1.0}) {
          const double rx = ux * std::cos(s * th) - uy * std::sin(s * th);
          const double ry = ux * std::sin(s * th) + uy * std::cos(s * th);
          g.segments.push_back({head, {head.x + l * rx, head.y + l * ry}});
        }
      }
      break;
    }
  }
  return g;
}

bool onSegment(const Segment& s, double px, double py, double halfWidth,
               double dashOn, double dashPeriod) {
  const double dx = s.b.x - s.a.x;
  const double dy = s.b.y - s.a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - s.a.x) * dx + (py - s.a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double cx = s.a.x + t * dx - px;
  const double cy = s.a.y + t * dy - py;
  if (cx * cx + cy * cy > halfWidth * halfWidth) return false;
  if (!s.dashed) return true;
  return std::fmod(t * std::sqrt(len2), dashPeriod) < dashOn;
}

template <typename Visit>
void rasterize(const Geometry& g, int resolution, const Frame& f,
               const RasterStyle& st, Visit&& visit) {
  const double hw = st.strokeWidth * f.scale / 2;
  const double on = st.dashOn * f.scale;
  const double period = (st.dashOn + st.dashOff) * f.scale;
  auto scanBox = [&](double x0, double y0, double x1, double y1, auto&& test) {
    const int px0 = std::max(0, static_cast<int>(std::floor(x0 - hw - 1)));
    const int py0 = std::max(0, static_cast<int>(std::floor(y0 - hw - 1)));
    const int px1 = std::min(resolution - 1, static_cast<int>(std::ceil(x1 + hw + 1)));
    const int py1 = std::min(resolution - 1, static_cast<int>(std::ceil(y1 + hw + 1)));
    for (int py = py0; py <= py1; ++py) {
      for (int px = px0; px <= px1; ++px) {
        if (test(px + 0.5, py + 0.5)) visit(px, py);
      }
    }
  };
  if (g.isCircle) {
    scanBox(g.center.x - g.radius, g.center.y - g.radius, g.center.x + g.radius,
            g.center.y + g.radius, [&](double x, double y) {
              const double d = std::hypot(x - g.center.x, y - g.center.y);
              return std::abs(d - g.radius) <= hw;
            });
    return;
  }
  for (const auto& s : g.segments) {
    scanBox(std::min(s.a.x, s.b.x), std::min(s.a.y, s.b.y),
            std::max(s.a.x, s.b.x), std::max(s.a.y, s.b.y),
            [&](double x, double y) { return onSegment(s, x, y, hw, on, period); });
  }
}

}  // namespace

Viewport fitViewport(const Spec& s) {
  int lo = 0;
  int hi = kGridSize - 1;
  for (const auto& c : s) {
    for (int k = 0; k < c.arity(); ++k) {
      lo = std::min(lo, c.coords()[static_cast<std::size_t>(k)]);
      hi = std::max(hi, c.coords()[static_cast<std::size_t>(k)]);
    }
  }
  return {lo, lo, hi - lo + 1};
}

std::vector<std::uint32_t> commandPixels(const DrawCommand& c, int resolution,
                                         const Viewport& view,
                                         const RasterStyle& style) {
  const Frame f = makeFrame(resolution, view);
  std::vector<std::uint32_t> out;
  rasterize(geometry(c, f, style), resolution, f, style, [&](int x, int y) {
    out.push_back(static_cast<std::uint32_t>(y * resolution + x));
  });
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Bitmap render(const Spec& s, int resolution, const Viewport& view,
              const RasterStyle& style) {
  const Frame f = makeFrame(resolution, view);
  Bitmap out(resolution, resolution);
  for (const auto& c : s) {
    rasterize(geometry(c, f, style), resolution, f, style,
              [&](int x, int y) { out.at(x, y) = 1.f; });
  }
  return out;
}

double pixelDistance(const Bitmap& a, const Bitmap& b) {
  if (a.width != b.width || a.height != b.height) {
    throw std::invalid_argument("bitmap dimensions differ");
  }
  if (a.size() == 0) return 0.0;
  return kernels::sumSquaredDiffParallel(a.pixels, b.pixels) /
         static_cast<double>(a.size());
}

// ---------------------------------------------------------------------------
// Vector output

std::string emitTikz(const Spec& s, double scale) {
  std::ostringstream os;
  os << "\\begin{tikzpicture}[";
  if (scale != 1.0) os << "scale=" << scale << ",";
  os << "yscale=-1]\n";
  for (const auto& c : s) {
    switch (c.kind) {
      case CommandKind::Circle:
        os << "\\draw (" << c.x1 << "," << c.y1 << ") circle (0.5);\n";
        break;
      case CommandKind::Rectangle:
        os << "\\draw (" << c.x1 << "," << c.y1 << ") rectangle (" << c.x2
           << "," << c.y2 << ");\n";
        break;
      case CommandKind::Line: {
        std::string opts;
        if (c.arrow) opts += "->";
        if (c.dashed) opts += opts.empty() ? "dashed" : ",dashed";
        os << "\\draw" << (opts.empty() ? "" : "[" + opts + "]") << " ("
           << c.x1 << "," << c.y1 << ") -- (" << c.x2 << "," << c.y2 << ");\n";
        break;
      }
    }
  }
  os << "\\end{tikzpicture}\n";
  return os.str();
}

std::string emitTikz(const Program& p, int loopUnrollBound) {
  const Spec s = execute(p, ExecOptions{std::nullopt});
  if (static_cast<int>(s.size()) > loopUnrollBound) {
    throw DslError("program unrolls to more than " +
                   std::to_string(loopUnrollBound) + " commands");
  }
  return emitTikz(s);
}

std::string emitSvg(const Spec& s, int resolution) {
  const Viewport view = fitViewport(s);
  const Frame f = makeFrame(resolution, view);
  const RasterStyle st;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << resolution
     << "\" height=\"" << resolution << "\" viewBox=\"0 0 " << resolution << " "
     << resolution << "\">\n";
  os << "<defs><marker id=\"head\" markerWidth=\"8\" markerHeight=\"8\" refX=\"7\" "
        "refY=\"4\" orient=\"auto\"><path d=\"M0,0 L8,4 L0,8\" fill=\"none\" "
        "stroke=\"black\"/></marker></defs>\n";
  os << "<g fill=\"none\" stroke=\"black\" stroke-width=\""
     << st.strokeWidth * f.scale << "\">\n";
  for (const auto& c : s) {
    const Vec2 p = f.point(c.x1, c.y1);
    const Vec2 q = f.point(c.x2, c.y2);
    switch (c.kind) {
      case CommandKind::Circle:
        os << "<circle cx=\"" << p.x << "\" cy=\"" << p.y << "\" r=\""
           << st.circleRadius * f.scale << "\"/>\n";
        break;
      case CommandKind::Rectangle:
        os << "<rect x=\"" << p.x << "\" y=\"" << p.y << "\" width=\""
           << q.x - p.x << "\" height=\"" << q.y - p.y << "\"/>\n";
        break;
      case CommandKind::Line:
        os << "<line x1=\"" << p.x << "\" y1=\"" << p.y << "\" x2=\"" << q.x
           << "\" y2=\"" << q.y << "\"";
        if (c.dashed) {
          os << " stroke-dasharray=\"" << st.dashOn * f.scale << ","
             << st.dashOff * f.scale << "\"";
        }
        if (c.arrow) os << " marker-end=\"url(#head)\"";
        os << "/>\n";
        break;
    }
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Bitmap files

namespace {

std::vector<std::uint8_t> toBytes(const Bitmap& b) {
  std::vector<std::uint8_t> out(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    // Ink is drawn dark on white.
    const float v = std::clamp(b.pixels[i], 0.f, 1.f);
    out[i] = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - v)));
  }
  return out;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void writePgm(const Bitmap& b, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "P5\n" << b.width << " " << b.height << "\n255\n";
  const auto bytes = toBytes(b);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

void writePng(const Bitmap& b, const std::string& path) {
  File fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot open " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(b.width),
               static_cast<png_uint_32>(b.height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  auto bytes = toBytes(b);
  for (int y = 0; y < b.height; ++y) {
    png_write_row(png, bytes.data() + static_cast<std::size_t>(y) * b.width);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Bitmap readPng(const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw std::runtime_error("cannot read PNG " + path + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw std::runtime_error("cannot decode PNG " + path + ": " + image.message);
  }
  Bitmap out(static_cast<int>(image.width), static_cast<int>(image.height));
  for (std::size_t i = 0; i < buf.size(); ++i) {
    out.pixels[i] = 1.f - static_cast<float>(buf[i]) / 255.f;
  }
  return out;
}

Bitmap readImage(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") return readPng(path);
  int w = 0;
  int h = 0;
  int maxval = 0;
  in >> w >> h >> maxval;
  in.get();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw std::runtime_error("unsupported PGM " + path);
  }
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!in) throw std::runtime_error("truncated PGM " + path);
  Bitmap out(w, h);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    out.pixels[i] = 1.f - static_cast<float>(bytes[i]) / maxval;
  }
  return out;
}

}  // namespace gsynth
