#include <zlib.h>

#include <cstring>
#include <fstream>

#include "wbn/io.hpp"

namespace wbn {

namespace {

void put_u32(std::string& s, uint32_t v) {
  s.push_back(char((v >> 24) & 0xff));
  s.push_back(char((v >> 16) & 0xff));
  s.push_back(char((v >> 8) & 0xff));
  s.push_back(char(v & 0xff));
}

void write_chunk(std::ostream& os, const char type[4], const std::string& payload) {
  std::string head;
  put_u32(head, uint32_t(payload.size()));
  os.write(head.data(), 4);
  os.write(type, 4);
  os.write(payload.data(), std::streamsize(payload.size()));
  uLong crc = crc32(0, reinterpret_cast<const Bytef*>(type), 4);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(payload.data()), uInt(payload.size()));
  std::string tail;
  put_u32(tail, uint32_t(crc));
  os.write(tail.data(), 4);
}

struct Rgb {
  uint8_t r, g, b;
};

Rgb map_color(double t, Colormap cmap) {
  t = std::clamp(t, -1.0, 1.0);
  if (cmap == Colormap::Gray) {
    const double u = (t + 1.0) / 2.0;
    const uint8_t g = uint8_t(std::lround(255.0 * u));
    return {g, g, g};
  }
  // Diverging blue-white-red around zero.
  if (t >= 0) {
    const uint8_t o = uint8_t(std::lround(255.0 * (1.0 - t)));
    return {255, o, o};
  }
  const uint8_t o = uint8_t(std::lround(255.0 * (1.0 + t)));
  return {o, o, 255};
}

}  // namespace

void render_png(const GridF& grid, const std::filesystem::path& path, Colormap cmap,
                const PngNormalization& norm) {
  WBN_REQUIRE(grid.rows > 0 && grid.cols > 0, "render_png: empty grid");
  for (float v : grid.v)
    WBN_REQUIRE(std::isfinite(v), "render_png: non-finite value in grid");
  const GridF* ref = norm.reference ? norm.reference : &grid;
  double scale = 0;
  for (float v : ref->v) scale = std::max(scale, double(std::abs(v)));
  if (scale == 0) scale = 1;

  // Filter byte 0 per scanline, RGB8.
  std::string raw;
  raw.reserve(size_t(grid.rows) * (1 + 3 * size_t(grid.cols)));
  for (int i = 0; i < grid.rows; i++) {
    raw.push_back('\0');
    for (int j = 0; j < grid.cols; j++) {
      const Rgb c = map_color(double(grid(i, j)) / scale, cmap);
      raw.push_back(char(c.r));
      raw.push_back(char(c.g));
      raw.push_back(char(c.b));
    }
  }
  uLongf bound = compressBound(uLong(raw.size()));
  std::string compressed(bound, '\0');
  WBN_ENSURE(compress2(reinterpret_cast<Bytef*>(compressed.data()), &bound,
                       reinterpret_cast<const Bytef*>(raw.data()), uLong(raw.size()),
                       6) == Z_OK,
             "render_png: deflate failure");
  compressed.resize(bound);

  std::ofstream os(path, std::ios::binary);
  WBN_ENSURE(os.good(), "render_png: cannot open " + path.string());
  const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  os.write(reinterpret_cast<const char*>(sig), 8);
  std::string ihdr;
  put_u32(ihdr, uint32_t(grid.cols));
  put_u32(ihdr, uint32_t(grid.rows));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type RGB
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // interlace
  write_chunk(os, "IHDR", ihdr);
  write_chunk(os, "IDAT", compressed);
  write_chunk(os, "IEND", "");
  WBN_ENSURE(os.good(), "render_png: stream failure");
}

}  // namespace wbn
