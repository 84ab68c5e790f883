#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dgad {

// 8-bit interleaved image (HWC); c is 1 or 3.
struct ImageU8 {
  int64_t h = 0, w = 0, c = 0;
  std::vector<uint8_t> pixels;
};

// Reads PNG (via libpng), binary PPM (P6) or PGM (P5) by extension.
ImageU8 read_image(const std::string& path);
void write_png(const std::string& path, const ImageU8& img);
void write_ppm(const std::string& path, const ImageU8& img);

std::vector<uint8_t> read_file_bytes(const std::string& path);
// zlib/gzip decompression (for .gz dataset archives).
std::vector<uint8_t> gunzip_bytes(const std::vector<uint8_t>& compressed);

}  // namespace dgad
