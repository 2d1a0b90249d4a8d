#include "virtstain/io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

#include "virtstain/errors.hpp"

namespace virtstain {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

Image read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw DataError("read_png: cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("read_png: png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("read_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("read_png: failed to decode " + path.string());
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  int depth = png_get_bit_depth(png, info);
  int color = png_get_color_type(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // stream is big-endian
  png_read_update_info(png, info);

  depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("read_png: unsupported channel count in " + path.string());
  }

  const size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> buf(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = buf.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(static_cast<int>(h), static_cast<int>(w), channels, ValueRange::Unit01);
  const double maxval = depth == 16 ? 65535.0 : 255.0;
  size_t i = 0;
  if (depth == 16) {
    const uint16_t* p = reinterpret_cast<const uint16_t*>(buf.data());
    for (double& x : img.v) x = p[i++] / maxval;
  } else {
    for (double& x : img.v) x = buf[i++] / maxval;
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img, int bit_depth) {
  if (img.c != 1 && img.c != 3) {
    throw DataError("write_png: only 1- or 3-channel rasters supported");
  }
  if (bit_depth != 8 && bit_depth != 16) throw DataError("write_png: bit depth must be 8 or 16");
  Image u = to_range(img, ValueRange::Unit01);
  u.check_range("write_png");

  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw DataError("write_png: cannot open " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("write_png: png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("write_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("write_png: failed to encode " + path.string());
  }

  png_init_io(png, fp.get());
  const int color = u.c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, u.w, u.h, bit_depth, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);

  const double maxval = bit_depth == 16 ? 65535.0 : 255.0;
  if (bit_depth == 16) {
    std::vector<uint16_t> row(static_cast<size_t>(u.w) * u.c);
    for (int y = 0; y < u.h; ++y) {
      for (size_t i = 0; i < row.size(); ++i) {
        row[i] = static_cast<uint16_t>(std::lround(u.v[static_cast<size_t>(y) * row.size() + i] * maxval));
      }
      png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
    }
  } else {
    std::vector<unsigned char> row(static_cast<size_t>(u.w) * u.c);
    for (int y = 0; y < u.h; ++y) {
      for (size_t i = 0; i < row.size(); ++i) {
        row[i] = static_cast<unsigned char>(std::lround(u.v[static_cast<size_t>(y) * row.size() + i] * maxval));
      }
      png_write_row(png, row.data());
    }
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_npy(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("read_npy: cannot open " + path.string());
  char magic[6];
  f.read(magic, 6);
  if (!f || std::memcmp(magic, "\x93NUMPY", 6) != 0) {
    throw DataError("read_npy: bad magic in " + path.string());
  }
  unsigned char ver[2];
  f.read(reinterpret_cast<char*>(ver), 2);
  uint32_t header_len = 0;
  if (ver[0] == 1) {
    unsigned char b[2];
    f.read(reinterpret_cast<char*>(b), 2);
    header_len = b[0] | (b[1] << 8);
  } else {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    header_len = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<uint32_t>(b[3]) << 24);
  }
  std::string header(header_len, '\0');
  f.read(header.data(), header_len);
  if (!f) throw DataError("read_npy: truncated header in " + path.string());

  if (header.find("'fortran_order': True") != std::string::npos) {
    throw DataError("read_npy: fortran order not supported: " + path.string());
  }
  const bool f8 = header.find("f8") != std::string::npos;
  const bool f4 = !f8 && header.find("f4") != std::string::npos;
  if (!f8 && !f4) throw DataError("read_npy: dtype must be float32/float64: " + path.string());
  const bool big_endian = header.find(">f") != std::string::npos;
  if (big_endian) throw DataError("read_npy: big-endian data not supported");

  const size_t sp = header.find("'shape':");
  const size_t lp = header.find('(', sp);
  const size_t rp = header.find(')', lp);
  if (sp == std::string::npos || lp == std::string::npos || rp == std::string::npos) {
    throw DataError("read_npy: malformed header in " + path.string());
  }
  std::vector<long> dims;
  std::stringstream ss(header.substr(lp + 1, rp - lp - 1));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.find_first_not_of(" \t") == std::string::npos) continue;
    dims.push_back(std::stol(tok));
  }
  if (dims.size() == 2) dims.push_back(1);
  if (dims.size() != 3) throw DataError("read_npy: expected (H, W, C) shape in " + path.string());

  Image img(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]),
            ValueRange::Unit01);
  if (f8) {
    f.read(reinterpret_cast<char*>(img.v.data()), img.size() * sizeof(double));
  } else {
    std::vector<float> tmp(img.size());
    f.read(reinterpret_cast<char*>(tmp.data()), tmp.size() * sizeof(float));
    for (size_t i = 0; i < tmp.size(); ++i) img.v[i] = tmp[i];
  }
  if (!f) throw DataError("read_npy: truncated data in " + path.string());
  return img;
}

void write_npy(const std::filesystem::path& path, const Image& img) {
  std::string dict = "{'descr': '<f8', 'fortran_order': False, 'shape': (" +
                     std::to_string(img.h) + ", " + std::to_string(img.w) + ", " +
                     std::to_string(img.c) + "), }";
  size_t total = 10 + dict.size() + 1;  // magic+version+len, dict, newline
  const size_t pad = (64 - total % 64) % 64;
  dict.append(pad, ' ');
  dict.push_back('\n');

  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("write_npy: cannot open " + path.string());
  f.write("\x93NUMPY\x01\x00", 8);
  const uint16_t len = static_cast<uint16_t>(dict.size());
  const unsigned char lb[2] = {static_cast<unsigned char>(len & 0xff),
                               static_cast<unsigned char>(len >> 8)};
  f.write(reinterpret_cast<const char*>(lb), 2);
  f.write(dict.data(), static_cast<std::streamsize>(dict.size()));
  f.write(reinterpret_cast<const char*>(img.v.data()),
          static_cast<std::streamsize>(img.size() * sizeof(double)));
  if (!f) throw DataError("write_npy: write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string() + " for writing");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw DataError("write failed for " + path.string());
}

}  // namespace virtstain
