#include "surfreg/image_io.hpp"

#include <png.h>

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

namespace surfreg {

namespace {

struct WriteBuffer {
  std::vector<std::uint8_t> bytes;
};

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

[[noreturn]] void png_fail(png_structp, png_const_charp message) {
  throw Error(ErrorKind::Format, std::string("png: ") + message);
}

void png_warn(png_structp, png_const_charp) {}

void write_cb(png_structp png, png_bytep data, png_size_t length) {
  auto* buf = static_cast<WriteBuffer*>(png_get_io_ptr(png));
  buf->bytes.insert(buf->bytes.end(), data, data + length);
}

void flush_cb(png_structp) {}

void read_cb(png_structp png, png_bytep out, png_size_t length) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + length > cur->bytes.size()) png_error(png, "truncated data");
  std::memcpy(out, cur->bytes.data() + cur->offset, length);
  cur->offset += length;
}

// Writes rows produced by `row_fn(row, buffer)` where the buffer holds
// width * channels * bytes_per_sample bytes (big-endian samples).
template <class RowFn>
std::vector<std::uint8_t> encode(int width, int height, int bit_depth, int color_type,
                                 int channels, RowFn row_fn) {
  if (width <= 0 || height <= 0) throw Error(ErrorKind::Format, "png: empty image");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (png == nullptr) throw Error(ErrorKind::Internal, "png: cannot allocate writer");
  png_infop info = png_create_info_struct(png);
  WriteBuffer buf;
  try {
    png_set_write_fn(png, &buf, write_cb, flush_cb);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride =
        static_cast<std::size_t>(width) * static_cast<std::size_t>(channels) * (bit_depth / 8);
    std::vector<std::uint8_t> row(stride);
    for (int r = 0; r < height; ++r) {
      row_fn(r, row.data());
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return std::move(buf.bytes);
}

struct Decoded {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> pixels;  // row-major, samples big-endian
};

Decoded decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw Error(ErrorKind::Format, "png: bad signature");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (png == nullptr) throw Error(ErrorKind::Internal, "png: cannot allocate reader");
  png_infop info = png_create_info_struct(png);
  ReadCursor cur{bytes, 0};
  Decoded out;
  try {
    png_set_read_fn(png, &cur, read_cb);
    png_read_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    const int color = png_get_color_type(png, info);
    out.bit_depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && out.bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (out.bit_depth < 8) out.bit_depth = 8;
    png_read_update_info(png, info);
    out.channels = png_get_channels(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    out.pixels.resize(stride * static_cast<std::size_t>(out.height));
    std::vector<png_bytep> rows(static_cast<std::size_t>(out.height));
    for (int r = 0; r < out.height; ++r) rows[r] = out.pixels.data() + stride * r;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_png_rgb8(const RgbImage& image) {
  return encode(image.width(), image.height(), 8, PNG_COLOR_TYPE_RGB, 3,
                [&](int r, std::uint8_t* row) {
                  for (int c = 0; c < image.width(); ++c) {
                    std::memcpy(row + 3 * c, image(c, r).data(), 3);
                  }
                });
}

std::vector<std::uint8_t> encode_png_gray8(const Raster<std::uint8_t>& image) {
  return encode(image.width(), image.height(), 8, PNG_COLOR_TYPE_GRAY, 1,
                [&](int r, std::uint8_t* row) {
                  for (int c = 0; c < image.width(); ++c) row[c] = image(c, r);
                });
}

std::vector<std::uint8_t> encode_png_gray16(const Raster<std::uint16_t>& image) {
  return encode(image.width(), image.height(), 16, PNG_COLOR_TYPE_GRAY, 1,
                [&](int r, std::uint8_t* row) {
                  for (int c = 0; c < image.width(); ++c) {
                    const std::uint16_t v = image(c, r);
                    row[2 * c] = static_cast<std::uint8_t>(v >> 8);
                    row[2 * c + 1] = static_cast<std::uint8_t>(v & 0xFF);
                  }
                });
}

RgbImage decode_png_rgb8(std::span<const std::uint8_t> bytes) {
  const Decoded d = decode(bytes);
  if (d.bit_depth != 8 || (d.channels != 3 && d.channels != 1)) {
    throw Error(ErrorKind::Format, "png: expected 8-bit RGB image");
  }
  RgbImage img(d.width, d.height);
  for (int r = 0; r < d.height; ++r) {
    for (int c = 0; c < d.width; ++c) {
      const std::size_t base = (static_cast<std::size_t>(r) * d.width + c) * d.channels;
      if (d.channels == 3) {
        img(c, r) = {d.pixels[base], d.pixels[base + 1], d.pixels[base + 2]};
      } else {
        img(c, r) = {d.pixels[base], d.pixels[base], d.pixels[base]};
      }
    }
  }
  return img;
}

Raster<std::uint8_t> decode_png_gray8(std::span<const std::uint8_t> bytes) {
  const Decoded d = decode(bytes);
  if (d.bit_depth != 8 || d.channels != 1) {
    throw Error(ErrorKind::Format, "png: expected 8-bit grayscale image");
  }
  Raster<std::uint8_t> img(d.width, d.height);
  std::memcpy(img.data().data(), d.pixels.data(), img.size());
  return img;
}

Raster<std::uint16_t> decode_png_gray16(std::span<const std::uint8_t> bytes) {
  const Decoded d = decode(bytes);
  if (d.bit_depth != 16 || d.channels != 1) {
    throw Error(ErrorKind::Format, "png: expected 16-bit grayscale image");
  }
  Raster<std::uint16_t> img(d.width, d.height);
  for (std::size_t i = 0; i < img.size(); ++i) {
    img.data()[i] = static_cast<std::uint16_t>((d.pixels[2 * i] << 8) | d.pixels[2 * i + 1]);
  }
  return img;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

namespace {
constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += kB64[(v >> 6) & 63];
    out += kB64[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t v = bytes[i] << 16;
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += kB64[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  std::array<int, 256> lut{};
  lut.fill(-1);
  for (int i = 0; i < 64; ++i) lut[static_cast<unsigned char>(kB64[i])] = i;
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  for (const char ch : text) {
    if (ch == '=') break;
    if (ch == '\n' || ch == '\r') continue;
    const int v = lut[static_cast<unsigned char>(ch)];
    if (v < 0) throw Error(ErrorKind::Format, "base64: invalid character");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

}  // namespace surfreg
