#include "ymap/image_io.hpp"

#include <png.h>
#include <unistd.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "ymap/error.hpp"

namespace ymap {

namespace fs = std::filesystem;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_for_read(const fs::path& path) {
  if (!fs::exists(path)) throw MissingFileError("file not found: " + path.string());
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

struct PngRaster {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int color_type = 0;
  int channels = 0;
  std::vector<unsigned char> rows;  // packed rows as stored, big-endian for 16-bit
  std::size_t row_bytes = 0;
};

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

// Reads without any transformation, so bit depth and color type are reported
// exactly as stored.
PngRaster read_png_raw(const fs::path& path) {
  FilePtr file = open_for_read(path);
  unsigned char sig[8] = {};
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError(path.string() + " is not a PNG file");
  }
  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn,
                                           png_warning_fn);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  PngRaster raster;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("corrupt PNG " + path.string() + ": " + message);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  raster.width = static_cast<int>(png_get_image_width(png, info));
  raster.height = static_cast<int>(png_get_image_height(png, info));
  raster.bit_depth = png_get_bit_depth(png, info);
  raster.color_type = png_get_color_type(png, info);
  raster.channels = png_get_channels(png, info);
  raster.row_bytes = png_get_rowbytes(png, info);
  raster.rows.resize(raster.row_bytes * raster.height);
  std::vector<png_bytep> pointers(raster.height);
  for (int y = 0; y < raster.height; ++y) pointers[y] = raster.rows.data() + y * raster.row_bytes;
  png_read_image(png, pointers.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return raster;
}

void png_write_sink(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<char>*>(png_get_io_ptr(png));
  out->insert(out->end(), reinterpret_cast<char*>(data), reinterpret_cast<char*>(data) + length);
}

void png_flush_noop(png_structp) {}

void write_png_raw(const fs::path& path, int width, int height, int bit_depth, int color_type,
                   const std::vector<unsigned char>& rows, std::size_t row_bytes) {
  std::vector<char> encoded;
  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn,
                                            png_warning_fn);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encode failed for " + path.string() + ": " + message);
  }
  png_set_write_fn(png, &encoded, png_write_sink, png_flush_noop);
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(rows.data() + y * row_bytes));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  write_file_atomic(path, encoded);
}

PngRaster read_gray16(const fs::path& path) {
  PngRaster raster = read_png_raw(path);
  if (raster.bit_depth != 16) {
    throw FormatError(path.string() + ": expected 16-bit samples, found " +
                      std::to_string(raster.bit_depth) + "-bit");
  }
  if (raster.color_type != PNG_COLOR_TYPE_GRAY || raster.channels != 1) {
    throw FormatError(path.string() + ": expected a single grayscale channel, found " +
                      std::to_string(raster.channels) + " channels");
  }
  return raster;
}

std::uint16_t raw16(const PngRaster& r, int y, int x) {
  const unsigned char* p = r.rows.data() + y * r.row_bytes + 2 * x;
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

void write_gray16(const fs::path& path, int height, int width,
                  const std::vector<std::uint16_t>& values) {
  std::vector<unsigned char> rows(static_cast<std::size_t>(height) * width * 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    rows[2 * i] = static_cast<unsigned char>(values[i] >> 8);
    rows[2 * i + 1] = static_cast<unsigned char>(values[i] & 0xff);
  }
  write_png_raw(path, width, height, 16, PNG_COLOR_TYPE_GRAY, rows,
                static_cast<std::size_t>(width) * 2);
}

}  // namespace

ImageGrid read_depth16(const fs::path& path) {
  PngRaster raster = read_gray16(path);
  ImageGrid out(raster.height, raster.width, 1);
  for (int y = 0; y < raster.height; ++y) {
    for (int x = 0; x < raster.width; ++x) {
      out.at(0, y, x) = static_cast<float>(raw16(raster, y, x) / 65535.0);
    }
  }
  return out;
}

void write_depth16(const ImageGrid& depth, const fs::path& path) {
  if (depth.channels() != 1) throw ShapeError("depth grid must have exactly one channel");
  std::vector<std::uint16_t> values(depth.size());
  auto data = depth.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const float v = data[i];
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw ValueError("depth value " + std::to_string(v) + " outside [0, 1] at index " +
                       std::to_string(i));
    }
    values[i] = static_cast<std::uint16_t>(std::lround(static_cast<double>(v) * 65535.0));
  }
  write_gray16(path, depth.height(), depth.width(), values);
}

ImageGrid read_signed16(const fs::path& path) {
  PngRaster raster = read_gray16(path);
  ImageGrid out(raster.height, raster.width, 1);
  for (int y = 0; y < raster.height; ++y) {
    for (int x = 0; x < raster.width; ++x) {
      out.at(0, y, x) = static_cast<float>(raw16(raster, y, x) / 65535.0 * 2.0 - 1.0);
    }
  }
  return out;
}

void write_signed16(const ImageGrid& grid, const fs::path& path) {
  if (grid.channels() != 1) throw ShapeError("signed map must have exactly one channel");
  std::vector<std::uint16_t> values(grid.size());
  auto data = grid.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const float v = data[i];
    if (!(v >= -1.0f && v <= 1.0f)) {
      throw ValueError("signed value " + std::to_string(v) + " outside [-1, 1]");
    }
    values[i] =
        static_cast<std::uint16_t>(std::lround((static_cast<double>(v) + 1.0) * 0.5 * 65535.0));
  }
  write_gray16(path, grid.height(), grid.width(), values);
}

ImageGrid read_png_rgb8(const fs::path& path) {
  PngRaster raster = read_png_raw(path);
  if (raster.bit_depth != 8) {
    throw FormatError(path.string() + ": expected 8-bit samples, found " +
                      std::to_string(raster.bit_depth) + "-bit");
  }
  if (raster.color_type == PNG_COLOR_TYPE_PALETTE) {
    throw FormatError(path.string() + ": palette PNGs are not supported");
  }
  ImageGrid out(raster.height, raster.width, 3);
  const bool gray = raster.channels < 3;
  for (int y = 0; y < raster.height; ++y) {
    const unsigned char* row = raster.rows.data() + y * raster.row_bytes;
    for (int x = 0; x < raster.width; ++x) {
      const unsigned char* px = row + x * raster.channels;
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = gray ? px[0] : px[c];
    }
  }
  return out;
}

ImageGrid read_mask_png(const fs::path& path) {
  PngRaster raster = read_png_raw(path);
  if (raster.bit_depth != 8 || raster.channels != 1) {
    throw FormatError(path.string() + ": mask must be 8-bit single-channel");
  }
  ImageGrid out(raster.height, raster.width, 1);
  for (int y = 0; y < raster.height; ++y) {
    for (int x = 0; x < raster.width; ++x) {
      out.at(0, y, x) = raster.rows[y * raster.row_bytes + x] > 127 ? 1.0f : 0.0f;
    }
  }
  return out;
}

void write_png8(const ImageGrid& grid, const fs::path& path) {
  if (grid.channels() != 1 && grid.channels() != 3) {
    throw ShapeError("8-bit PNG output needs 1 or 3 channels");
  }
  const int channels = grid.channels();
  const std::size_t row_bytes = static_cast<std::size_t>(grid.width()) * channels;
  std::vector<unsigned char> rows(row_bytes * grid.height());
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      for (int c = 0; c < channels; ++c) {
        const float v = std::clamp(grid.at(c, y, x), 0.0f, 1.0f);
        rows[y * row_bytes + x * channels + c] = static_cast<unsigned char>(std::lround(v * 255.0f));
      }
    }
  }
  write_png_raw(path, grid.width(), grid.height(), 8,
                channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, rows, row_bytes);
}

fs::path sidecar_path(const fs::path& path) {
  fs::path out = path;
  out += ".json";
  return out;
}

void write_tensor_file(const TensorFile& tensor, const fs::path& path) {
  std::size_t expected = 1;
  for (int d : tensor.shape) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive");
    expected *= static_cast<std::size_t>(d);
  }
  if (tensor.data.size() < expected) {
    throw ShapeError("tensor payload has " + std::to_string(tensor.data.size()) +
                     " floats, shape requires " + std::to_string(expected));
  }
  std::vector<char> bytes(tensor.data.size() * sizeof(float));
  for (std::size_t i = 0; i < tensor.data.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(tensor.data[i]);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    std::memcpy(bytes.data() + i * 4, &bits, 4);
  }
  nlohmann::json meta = tensor.extra.is_object() ? tensor.extra : nlohmann::json::object();
  meta["shape"] = tensor.shape;
  meta["layout"] = "planar";
  meta["range"] = {tensor.range[0], tensor.range[1]};
  meta["dtype"] = "float32";
  meta["byte_order"] = "little";
  write_file_atomic(path, bytes);
  write_text_atomic(sidecar_path(path), meta.dump(2) + "\n");
}

TensorFile read_tensor_file(const fs::path& path) {
  const fs::path side = sidecar_path(path);
  if (!fs::exists(path)) throw MissingFileError("tensor file not found: " + path.string());
  if (!fs::exists(side)) throw MissingFileError("tensor sidecar not found: " + side.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text_file(side));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed tensor sidecar " + side.string() + ": " + e.what());
  }
  TensorFile out;
  try {
    out.shape = meta.at("shape").get<std::vector<int>>();
    if (meta.at("layout").get<std::string>() != "planar") {
      throw FormatError("unsupported tensor layout in " + side.string());
    }
    auto range = meta.at("range").get<std::vector<float>>();
    if (range.size() != 2) throw FormatError("tensor range must have two entries");
    out.range = {range[0], range[1]};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("tensor sidecar " + side.string() + ": " + e.what());
  }
  for (const char* key : {"shape", "layout", "range", "dtype", "byte_order"}) meta.erase(key);
  out.extra = meta;

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0) throw FormatError(path.string() + ": payload not a multiple of 4 bytes");
  out.data.resize(bytes.size() / 4);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, bytes.data() + i * 4, 4);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    out.data[i] = std::bit_cast<float>(bits);
  }
  std::size_t expected = 1;
  for (int d : out.shape) expected *= static_cast<std::size_t>(std::max(d, 0));
  if (out.data.size() < expected) {
    throw FormatError(path.string() + ": payload shorter than declared shape");
  }
  return out;
}

void write_file_atomic(const fs::path& path, std::span<const char> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::span<const char>(text.data(), text.size()));
}

std::string read_text_file(const fs::path& path) {
  if (!fs::exists(path)) throw MissingFileError("file not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ymap
