#include "relsal/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

namespace relsal {
namespace {

namespace fs = std::filesystem;

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) {
    throw IoError("cannot open '" + path.string() + "'");
  }
  return f;
}

[[noreturn]] void png_error_handler(png_structp, png_const_charp msg) {
  throw IoError(std::string("libpng: ") + msg);
}

void png_warning_handler(png_structp, png_const_charp) {}

ImageData read_png(const fs::path& path) {
  auto file = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                           png_warning_handler);
  if (png == nullptr) {
    throw IoError("png_create_read_struct failed");
  }
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_read_struct(png, info, nullptr); }
  } guard{&png, &info};

  png_init_io(png, file.get());
  png_read_info(png, info);
  const auto width = static_cast<int>(png_get_image_width(png, info));
  const auto height = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
  }
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if ((color & PNG_COLOR_MASK_ALPHA) != 0) {
    png_set_strip_alpha(png);
  }
  png_read_update_info(png, info);
  depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);

  ImageData img{width, height, channels, depth, {}};
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<png_byte> buffer(row_bytes * static_cast<std::size_t>(height));
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    rows[static_cast<std::size_t>(y)] = buffer.data() + row_bytes * static_cast<std::size_t>(y);
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  const std::size_t n = static_cast<std::size_t>(width) * height * channels;
  img.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    img.samples[i] = depth == 16
                         ? static_cast<std::uint16_t>((buffer[2 * i] << 8) | buffer[2 * i + 1])
                         : buffer[i];
  }
  return img;
}

void write_png(const fs::path& path, const ImageData& img) {
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                            png_warning_handler);
  if (png == nullptr) {
    throw IoError("png_create_write_struct failed");
  }
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_write_struct(png, info); }
  } guard{&png, &info};

  png_init_io(png, file.get());
  const int color = img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), img.bit_depth, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const std::size_t bytes_per_sample = img.bit_depth == 16 ? 2 : 1;
  const std::size_t row_samples = static_cast<std::size_t>(img.width) * img.channels;
  std::vector<png_byte> row(row_samples * bytes_per_sample);
  for (int y = 0; y < img.height; ++y) {
    for (std::size_t i = 0; i < row_samples; ++i) {
      const auto v = img.samples[static_cast<std::size_t>(y) * row_samples + i];
      if (bytes_per_sample == 2) {
        row[2 * i] = static_cast<png_byte>(v >> 8);
        row[2 * i + 1] = static_cast<png_byte>(v & 0xFF);
      } else {
        row[i] = static_cast<png_byte>(v);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

int read_pnm_int(std::istream& in) {
  int c = in.peek();
  while (c != EOF) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(c) != 0) {
      in.get();
    } else {
      break;
    }
    c = in.peek();
  }
  int v = 0;
  if (!(in >> v)) {
    throw IoError("malformed PNM header");
  }
  return v;
}

ImageData read_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "'");
  }
  std::array<char, 2> magic{};
  in.read(magic.data(), 2);
  if (magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
    throw IoError("'" + path.string() + "' is not a binary PGM/PPM file");
  }
  ImageData img;
  img.channels = magic[1] == '6' ? 3 : 1;
  img.width = read_pnm_int(in);
  img.height = read_pnm_int(in);
  const int maxval = read_pnm_int(in);
  if (img.width < 1 || img.height < 1 || maxval < 1 || maxval > 65535) {
    throw IoError("unsupported PNM header in '" + path.string() + "'");
  }
  in.get();  // single whitespace before the raster
  img.bit_depth = maxval > 255 ? 16 : 8;
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
  const std::size_t bytes = img.bit_depth == 16 ? 2 : 1;
  std::vector<unsigned char> raw(n * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw IoError("truncated raster in '" + path.string() + "'");
  }
  img.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    img.samples[i] = bytes == 2 ? static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1])
                                : raw[i];
  }
  return img;
}

void write_pnm(const fs::path& path, const ImageData& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  out << (img.channels == 3 ? "P6" : "P5") << '\n'
      << img.width << ' ' << img.height << '\n'
      << (img.bit_depth == 16 ? 65535 : 255) << '\n';
  for (const auto v : img.samples) {
    if (img.bit_depth == 16) {
      out.put(static_cast<char>(v >> 8));
    }
    out.put(static_cast<char>(v & 0xFF));
  }
  if (!out) {
    throw IoError("write failed for '" + path.string() + "'");
  }
}

ImageData read_single_channel(const fs::path& path, const char* what) {
  ImageData img = read_image(path);
  if (img.channels != 1) {
    throw IoError(std::string(what) + " '" + path.string() + "' must be single-channel");
  }
  return img;
}

std::string extension_lower(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace

ImageData read_image(const fs::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) {
    throw IoError("cannot open '" + path.string() + "'");
  }
  std::array<unsigned char, 8> sig{};
  probe.read(reinterpret_cast<char*>(sig.data()), sig.size());
  probe.close();
  if (png_sig_cmp(sig.data(), 0, sig.size()) == 0) {
    return read_png(path);
  }
  return read_pnm(path);
}

void write_image(const fs::path& path, const ImageData& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw IoError("only 1- or 3-channel images can be written");
  }
  if (image.bit_depth != 8 && image.bit_depth != 16) {
    throw IoError("only 8- or 16-bit images can be written");
  }
  if (image.samples.size() != static_cast<std::size_t>(image.width) * image.height * image.channels) {
    throw ShapeError("image sample count does not match its dimensions");
  }
  if (extension_lower(path) == ".png") {
    write_png(path, image);
  } else {
    write_pnm(path, image);
  }
}

AgreementMap load_agreement_map(const fs::path& path, int n_observers) {
  const ImageData img = read_single_channel(path, "agreement map");
  if (img.bit_depth != 8) {
    throw IoError("agreement map '" + path.string() + "' must be 8-bit");
  }
  Raster<std::uint8_t> counts(img.width, img.height);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    counts[i] = static_cast<std::uint8_t>(img.samples[i]);
  }
  return AgreementMap(std::move(counts), n_observers);
}

void save_agreement_map(const fs::path& path, const AgreementMap& map) {
  ImageData img{map.width(), map.height(), 1, 8, {}};
  img.samples.assign(map.counts().values().begin(), map.counts().values().end());
  write_image(path, img);
}

BinaryMap load_binary_map(const fs::path& path) {
  const ImageData img = read_single_channel(path, "binary map");
  const std::uint16_t on = img.bit_depth == 16 ? 65535 : 255;
  Raster<std::uint8_t> bits(img.width, img.height);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const auto v = img.samples[i];
    if (v != 0 && v != on) {
      throw IoError("binary map '" + path.string() + "' holds value " + std::to_string(v) +
                    " (expected 0 or " + std::to_string(on) + ")");
    }
    bits[i] = v == on ? 1 : 0;
  }
  return BinaryMap(std::move(bits));
}

void save_binary_map(const fs::path& path, const BinaryMap& map) {
  ImageData img{map.width(), map.height(), 1, 8, {}};
  img.samples.reserve(map.bits().size());
  for (const auto b : map.bits().values()) {
    img.samples.push_back(b != 0 ? 255 : 0);
  }
  write_image(path, img);
}

SaliencyMap load_saliency_map(const fs::path& path) {
  const ImageData img = read_single_channel(path, "saliency map");
  const double scale = img.bit_depth == 16 ? 65535.0 : 255.0;
  Raster<double> values(img.width, img.height);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = static_cast<double>(img.samples[i]) / scale;
  }
  return SaliencyMap(std::move(values));
}

std::uint8_t quantize_saliency(double v) noexcept {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void save_saliency_map(const fs::path& path, const SaliencyMap& map) {
  ImageData img{map.width(), map.height(), 1, 8, {}};
  img.samples.reserve(map.values().size());
  for (const double v : map.values().values()) {
    img.samples.push_back(quantize_saliency(v));
  }
  write_image(path, img);
}

InstanceMap load_instance_map(const fs::path& path) {
  const ImageData img = read_single_channel(path, "instance map");
  Raster<std::uint16_t> labels(img.width, img.height, img.samples);
  return InstanceMap(std::move(labels));
}

void save_instance_map(const fs::path& path, const InstanceMap& map) {
  ImageData img{map.width(), map.height(), 1, 16, {}};
  img.samples.assign(map.labels().values().begin(), map.labels().values().end());
  write_image(path, img);
}

}  // namespace relsal
