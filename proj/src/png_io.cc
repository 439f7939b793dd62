// clickadapt/src/png_io.cc

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "clickadapt/png_io.h"

#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace clickadapt {

namespace {

constexpr std::uint8_t kPalette[][3] = {
    {0, 0, 0},     {230, 25, 75},  {60, 180, 75},  {255, 225, 25},
    {0, 130, 200}, {245, 130, 48}, {145, 30, 180}, {70, 240, 240},
};

struct MemoryReader {
  const std::uint8_t *data;
  std::size_t size;
  std::size_t pos;
};

void ReadCallback(png_structp png, png_bytep out, png_size_t n) {
  auto *r = static_cast<MemoryReader *>(png_get_io_ptr(png));
  if (r->pos + n > r->size) png_error(png, "unexpected end of data");
  std::memcpy(out, r->data + r->pos, n);
  r->pos += n;
}

void WriteCallback(png_structp png, png_bytep in, png_size_t n) {
  auto *out = static_cast<std::vector<std::uint8_t> *>(png_get_io_ptr(png));
  out->insert(out->end(), in, in + n);
}

void FlushCallback(png_structp) {}

// Reads an 8-bit single-sample raster into `out`; returns an error message or
// nullptr. Kept free of non-trivial locals because libpng reports errors
// through longjmp.
const char *ReadIndexed(const std::uint8_t *data, std::size_t size, int *height,
                        int *width, std::vector<std::uint8_t> *out) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           nullptr, nullptr);
  if (!png) return "out of memory";
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return "out of memory";
  }
  MemoryReader reader{data, size, 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return "malformed PNG";
  }
  png_set_read_fn(png, &reader, ReadCallback);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if ((color != PNG_COLOR_TYPE_PALETTE && color != PNG_COLOR_TYPE_GRAY) ||
      depth > 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    return "mask must be palette or 8-bit gray";
  }
  if (depth < 8) png_set_packing(png);
  png_read_update_info(png, info);
  *height = static_cast<int>(png_get_image_height(png, info));
  *width = static_cast<int>(png_get_image_width(png, info));
  out->resize(static_cast<std::size_t>(*height) * *width);
  for (int r = 0; r < *height; ++r)
    png_read_row(png, out->data() + static_cast<std::size_t>(r) * *width, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return nullptr;
}

const char *WritePalette(const std::uint8_t *labels, int height, int width,
                         int num_colors, std::vector<std::uint8_t> *out) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  if (!png) return "out of memory";
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return "out of memory";
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return "PNG encoding failed";
  }
  png_set_write_fn(png, out, WriteCallback, FlushCallback);
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_PALETTE,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_color palette[256];
  for (int i = 0; i < num_colors; ++i) {
    const std::uint8_t *c = kPalette[i % 8];
    palette[i].red = c[0];
    palette[i].green = c[1];
    palette[i].blue = c[2];
  }
  png_set_PLTE(png, info, palette, num_colors);
  png_write_info(png, info);
  for (int r = 0; r < height; ++r)
    png_write_row(png, labels + static_cast<std::size_t>(r) * width);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return nullptr;
}

}  // namespace

std::vector<std::uint8_t> EncodeImagePng(const Image &image) {
  if (image.channels() != 1 && image.channels() != 3)
    throw Error(ErrorCode::kBadImage, "PNG export supports 1 or 3 channels");
  const int C = image.channels();
  const std::size_t plane = image.plane_size();
  std::vector<std::uint8_t> interleaved(plane * C);
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < C; ++c) {
      const float v = image.pixels()[c * plane + p];
      interleaved[p * C + c] = static_cast<std::uint8_t>(
          std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    }
  }
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = image.width();
  img.height = image.height();
  img.format = C == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, interleaved.data(), 0,
                                 nullptr))
    throw Error(ErrorCode::kBadImage, img.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, interleaved.data(),
                                 0, nullptr))
    throw Error(ErrorCode::kBadImage, img.message);
  out.resize(size);
  return out;
}

Image DecodeImagePng(std::span<const std::uint8_t> bytes) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
    throw Error(ErrorCode::kBadImage, std::string("cannot decode PNG: ") + img.message);
  const bool color = img.format & PNG_FORMAT_FLAG_COLOR;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int C = color ? 3 : 1;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error(ErrorCode::kBadImage, std::string("cannot decode PNG: ") + img.message);
  }
  const int H = static_cast<int>(img.height), W = static_cast<int>(img.width);
  if (H < kMinRasterSide || W < kMinRasterSide)
    throw Error(ErrorCode::kBadImage, "image smaller than 8x8");
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::vector<float> pixels(plane * C);
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < C; ++c) pixels[c * plane + p] = buffer[p * C + c] / 255.0f;
  }
  return Image(C, H, W, std::move(pixels));
}

std::vector<std::uint8_t> EncodeMaskPng(const LabelMask &mask) {
  std::vector<std::uint8_t> out;
  const int colors = std::max(2, mask.num_classes());
  if (const char *err = WritePalette(mask.labels().data(), mask.height(),
                                     mask.width(), colors, &out))
    throw Error(ErrorCode::kBadImage, err);
  return out;
}

LabelMask DecodeMaskPng(std::span<const std::uint8_t> bytes, int num_classes) {
  std::vector<std::uint8_t> labels;
  int H = 0, W = 0;
  if (const char *err = ReadIndexed(bytes.data(), bytes.size(), &H, &W, &labels))
    throw Error(ErrorCode::kBadImage, err);
  if (H < kMinRasterSide || W < kMinRasterSide)
    throw Error(ErrorCode::kBadImage, "mask smaller than 8x8");
  return LabelMask(H, W, num_classes, std::move(labels));
}

std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
}

void WriteFileBytes(const std::filesystem::path &path,
                    std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

}  // namespace clickadapt
