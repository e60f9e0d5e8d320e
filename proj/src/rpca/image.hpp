#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "rpca/tensor.hpp"

namespace rpca {

// Decoded image held as float HxWx3 in [0, 255]. Stays RGB through the data
// pipeline; preprocessing for the backbone flips to BGR and centers.
struct Image {
  enum class ColorOrder { rgb, bgr };

  Tensor data;  // (H, W, 3)
  ColorOrder order = ColorOrder::rgb;
  bool centered = false;

  int height() const { return data.rank() == 3 ? data.dim(0) : 0; }
  int width() const { return data.rank() == 3 ? data.dim(1) : 0; }
};

// Undecoded 8-bit RGB pixels, the cacheable form of a dataset record.
struct RawImage {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> rgb;  // H*W*3
};

RawImage decode_raw(const std::filesystem::path& path);
bool try_decode_raw(const std::filesystem::path& path, RawImage* out,
                    std::string* reason);

Image image_from_raw(const RawImage& raw);
Image decode_image(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const Image& img);
std::vector<uint8_t> encode_png(const Image& img);

// Half-pixel-center bilinear resize with edge clamping. in == out is the
// identity map.
Image resize_bilinear_image(const Image& img, int out_h, int out_w);

Image center_crop(const Image& img, int side);
Image hflip_image(const Image& img);
Image gaussian_blur(const Image& img, int kernel_side, double sigma);

}  // namespace rpca
