#include "rpca/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "rpca/common.hpp"

namespace rpca {

RawImage decode_raw(const std::filesystem::path& path) {
  RawImage raw;
  std::string reason;
  check(try_decode_raw(path, &raw, &reason), ErrorKind::ingestion,
        "cannot decode image " + path.string() + ": " + reason);
  return raw;
}

bool try_decode_raw(const std::filesystem::path& path, RawImage* out,
                    std::string* reason) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) {
    if (reason != nullptr) *reason = "undecodable or unreadable";
    return false;
  }
  if (bgr.channels() != 3 || bgr.depth() != CV_8U) {
    if (reason != nullptr) *reason = "unsupported pixel format";
    return false;
  }
  out->height = bgr.rows;
  out->width = bgr.cols;
  out->rgb.resize(static_cast<size_t>(bgr.rows) * bgr.cols * 3);
  for (int i = 0; i < bgr.rows; ++i) {
    const uint8_t* row = bgr.ptr<uint8_t>(i);
    uint8_t* dst = out->rgb.data() + static_cast<size_t>(i) * bgr.cols * 3;
    for (int j = 0; j < bgr.cols; ++j) {
      dst[j * 3 + 0] = row[j * 3 + 2];
      dst[j * 3 + 1] = row[j * 3 + 1];
      dst[j * 3 + 2] = row[j * 3 + 0];
    }
  }
  return true;
}

Image image_from_raw(const RawImage& raw) {
  Image img;
  img.data = Tensor({raw.height, raw.width, 3});
  for (int64_t i = 0; i < img.data.size(); ++i) {
    img.data[i] = static_cast<float>(raw.rgb[static_cast<size_t>(i)]);
  }
  return img;
}

Image decode_image(const std::filesystem::path& path) {
  return image_from_raw(decode_raw(path));
}

std::vector<uint8_t> encode_png(const Image& img) {
  check(img.order == Image::ColorOrder::rgb && !img.centered, ErrorKind::input,
        "png encoding expects an uncentered RGB image");
  int h = img.height(), w = img.width();
  cv::Mat bgr(h, w, CV_8UC3);
  for (int i = 0; i < h; ++i) {
    uint8_t* row = bgr.ptr<uint8_t>(i);
    for (int j = 0; j < w; ++j) {
      for (int k = 0; k < 3; ++k) {
        float v = std::clamp(img.data.at(i, j, k), 0.0f, 255.0f);
        row[j * 3 + (2 - k)] = static_cast<uint8_t>(std::lround(v));
      }
    }
  }
  std::vector<uint8_t> bytes;
  check(cv::imencode(".png", bgr, bytes), ErrorKind::io, "png encoding failed");
  return bytes;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  std::vector<uint8_t> bytes = encode_png(img);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    FILE* f = std::fopen(tmp.string().c_str(), "wb");
    check(f != nullptr, ErrorKind::io, "cannot write " + tmp.string());
    size_t n = std::fwrite(bytes.data(), 1, bytes.size(), f);
    std::fclose(f);
    check(n == bytes.size(), ErrorKind::io, "short write: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Image resize_bilinear_image(const Image& img, int out_h, int out_w) {
  check(out_h >= 1 && out_w >= 1, ErrorKind::parameter, "resize target must be positive");
  int h = img.height(), w = img.width();
  check(h >= 1 && w >= 1, ErrorKind::shape, "empty image");
  Image out;
  out.order = img.order;
  out.centered = img.centered;
  out.data = Tensor({out_h, out_w, 3});
  double sy = static_cast<double>(h) / out_h;
  double sx = static_cast<double>(w) / out_w;
  for (int i = 0; i < out_h; ++i) {
    double fy = (i + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
    int y0 = std::min(static_cast<int>(fy), h - 1);
    int y1 = std::min(y0 + 1, h - 1);
    double wy = fy - y0;
    for (int j = 0; j < out_w; ++j) {
      double fx = (j + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
      int x0 = std::min(static_cast<int>(fx), w - 1);
      int x1 = std::min(x0 + 1, w - 1);
      double wx = fx - x0;
      for (int k = 0; k < 3; ++k) {
        double top = img.data.at(y0, x0, k) * (1 - wx) + img.data.at(y0, x1, k) * wx;
        double bot = img.data.at(y1, x0, k) * (1 - wx) + img.data.at(y1, x1, k) * wx;
        out.data.at(i, j, k) = static_cast<float>(top * (1 - wy) + bot * wy);
      }
    }
  }
  return out;
}

Image center_crop(const Image& img, int side) {
  int h = img.height(), w = img.width();
  check(h >= side && w >= side, ErrorKind::shape, "image smaller than crop");
  int oy = (h - side) / 2;
  int ox = (w - side) / 2;
  Image out;
  out.order = img.order;
  out.centered = img.centered;
  out.data = Tensor({side, side, 3});
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      for (int k = 0; k < 3; ++k) {
        out.data.at(i, j, k) = img.data.at(i + oy, j + ox, k);
      }
    }
  }
  return out;
}

Image hflip_image(const Image& img) {
  int h = img.height(), w = img.width();
  Image out;
  out.order = img.order;
  out.centered = img.centered;
  out.data = Tensor({h, w, 3});
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      for (int k = 0; k < 3; ++k) {
        out.data.at(i, j, k) = img.data.at(i, w - 1 - j, k);
      }
    }
  }
  return out;
}

namespace {

// reflect-101 index: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  int period = 2 * (n - 1);
  i = std::abs(i) % period;
  return i < n ? i : period - i;
}

}  // namespace

Image gaussian_blur(const Image& img, int kernel_side, double sigma) {
  check(kernel_side >= 1 && kernel_side % 2 == 1, ErrorKind::parameter,
        "blur kernel side must be odd");
  check(sigma > 0.0, ErrorKind::parameter, "blur sigma must be positive");
  int r = kernel_side / 2;
  std::vector<double> kernel(static_cast<size_t>(kernel_side));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    kernel[static_cast<size_t>(i + r)] = v;
    sum += v;
  }
  for (double& v : kernel) v /= sum;

  int h = img.height(), w = img.width();
  Tensor tmp({h, w, 3});
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      for (int k = 0; k < 3; ++k) {
        double acc = 0.0;
        for (int d = -r; d <= r; ++d) {
          acc += kernel[static_cast<size_t>(d + r)] *
                 img.data.at(i, reflect_index(j + d, w), k);
        }
        tmp.at(i, j, k) = static_cast<float>(acc);
      }
    }
  }
  Image out;
  out.order = img.order;
  out.centered = img.centered;
  out.data = Tensor({h, w, 3});
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      for (int k = 0; k < 3; ++k) {
        double acc = 0.0;
        for (int d = -r; d <= r; ++d) {
          acc += kernel[static_cast<size_t>(d + r)] * tmp.at(reflect_index(i + d, h), j, k);
        }
        out.data.at(i, j, k) = static_cast<float>(std::clamp(acc, 0.0, 255.0));
      }
    }
  }
  return out;
}

}  // namespace rpca
