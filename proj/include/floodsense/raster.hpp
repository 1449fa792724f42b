#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <png.h>

namespace floodsense {

/// 8-bit RGB raster, row-major, no padding.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* at(int x, int y) { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &rgb[(static_cast<std::size_t>(y) * width + x) * 3];
  }
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    auto* p = at(x, y);
    p[0] = r, p[1] = g, p[2] = b;
  }
  bool empty() const noexcept { return width <= 0 || height <= 0; }
};

/// Integer Rec. 601 luma, 0..255.
inline int luma(const std::uint8_t* px) { return (77 * px[0] + 150 * px[1] + 29 * px[2] + 128) >> 8; }

/// Single-channel float grid produced by resampling.
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  double operator()(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

/// Box-filter weights mapping `src` source samples onto `dst` outputs: each
/// output covers the source interval [o*src/dst, (o+1)*src/dst).
struct AxisWeights {
  struct Tap {
    int index;
    double weight;
  };
  std::vector<std::vector<Tap>> taps;
};

inline AxisWeights area_weights(int src, int dst) {
  AxisWeights w;
  w.taps.resize(dst);
  for (int o = 0; o < dst; ++o) {
    // Work in units of 1/dst source pixels to keep the edges exact.
    const long long lo = static_cast<long long>(o) * src;
    const long long hi = static_cast<long long>(o + 1) * src;
    for (long long s = lo / dst; s * dst < hi && s < src; ++s) {
      const long long a = std::max(lo, s * dst);
      const long long b = std::min(hi, (s + 1) * dst);
      if (b > a) w.taps[o].push_back({static_cast<int>(s), static_cast<double>(b - a) / src});
    }
  }
  return w;
}

}  // namespace detail

/// Area-averaged luma resample to dst_w x dst_h. Works for up- and downscaling.
inline Grid resample_luma(const Image& img, int dst_w, int dst_h) {
  const auto wx = detail::area_weights(img.width, dst_w);
  const auto wy = detail::area_weights(img.height, dst_h);
  std::vector<int> gray(static_cast<std::size_t>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      gray[static_cast<std::size_t>(y) * img.width + x] = luma(img.at(x, y));
  Grid g{dst_w, dst_h, std::vector<double>(static_cast<std::size_t>(dst_w) * dst_h, 0.0)};
  for (int oy = 0; oy < dst_h; ++oy)
    for (int ox = 0; ox < dst_w; ++ox) {
      double acc = 0;
      for (const auto& ty : wy.taps[oy])
        for (const auto& tx : wx.taps[ox])
          acc += ty.weight * tx.weight * gray[static_cast<std::size_t>(ty.index) * img.width + tx.index];
      g.values[static_cast<std::size_t>(oy) * dst_w + ox] = acc;
    }
  return g;
}

/// Area-averaged RGB resample, rounded back to 8 bits.
inline Image resample_rgb(const Image& img, int dst_w, int dst_h) {
  const auto wx = detail::area_weights(img.width, dst_w);
  const auto wy = detail::area_weights(img.height, dst_h);
  Image out(dst_w, dst_h);
  for (int oy = 0; oy < dst_h; ++oy)
    for (int ox = 0; ox < dst_w; ++ox) {
      double acc[3] = {0, 0, 0};
      for (const auto& ty : wy.taps[oy])
        for (const auto& tx : wx.taps[ox]) {
          const auto* p = img.at(tx.index, ty.index);
          const double w = ty.weight * tx.weight;
          for (int c = 0; c < 3; ++c) acc[c] += w * p[c];
        }
      auto* q = out.at(ox, oy);
      for (int c = 0; c < 3; ++c)
        q[c] = static_cast<std::uint8_t>(std::clamp(static_cast<int>(acc[c] + 0.5), 0, 255));
    }
  return out;
}

namespace detail {

inline std::optional<Image> decode_pnm(std::span<const std::uint8_t> data) {
  std::size_t pos = 2;
  auto skip_ws = [&] {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(data[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> std::optional<long> {
    skip_ws();
    long v = 0;
    std::size_t start = pos;
    while (pos < data.size() && std::isdigit(data[pos])) {
      v = v * 10 + (data[pos] - '0');
      if (v > (1L << 20)) return std::nullopt;
      ++pos;
    }
    if (pos == start) return std::nullopt;
    return v;
  };
  const char kind = static_cast<char>(data[1]);
  const auto w = read_int();
  const auto h = read_int();
  const auto maxval = read_int();
  if (!w || !h || !maxval || *w <= 0 || *h <= 0 || *maxval <= 0 || *maxval > 255) return std::nullopt;
  const int channels = kind == '6' || kind == '3' ? 3 : 1;
  Image img(static_cast<int>(*w), static_cast<int>(*h));
  const std::size_t count = static_cast<std::size_t>(*w) * *h * channels;
  std::vector<int> samples;
  samples.reserve(count);
  if (kind == '5' || kind == '6') {
    if (pos >= data.size() || !std::isspace(data[pos])) return std::nullopt;
    ++pos;
    if (data.size() - pos < count) return std::nullopt;
    for (std::size_t i = 0; i < count; ++i) samples.push_back(data[pos + i]);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      auto v = read_int();
      if (!v) return std::nullopt;
      samples.push_back(static_cast<int>(*v));
    }
  }
  for (std::size_t i = 0, px = 0; px < static_cast<std::size_t>(*w) * *h; ++px) {
    for (int c = 0; c < 3; ++c) {
      const int v = samples[i + (channels == 3 ? c : 0)];
      if (v > *maxval) return std::nullopt;
      img.rgb[px * 3 + c] = static_cast<std::uint8_t>(v * 255 / *maxval);
    }
    i += channels;
  }
  return img;
}

inline std::optional<Image> decode_png(std::span<const std::uint8_t> data) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, data.data(), data.size())) return std::nullopt;
  png.format = PNG_FORMAT_RGB;
  if (png.width == 0 || png.height == 0 || png.width > (1u << 15) || png.height > (1u << 15)) {
    png_image_free(&png);
    return std::nullopt;
  }
  Image img(static_cast<int>(png.width), static_cast<int>(png.height));
  if (!png_image_finish_read(&png, nullptr, img.rgb.data(), 0, nullptr)) {
    png_image_free(&png);
    return std::nullopt;
  }
  return img;
}

}  // namespace detail

/// Decodes binary/ASCII PNM (P2, P3, P5, P6) or PNG. nullopt if unreadable.
inline std::optional<Image> decode_image(std::span<const std::uint8_t> data) {
  static constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (data.size() >= 8 && std::equal(kPngSig, kPngSig + 8, data.begin())) return detail::decode_png(data);
  if (data.size() >= 3 && data[0] == 'P' &&
      (data[1] == '2' || data[1] == '3' || data[1] == '5' || data[1] == '6'))
    return detail::decode_pnm(data);
  return std::nullopt;
}

inline std::optional<Image> load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_image(bytes);
}

inline std::vector<std::uint8_t> encode_ppm(const Image& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.rgb.begin(), img.rgb.end());
  return out;
}

inline bool save_ppm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  const auto bytes = encode_ppm(img);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  return static_cast<bool>(out);
}

}  // namespace floodsense
