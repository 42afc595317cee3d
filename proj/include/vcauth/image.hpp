#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

// Binary-image data model shared by every module. Pixel convention:
// 0 = white (transparent), 1 = black (opaque). Storage is row-major,
// one byte per pixel. All values are immutable once built; the free
// functions below are pure and return fresh values.

namespace vcauth {

// Side length cap; keeps pixel counts within 2^32 and bounds memory.
inline constexpr std::uint32_t kMaxImageSide = 65536;

namespace detail {

inline void check_dims(std::uint32_t width, std::uint32_t height) {
  if (width == 0 || height == 0)
    throw std::invalid_argument("image dimensions must be at least 1x1");
  if (width > kMaxImageSide || height > kMaxImageSide)
    throw std::invalid_argument("image dimension exceeds " +
                                std::to_string(kMaxImageSide) + " per side");
}

inline std::string dims_str(std::uint32_t w, std::uint32_t h) {
  return std::to_string(w) + "x" + std::to_string(h);
}

}  // namespace detail

/// Rectangular bit matrix. Every element is 0 or 1.
class BinaryImage {
 public:
  BinaryImage(std::uint32_t width, std::uint32_t height, std::uint8_t fill = 0)
      : width_(width), height_(height) {
    detail::check_dims(width, height);
    if (fill > 1) throw std::invalid_argument("pixel value must be 0 or 1");
    bits_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  BinaryImage(std::uint32_t width, std::uint32_t height,
              std::vector<std::uint8_t> bits)
      : width_(width), height_(height), bits_(std::move(bits)) {
    detail::check_dims(width, height);
    if (bits_.size() != static_cast<std::size_t>(width) * height)
      throw std::invalid_argument("bit buffer size does not match dimensions");
    for (std::uint8_t b : bits_)
      if (b > 1) throw std::invalid_argument("pixel value must be 0 or 1");
  }

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  std::uint64_t pixel_count() const {
    return static_cast<std::uint64_t>(width_) * height_;
  }

  std::uint8_t get(std::uint32_t row, std::uint32_t col) const {
    check_coords(row, col);
    return bits_[static_cast<std::size_t>(row) * width_ + col];
  }

  void set(std::uint32_t row, std::uint32_t col, std::uint8_t bit) {
    check_coords(row, col);
    if (bit > 1) throw std::invalid_argument("pixel value must be 0 or 1");
    bits_[static_cast<std::size_t>(row) * width_ + col] = bit;
  }

  const std::vector<std::uint8_t>& bits() const { return bits_; }

  std::uint64_t count_black() const {
    std::uint64_t c = 0;
    for (std::uint8_t b : bits_) c += b;
    return c;
  }

  bool same_dimensions(const BinaryImage& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const BinaryImage&, const BinaryImage&) = default;

 private:
  void check_coords(std::uint32_t row, std::uint32_t col) const {
    if (row >= height_ || col >= width_)
      throw std::out_of_range("pixel coordinates out of range");
  }

  std::uint32_t width_;
  std::uint32_t height_;
  std::vector<std::uint8_t> bits_;
};

/// Grayscale matrix with intensities in [0,255]; only ever an input to
/// binarize().
class GrayImage {
 public:
  GrayImage(std::uint32_t width, std::uint32_t height, std::uint8_t fill = 0)
      : width_(width), height_(height) {
    detail::check_dims(width, height);
    levels_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  GrayImage(std::uint32_t width, std::uint32_t height,
            std::vector<std::uint8_t> levels)
      : width_(width), height_(height), levels_(std::move(levels)) {
    detail::check_dims(width, height);
    if (levels_.size() != static_cast<std::size_t>(width) * height)
      throw std::invalid_argument("level buffer size does not match dimensions");
  }

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }

  std::uint8_t get(std::uint32_t row, std::uint32_t col) const {
    if (row >= height_ || col >= width_)
      throw std::out_of_range("pixel coordinates out of range");
    return levels_[static_cast<std::size_t>(row) * width_ + col];
  }

  void set(std::uint32_t row, std::uint32_t col, std::uint8_t level) {
    if (row >= height_ || col >= width_)
      throw std::out_of_range("pixel coordinates out of range");
    levels_[static_cast<std::size_t>(row) * width_ + col] = level;
  }

  const std::vector<std::uint8_t>& levels() const { return levels_; }

 private:
  std::uint32_t width_;
  std::uint32_t height_;
  std::vector<std::uint8_t> levels_;
};

/// Boolean pixel selection over an image of matching dimensions.
class RegionMask {
 public:
  RegionMask(std::uint32_t width, std::uint32_t height, bool fill = false)
      : width_(width), height_(height) {
    detail::check_dims(width, height);
    flags_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
  }

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }

  bool get(std::uint32_t row, std::uint32_t col) const {
    if (row >= height_ || col >= width_)
      throw std::out_of_range("mask coordinates out of range");
    return flags_[static_cast<std::size_t>(row) * width_ + col] != 0;
  }

  void set(std::uint32_t row, std::uint32_t col, bool flag) {
    if (row >= height_ || col >= width_)
      throw std::out_of_range("mask coordinates out of range");
    flags_[static_cast<std::size_t>(row) * width_ + col] = flag ? 1 : 0;
  }

  std::uint64_t count_selected() const {
    std::uint64_t c = 0;
    for (std::uint8_t f : flags_) c += f;
    return c;
  }

  bool matches(const BinaryImage& img) const {
    return width_ == img.width() && height_ == img.height();
  }

  friend bool operator==(const RegionMask&, const RegionMask&) = default;

 private:
  std::uint32_t width_;
  std::uint32_t height_;
  std::vector<std::uint8_t> flags_;
};

namespace detail {

inline void require_same_dims(const BinaryImage& a, const BinaryImage& b,
                              const char* what) {
  if (!a.same_dimensions(b))
    throw std::invalid_argument(std::string(what) + ": dimension mismatch: " +
                                dims_str(a.width(), a.height()) + " vs " +
                                dims_str(b.width(), b.height()));
}

}  // namespace detail

/// Global threshold: a pixel turns black exactly when its intensity is
/// below the threshold. threshold must lie in [0,255].
inline BinaryImage binarize(const GrayImage& img, int threshold) {
  if (threshold < 0 || threshold > 255)
    throw std::invalid_argument("threshold must be in [0,255]");
  std::vector<std::uint8_t> bits(img.levels().size());
  for (std::size_t i = 0; i < bits.size(); ++i)
    bits[i] = img.levels()[i] < threshold ? 1 : 0;
  return BinaryImage(img.width(), img.height(), std::move(bits));
}

/// Mask of pixels where the two images differ.
inline RegionMask diff_mask(const BinaryImage& a, const BinaryImage& b) {
  detail::require_same_dims(a, b, "diff_mask");
  RegionMask mask(a.width(), a.height());
  for (std::uint32_t r = 0; r < a.height(); ++r)
    for (std::uint32_t c = 0; c < a.width(); ++c)
      mask.set(r, c, a.get(r, c) != b.get(r, c));
  return mask;
}

/// Fraction of mask-selected pixels that are white. This is the light
/// transmission of a region in a stacked result.
inline double region_fraction_white(const BinaryImage& img,
                                    const RegionMask& mask) {
  if (!mask.matches(img))
    throw std::invalid_argument(
        "region_fraction_white: mask dimension mismatch: " +
        detail::dims_str(img.width(), img.height()) + " vs " +
        detail::dims_str(mask.width(), mask.height()));
  std::uint64_t selected = 0;
  std::uint64_t white = 0;
  for (std::uint32_t r = 0; r < img.height(); ++r) {
    for (std::uint32_t c = 0; c < img.width(); ++c) {
      if (!mask.get(r, c)) continue;
      ++selected;
      if (img.get(r, c) == 0) ++white;
    }
  }
  if (selected == 0)
    throw std::invalid_argument("region_fraction_white: empty mask");
  return static_cast<double>(white) / static_cast<double>(selected);
}

}  // namespace vcauth
