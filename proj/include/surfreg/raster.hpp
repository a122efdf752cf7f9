#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "surfreg/error.hpp"

namespace surfreg {

/// Row-major 2D grid. (col, row) addressing matches pixel (u, v).
template <class T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(checked(width)) * checked(height), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool in_bounds(int col, int row) const {
    return col >= 0 && row >= 0 && col < width_ && row < height_;
  }

  T& operator()(int col, int row) { return data_[index(col, row)]; }
  const T& operator()(int col, int row) const { return data_[index(col, row)]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  static int checked(int n) {
    if (n < 0) throw Error(ErrorKind::InvalidParameter, "raster: negative dimension");
    return n;
  }
  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Rgb8 = std::array<std::uint8_t, 3>;
using RgbImage = Raster<Rgb8>;
/// Depth in meters; 0 marks an invalid pixel.
using DepthMap = Raster<double>;
/// Binary mask with values 0 or 1.
using BinaryMask = Raster<std::uint8_t>;

}  // namespace surfreg
