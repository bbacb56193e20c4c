#ifndef GROUNDFLOW_GRID_HPP
#define GROUNDFLOW_GRID_HPP

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace groundflow
{
/// Dense row-major 2D array. Index (x, y) is column x, row y.
template <typename T>
class Grid
{
public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
  : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill)
  {
    assert(width >= 0 && height >= 0);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T & operator()(int x, int y) { return data_[index(x, y)]; }
  const T & operator()(int x, int y) const { return data_[index(x, y)]; }

  T * row(int y) { return data_.data() + static_cast<std::size_t>(y) * width_; }
  const T * row(int y) const { return data_.data() + static_cast<std::size_t>(y) * width_; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  void fill(const T & value) { std::fill(data_.begin(), data_.end(), value); }

  template <typename U>
  bool same_shape(const Grid<U> & other) const
  {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid &, const Grid &) = default;

private:
  std::size_t index(int x, int y) const
  {
    assert(x >= 0 && x < width_ && y >= 0 && y < height_);
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Image8 = Grid<std::uint8_t>;
using ImageF = Grid<float>;

}  // namespace groundflow

#endif  // GROUNDFLOW_GRID_HPP
