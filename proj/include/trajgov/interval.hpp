#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace trajgov {

/// Closed integer interval [first, last]. Used for layer bands and token
/// windows; both ends are inclusive everywhere in this library.
struct Interval {
  int first = 0;
  int last = 0;

  int length() const noexcept { return last - first + 1; }
  bool contains(int i) const noexcept { return i >= first && i <= last; }
  bool within(const Interval& outer) const noexcept {
    return first >= outer.first && last <= outer.last && first <= last;
  }
  bool operator==(const Interval&) const = default;
};

/// Parses "a:b" (inclusive). Throws Error(ConfigError) on malformed text.
Interval parse_interval(std::string_view text);
std::string format_interval(const Interval& iv);

/// Row-major dense matrix.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  const std::vector<T>& data() const noexcept { return data_; }
  std::vector<T>& data() noexcept { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

}  // namespace trajgov
