#ifndef PUSHDQN_TENSOR_H_
#define PUSHDQN_TENSOR_H_

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pushdqn {

// Dense row-major tensor.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, T fill = T{})
      : shape_(std::move(shape)), data_(CountOf(shape_), fill) {}
  Tensor(std::vector<int> shape, std::vector<T> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != CountOf(shape_)) {
      throw std::invalid_argument("Tensor: value count does not match shape");
    }
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  void Fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Tensor&) const = default;

  static std::size_t CountOf(const std::vector<int>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, int d) {
                             if (d < 0) {
                               throw std::invalid_argument(
                                   "Tensor: negative dimension");
                             }
                             return a * static_cast<std::size_t>(d);
                           });
  }

 private:
  std::vector<int> shape_;
  std::vector<T> data_;
};

std::string ShapeString(const std::vector<int>& shape);

}  // namespace pushdqn

#endif  // PUSHDQN_TENSOR_H_
