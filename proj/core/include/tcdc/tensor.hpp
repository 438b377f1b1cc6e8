#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <span>
#include <vector>

#include "tcdc/error.hpp"

namespace tcdc {

using Shape = std::vector<std::size_t>;

inline constexpr std::size_t kMaxRank = 5;

std::size_t shape_size(const Shape& dims);

/// Throws ZeroDim / RankOutOfRange unless 1 <= rank <= 5 and every dim >= 1.
void validate_shape(const Shape& dims);

/// Dense row-major tensor. The last index varies fastest.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape dims, T fill = T{0});
  BasicTensor(Shape dims, std::vector<T> data);

  const Shape& dims() const noexcept { return dims_; }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* ptr() noexcept { return data_.data(); }
  const T* ptr() const noexcept { return data_.data(); }

  T& operator[](std::size_t flat) noexcept { return data_[flat]; }
  const T& operator[](std::size_t flat) const noexcept { return data_[flat]; }

  Shape strides() const;
  std::size_t offset(std::span<const std::size_t> index) const;
  T& at(std::initializer_list<std::size_t> index);
  const T& at(std::initializer_list<std::size_t> index) const;

  /// Reinterprets the buffer with new dims of equal element count.
  void reshape(Shape dims);
  void fill(T value);

  bool operator==(const BasicTensor& other) const = default;

 private:
  Shape dims_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

template <typename T>
BasicTensor<T> tensor_new(const Shape& dims, T fill);

enum class Map2Op { Add, Sub, Mul, Scale };

/// Elementwise binary op. For Scale, b is a rank-1 length-1 scalar tensor.
template <typename T>
BasicTensor<T> tensor_map2(const BasicTensor<T>& a, const BasicTensor<T>& b, Map2Op op);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return tensor_map2(a, b, Map2Op::Add);
}
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return tensor_map2(a, b, Map2Op::Sub);
}
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return tensor_map2(a, b, Map2Op::Mul);
}
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T s) {
  return tensor_map2(a, BasicTensor<T>({1}, s), Map2Op::Scale);
}

template <typename To, typename From>
BasicTensor<To> tensor_cast(const BasicTensor<From>& src) {
  std::vector<To> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = static_cast<To>(src[i]);
  return BasicTensor<To>(src.dims(), std::move(out));
}

void require_same_dims(const Shape& a, const Shape& b, const char* context);

// VTNS: "VTNS" | u8 version=1 | u8 rank | rank x u32le dims | f32le payload.
inline constexpr std::uint8_t kVtnsVersion = 1;

std::vector<std::uint8_t> tensor_encode(const Tensor& t);
Tensor tensor_decode(std::span<const std::uint8_t> bytes);

void tensor_save(const Tensor& t, const std::filesystem::path& path);
Tensor tensor_load(const std::filesystem::path& path);

}  // namespace tcdc
