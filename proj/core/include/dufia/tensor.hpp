#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dufia {

/// Channel-first dimensions (C, H, W). Used for images, gradients, spectra and
/// feature maps alike.
struct Shape3 {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return channels * height * width; }
  bool operator==(const Shape3&) const = default;
  std::string str() const;
};

/// Dense channel-first float tensor.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(Shape3 shape, float fill = 0.0f)
      : shape_(shape), data_(shape.size(), fill) {}
  Tensor3(Shape3 shape, std::vector<float> data);

  const Shape3& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }
  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }
  std::vector<float>& storage() { return data_; }
  const std::vector<float>& storage() const { return data_; }

  bool operator==(const Tensor3&) const = default;

 private:
  Shape3 shape_;
  std::vector<float> data_;
};

/// Values are intensities in [0, 1]. The alias documents intent; the range
/// is checked where it is contractual (dataset output, attack results).
using Image = Tensor3;

bool in_unit_range(const Tensor3& t);
float max_abs(std::span<const float> v);
double max_abs_diff(const Tensor3& a, const Tensor3& b);

/// Hex SHA-256 of the raw little-endian float bytes.
std::string tensor_digest(const Tensor3& t);

}  // namespace dufia
