#include "dufia/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "dufia/digest.hpp"
#include "dufia/errors.hpp"

namespace dufia {

std::string Shape3::str() const {
  return std::to_string(channels) + "x" + std::to_string(height) + "x" +
         std::to_string(width);
}

Tensor3::Tensor3(Shape3 shape, std::vector<float> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw ShapeError("tensor data has " + std::to_string(data_.size()) +
                     " elements, shape " + shape_.str() + " needs " +
                     std::to_string(shape_.size()));
  }
}

bool in_unit_range(const Tensor3& t) {
  return std::all_of(t.values().begin(), t.values().end(),
                     [](float v) { return v >= 0.0f && v <= 1.0f; });
}

float max_abs(std::span<const float> v) {
  float m = 0.0f;
  for (float x : v) m = std::max(m, std::fabs(x));
  return m;
}

double max_abs_diff(const Tensor3& a, const Tensor3& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff: " + a.shape().str() + " vs " +
                     b.shape().str());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::fabs(static_cast<double>(a[i]) -
                              static_cast<double>(b[i])));
  }
  return m;
}

std::string tensor_digest(const Tensor3& t) {
  return sha256_hex(std::as_bytes(t.values()));
}

}  // namespace dufia
