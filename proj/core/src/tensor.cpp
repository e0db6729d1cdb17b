#include "faultguard/tensor.hpp"

#include <cstring>
#include <sstream>

#include "faultguard/errors.hpp"

namespace fg {

Tensor::Tensor(std::vector<int64_t> s, std::vector<float> d)
    : shape(std::move(s)), data(std::move(d)) {
  check();
}

Tensor Tensor::zeros(std::vector<int64_t> s) {
  const int64_t n = shape_numel(s);
  Tensor t;
  t.shape = std::move(s);
  t.data.assign(static_cast<size_t>(n), 0.0f);
  return t;
}

Tensor Tensor::full(std::vector<int64_t> s, float value) {
  Tensor t = zeros(std::move(s));
  for (float& v : t.data) v = value;
  return t;
}

int64_t Tensor::shape_numel(const std::vector<int64_t>& s) {
  if (s.empty()) throw ShapeError("tensor shape must have at least one dimension");
  int64_t n = 1;
  for (int64_t d : s) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(s));
    n *= d;
  }
  return n;
}

int64_t Tensor::rows() const {
  if (shape.size() != 2) throw ShapeError("expected 2-d tensor, got " + shape_str(shape));
  return shape[0];
}

int64_t Tensor::cols() const {
  if (shape.size() != 2) throw ShapeError("expected 2-d tensor, got " + shape_str(shape));
  return shape[1];
}

void Tensor::check() const {
  if (shape_numel(shape) != numel()) {
    throw ShapeError("tensor data length " + std::to_string(numel()) +
                     " does not match shape " + shape_str(shape));
  }
}

bool Tensor::same_bits(const Tensor& other) const {
  if (shape != other.shape) return false;
  return std::memcmp(data.data(), other.data.data(), data.size() * sizeof(float)) == 0;
}

std::string shape_str(const std::vector<int64_t>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

}  // namespace fg
