#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace medtag {

/// Dense row-major tensor of doubles. Scalars are shape {1}.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(count(shape), 0.0) {}
  Tensor(std::vector<int> s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != count(shape)) {
      throw std::invalid_argument("Tensor: " + std::to_string(data.size()) + " values for shape " + shape_str());
    }
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor vec(std::vector<double> values) {
    int n = static_cast<int>(values.size());
    return Tensor({n}, std::move(values));
  }

  static std::size_t count(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::size_t size() const { return data.size(); }
  int dim() const { return static_cast<int>(shape.size()); }
  bool is_scalar() const { return size() == 1; }

  int rows() const { return shape.empty() ? 1 : shape[0]; }
  int cols() const {
    if (dim() != 2) throw std::logic_error("Tensor: cols() on non-matrix " + shape_str());
    return shape[1];
  }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::string s;
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += 'x';
      s += std::to_string(shape[i]);
    }
    return s.empty() ? "scalar" : s;
  }
};

}  // namespace medtag
