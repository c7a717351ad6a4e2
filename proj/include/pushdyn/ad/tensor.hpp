#pragma once

#include <Eigen/Core>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pushdyn::ad {

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

/// Dense multi-dimensional array with row-major element order, templated on
/// the scalar (f32 for training, f64 for gradient-check mode).
template <class S>
struct Tensor {
  using Storage = Eigen::Array<S, Eigen::Dynamic, 1>;

  std::vector<int> shape;
  Storage data;

  Tensor() = default;
  explicit Tensor(std::vector<int> shp) : shape(std::move(shp)) {
    data = Storage::Zero(numel_of(shape));
  }
  Tensor(std::vector<int> shp, Storage d) : shape(std::move(shp)), data(std::move(d)) {
    if (data.size() != numel_of(shape)) throw std::invalid_argument("tensor: data/shape mismatch");
  }

  static Eigen::Index numel_of(const std::vector<int>& s) {
    Eigen::Index n = 1;
    for (int d : s) {
      if (d <= 0) throw std::invalid_argument("tensor: nonpositive dimension in " + shape_str(s));
      n *= d;
    }
    return n;
  }

  Eigen::Index numel() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i < 0 ? rank() + i : i)]; }

  /// Product of all dimensions except the last (the "row" count when viewed
  /// as a matrix [rows, last]).
  Eigen::Index leading() const { return numel() / dim(-1); }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor ones(std::vector<int> s) {
    Tensor t(std::move(s));
    t.data.setOnes();
    return t;
  }
  static Tensor full(std::vector<int> s, S v) {
    Tensor t(std::move(s));
    t.data.setConstant(v);
    return t;
  }
  static Tensor scalar(S v) { return full({1}, v); }

  template <class T>
  Tensor<T> cast() const {
    Tensor<T> out;
    out.shape = shape;
    out.data = data.template cast<T>();
    return out;
  }

  S item() const {
    if (numel() != 1) throw std::invalid_argument("tensor: item() on non-scalar " + shape_str(shape));
    return data[0];
  }

  // Matrix views over the flattened [leading, last] layout (row-major).
  auto mat(Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        data.data(), rows, cols);
  }
  auto mat(Eigen::Index rows, Eigen::Index cols) const {
    return Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        data.data(), rows, cols);
  }
};

}  // namespace pushdyn::ad
