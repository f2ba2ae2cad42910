#pragma once

#include <Eigen/Core>

#include <cassert>
#include <cstddef>
#include <vector>

namespace stablab {

/// Dense row-major tensor of doubles with runtime rank.  Index (i0,...,ik)
/// maps to flat offset ((i0*s1 + i1)*s2 + ...) so the last axis is
/// contiguous.  Zero-initialised on construction.  Storage is Eigen-aligned
/// so mapped kernels behave identically run to run.
class DenseTensor {
 public:
  DenseTensor() = default;

  explicit DenseTensor(std::vector<int> shape) : shape_(std::move(shape)) {
    Eigen::Index n = 1;
    for (int s : shape_) {
      assert(s > 0);
      n *= s;
    }
    data_ = Eigen::VectorXd::Zero(n);
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  int shape(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  std::size_t size() const { return static_cast<std::size_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  Eigen::VectorXd& flat() { return data_; }
  const Eigen::VectorXd& flat() const { return data_; }

  double operator[](std::size_t i) const {
    return data_(static_cast<Eigen::Index>(i));
  }
  double& operator[](std::size_t i) {
    return data_(static_cast<Eigen::Index>(i));
  }

  template <typename... Ix>
  double& operator()(Ix... ix) {
    return data_(static_cast<Eigen::Index>(flat_index(ix...)));
  }

  template <typename... Ix>
  double operator()(Ix... ix) const {
    return data_(static_cast<Eigen::Index>(flat_index(ix...)));
  }

  template <typename... Ix>
  std::size_t flat_index(Ix... ix) const {
    assert(sizeof...(Ix) == shape_.size());
    std::size_t flat = 0;
    std::size_t axis = 0;
    ((flat = flat * static_cast<std::size_t>(shape_[axis++]) +
             static_cast<std::size_t>(ix)),
     ...);
    return flat;
  }

  bool same_shape(const DenseTensor& other) const {
    return shape_ == other.shape_;
  }

  DenseTensor& operator+=(const DenseTensor& other) {
    assert(same_shape(other));
    data_ += other.data_;
    return *this;
  }

  DenseTensor& operator-=(const DenseTensor& other) {
    assert(same_shape(other));
    data_ -= other.data_;
    return *this;
  }

  DenseTensor& operator*=(double c) {
    data_ *= c;
    return *this;
  }

 private:
  std::vector<int> shape_;
  Eigen::VectorXd data_;
};

}  // namespace stablab
