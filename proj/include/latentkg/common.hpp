#pragma once

#include <Eigen/Core>

#include <cstring>
#include <stdexcept>
#include <string>

namespace latentkg {

template <typename Scalar>
using RowMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixf = RowMatrix<float>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Vectorf = Vector<float>;

// Layer id used for the unpatched inference on the source prompt.
inline constexpr int kInferenceLayer = -1;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad call arguments (sizes, ranges, preconditions).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Malformed files, manifests, records.
class FormatError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

// Input is well formed but carries nothing to work with.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

template <typename Derived, typename OtherDerived>
bool bitwise_equal(const Eigen::DenseBase<Derived>& a,
                   const Eigen::DenseBase<OtherDerived>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      const auto x = a(r, c);
      const auto y = b(r, c);
      if (std::memcmp(&x, &y, sizeof(x)) != 0) return false;
    }
  }
  return true;
}

}  // namespace latentkg
