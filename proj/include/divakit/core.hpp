#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace divakit {

inline constexpr int kShapeDims = 10;
inline constexpr int kMotorDims = 13;  // 10 shape + f0 + pressure + voicing
inline constexpr int kAudDims = 4;     // F0..F3
inline constexpr int kSomDims = 8;     // PA1..PA6 + pressure + voicing
inline constexpr int kPlaceRegions = 6;

// Column indices of the source parameters inside a motor vector.
inline constexpr int kF0Index = 10;
inline constexpr int kPressureIndex = 11;
inline constexpr int kVoicingIndex = 12;

template <typename Scalar>
using MotorVectorT = Eigen::Matrix<Scalar, kMotorDims, 1>;
template <typename Scalar>
using AudVectorT = Eigen::Matrix<Scalar, kAudDims, 1>;
template <typename Scalar>
using SomVectorT = Eigen::Matrix<Scalar, kSomDims, 1>;

using MotorVector = MotorVectorT<double>;
using AudVector = AudVectorT<double>;
using SomVector = SomVectorT<double>;
using ShapeVector = Eigen::Matrix<double, kShapeDims, 1>;
using AudJacobian = Eigen::Matrix<double, kAudDims, kMotorDims>;
using SomJacobian = Eigen::Matrix<double, kSomDims, kMotorDims>;

/// Row-major so that a program frame is a contiguous row.
using FrameMatrix = Eigen::Matrix<double, Eigen::Dynamic, kMotorDims, Eigen::RowMajor>;

/// Base of every library error. `what()` carries a human-readable diagnostic.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or configuration. Maps to CLI exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure inside the plant or a solver. Maps to CLI exit code 1.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed file or unreadable path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace divakit
