#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace bipedkit {

inline constexpr const char* kToolkitVersion = "0.3.0";
inline constexpr int kFormatVersion = 1;

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

// Base class for every error raised by the toolkit.
struct Error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input files or arguments (CLI exit code 2).
struct InputError : public Error {
  using Error::Error;
};

// Text that does not match a grammar; carries the 1-based position.
struct ParseError : public InputError {
  int line = 0;
  int column = 0;
  ParseError(const std::string& message, int line_, int column_)
      : InputError(message + " (line " + std::to_string(line_) + ", column " +
                   std::to_string(column_) + ")"),
        line(line_),
        column(column_) {}
};

// A value that violates a declared constraint.
struct ValidationError : public InputError {
  using InputError::InputError;
};

// Backend / network failures (CLI exit code 3).
struct TransportError : public Error {
  using Error::Error;
};

// Numerical blow-up inside an integrator.
struct SimulationError : public Error {
  double time = 0.0;
  SimulationError(const std::string& message, double time_)
      : Error(message + " at t=" + std::to_string(time_) + " s"), time(time_) {}
};

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kGravity = 9.81;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

inline double clamp(double x, double lo, double hi) {
  return x < lo ? lo : (x > hi ? hi : x);
}

inline double square(double x) { return x * x; }

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace bipedkit
