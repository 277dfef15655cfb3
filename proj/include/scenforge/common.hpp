#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace scenforge {

/// Error categories double as process exit codes for the command-line tool.
enum class ErrorKind { kUsage = 2, kData = 3, kBackend = 4, kTraining = 5 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ArgumentError : Error {
  explicit ArgumentError(const std::string& w) : Error(ErrorKind::kUsage, w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::kUsage, w) {}
};
struct DataError : Error {
  explicit DataError(const std::string& w) : Error(ErrorKind::kData, w) {}
};
struct SchemaError : DataError {
  using DataError::DataError;
};
struct ValidationError : DataError {
  using DataError::DataError;
};
struct LookupError : DataError {
  using DataError::DataError;
};
struct BackendError : Error {
  explicit BackendError(const std::string& w) : Error(ErrorKind::kBackend, w) {}
};
struct TrainingError : Error {
  explicit TrainingError(const std::string& w)
      : Error(ErrorKind::kTraining, w) {}
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  bool operator==(const Vec2&) const = default;
};

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

/// Shortest round-trip decimal form: 0.5 prints as "0.5", 20.0 as "20".
std::string format_number(double v);

/// Fixed one-decimal rendering used in natural-language templates.
std::string format_fixed1(double v);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

/// Derives an independent 64-bit stream seed from (master, index).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

using Rng = std::mt19937_64;

/// 64-bit FNV-1a over bytes.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace scenforge
