#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gpds {

/// A location in data space.
using Point = Eigen::VectorXd;
using PointList = std::vector<Point>;

/// Every stochastic routine takes its generator by reference; nothing holds one.
using Rng = std::mt19937_64;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Cholesky factorization failed even at the largest permitted jitter.
class IllConditioned : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline Eigen::VectorXd standard_normal_vector(std::size_t n, Rng& rng) {
  Eigen::VectorXd z(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = standard_normal(rng);
  return z;
}

/// Derives an independent stream seed (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace gpds
