#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace mfpm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t z)
{
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Independent random streams are derived from (seed, stream id) so that
// adding a consumer of randomness never shifts the draws of another one.
enum class Stream : std::uint64_t {
  initial_state = 1,
  increments = 2,
  directions = 3,
  validation = 4,
  convexity = 5,
  monotonicity = 6,
  controls = 7,
};

inline Rng stream_rng(std::uint64_t seed, std::uint64_t stream_id)
{
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(stream_id * 0xD1B54A32D192ED03ULL)));
}

inline Rng stream_rng(std::uint64_t seed, Stream stream)
{
  return stream_rng(seed, static_cast<std::uint64_t>(stream));
}

inline Vec standard_normal(Eigen::Index n, Rng& rng)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec z(n);
  for (Eigen::Index a = 0; a < n; ++a) z(a) = normal(rng);
  return z;
}

inline Mat standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat z(rows, cols);
  // column-major fill so that column i is particle i
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) z(r, c) = normal(rng);
  return z;
}

inline bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace mfpm
